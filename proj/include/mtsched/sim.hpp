#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "mtsched/model.hpp"
#include "mtsched/penalty.hpp"
#include "mtsched/workload.hpp"

namespace mtsched {

// Where an arriving job goes: a resource queue of its tier and a position in it.
struct Placement {
  std::size_t resource = 0;
  std::size_t position = 0;
};

// Dispatcher logic of every tier. `live` carries up-to-date head residuals
// for the tier being assigned.
class PlacementPolicy {
 public:
  virtual ~PlacementPolicy() = default;
  virtual std::string name() const = 0;
  virtual Placement assign(const Job& job, std::size_t tier, const Schedule& live, const JobSet& jobs) = 0;
};

// Produces a new schedule for a frozen snapshot.
using Optimizer = std::function<Schedule(const Snapshot&)>;

// When the reschedule hook fires.
struct RescheduleEpoch {
  enum class Kind { Never, EveryEvent, EveryArrivals, Interval };
  Kind kind = Kind::EveryEvent;
  std::size_t arrivals = 1;  // EveryArrivals: fire after every k external arrivals
  Time interval = 1.0;       // Interval: fire at the first event past each multiple

  // "event", "never", "arrivals:K", "time:DT"
  static RescheduleEpoch parse(std::string_view s) {
    RescheduleEpoch e;
    if (s == "event") return e;
    if (s == "never") {
      e.kind = Kind::Never;
      return e;
    }
    auto colon = s.find(':');
    if (colon != std::string_view::npos) {
      auto head = s.substr(0, colon);
      auto tail = s.substr(colon + 1);
      if (head == "arrivals") {
        e.kind = Kind::EveryArrivals;
        e.arrivals = detail::parse_number<std::size_t>(tail, 0, "epoch arrivals");
        if (e.arrivals == 0) throw InputError("epoch: arrivals must be >= 1");
        return e;
      }
      if (head == "time") {
        e.kind = Kind::Interval;
        e.interval = detail::parse_number<double>(tail, 0, "epoch interval");
        if (!(e.interval > 0.0)) throw InputError("epoch: interval must be > 0");
        return e;
      }
    }
    throw InputError("unknown epoch '" + std::string(s) + "' (expected event, never, arrivals:K or time:DT)");
  }
};

enum class TraceKind { Arrive, Start, Finish };

inline std::string_view to_string(TraceKind k) noexcept {
  switch (k) {
    case TraceKind::Arrive: return "arrive";
    case TraceKind::Start: return "start";
    case TraceKind::Finish: return "finish";
  }
  return "?";
}

struct TraceEvent {
  Time time = 0.0;
  TraceKind kind = TraceKind::Arrive;
  JobId job = 0;
  std::size_t tier = 0;
  std::size_t resource = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

inline constexpr int kTraceSchemaVersion = 1;

// mtsched-trace 1
// fields time kind job tier resource
// <time> <arrive|start|finish> <job> <tier 1-based> <resource 1-based>
inline void write_trace(std::ostream& os, const std::vector<TraceEvent>& trace) {
  os << "mtsched-trace " << kTraceSchemaVersion << '\n' << "fields time kind job tier resource\n";
  for (const auto& e : trace)
    os << format_time(e.time) << ' ' << to_string(e.kind) << ' ' << e.job << ' ' << e.tier + 1 << ' '
       << e.resource + 1 << '\n';
}

struct JobOutcome {
  JobId id = 0;
  std::vector<Time> tier_arrivals;
  std::vector<Time> tier_starts;
  std::vector<Time> tier_departures;
  std::vector<std::size_t> tier_resources;
  std::vector<Time> waits;        // omega_{i,j}
  std::vector<Time> tier_alpha;   // omega_{i,j} - differentiated allowance of tier j
  Time total_wait = 0.0;
  Time response_time = 0.0;
  Time alpha = 0.0;               // response time - deadline
  double penalty = 0.0;           // identical in both modes once all tiers are done
};

struct SimReport {
  std::vector<JobOutcome> jobs;
  Time total_violation = 0.0;
  Time positive_violation = 0.0;
  Time max_violation = -std::numeric_limits<Time>::infinity();
  double total_penalty = 0.0;
  Time total_wait = 0.0;
  std::size_t reschedules = 0;
  std::size_t rejected_reschedules = 0;
};

struct SimOptions {
  bool record_trace = true;
  bool check_invariants = true;
};

class Simulator {
 public:
  Simulator(const JobSet& jobs, EnvironmentConfig env, PlacementPolicy& policy, SimOptions options = {})
      : jobs_(jobs), env_(std::move(env)), policy_(policy), options_(options) {
    env_.validate();
    if (!jobs_.empty() && jobs_.num_tiers() != env_.num_tiers())
      throw InputError("workload has " + std::to_string(jobs_.num_tiers()) + " tiers, environment has " +
                       std::to_string(env_.num_tiers()));
    live_ = Schedule::empty_for(env_);
    service_end_.resize(env_.num_tiers());
    for (std::size_t j = 0; j < env_.num_tiers(); ++j) service_end_[j].assign(env_.resources(j), 0.0);
    arrived_.assign(env_.num_tiers(), 0);
    departed_.assign(env_.num_tiers(), 0);
    records_.resize(jobs_.size());
    for (const Job& job : jobs_) {
      auto& r = records_[job.id() - 1];
      const auto n = env_.num_tiers();
      r.arrivals.assign(n, nan());
      r.starts.assign(n, nan());
      r.departures.assign(n, nan());
      r.resources.assign(n, 0);
      events_.push(Event{job.arrival(), EventKind::Arrival, job.id(), 0, 0});
    }
  }

  void set_optimizer(Optimizer optimizer, RescheduleEpoch epoch = {}) {
    optimizer_ = std::move(optimizer);
    epoch_ = epoch;
    next_interval_ = epoch.interval;
  }

  bool done() const noexcept { return events_.empty(); }
  Time clock() const noexcept { return clock_; }
  Time next_event_time() const { return events_.empty() ? std::numeric_limits<Time>::infinity() : events_.top().time; }
  const EnvironmentConfig& env() const noexcept { return env_; }
  const JobSet& jobs() const noexcept { return jobs_; }
  const Schedule& schedule() const noexcept { return live_; }
  const std::vector<TraceEvent>& trace() const noexcept { return trace_; }
  const std::vector<std::string>& incidents() const noexcept { return incidents_; }
  std::size_t external_arrivals() const noexcept { return arrived_.empty() ? 0 : arrived_[0]; }
  std::size_t reschedules() const noexcept { return reschedules_; }
  std::size_t waiting_count() const noexcept { return live_.waiting_count(); }

  // Processes the next event, then fires the reschedule hook if due.
  void step() {
    if (events_.empty()) throw InvariantError("step called with no pending events");
    const Event ev = events_.top();
    events_.pop();
    if (ev.time < clock_ - kTimeTolerance) throw InvariantError("event time went backwards");
    clock_ = std::max(clock_, ev.time);

    if (ev.kind == EventKind::Arrival)
      on_arrival(ev);
    else
      on_completion(ev);

    if (optimizer_ && hook_due(ev)) reschedule(optimizer_);
    if (options_.check_invariants) check_invariants();
  }

  // Processes every event with time <= t and advances the clock to t.
  void run_until(Time t) {
    while (!events_.empty() && events_.top().time <= t) step();
    clock_ = std::max(clock_, t);
  }

  Snapshot snapshot() const {
    Snapshot s;
    s.time = clock_;
    s.schedule = live_;
    for (std::size_t j = 0; j < live_.tiers.size(); ++j) {
      for (std::size_t k = 0; k < live_.tiers[j].size(); ++k) {
        auto& q = s.schedule.tiers[j][k];
        q.head_residual = q.head_in_service ? std::max(0.0, service_end_[j][k] - clock_) : 0.0;
        for (JobId id : q.jobs) s.progress.emplace(id, progress_of(id));
      }
    }
    return s;
  }

  // Asks the optimizer for a schedule of the waiting jobs and installs it.
  // An invalid schedule is rejected and logged; the live schedule is kept.
  bool reschedule(const Optimizer& optimizer) {
    const Snapshot snap = snapshot();
    Schedule candidate = optimizer(snap);
    const auto report = validate_schedule(candidate, env_, jobs_, snap);
    if (!report.ok()) {
      incidents_.push_back("t=" + format_time(clock_) + ": rejected schedule: " + report.summary());
      ++rejected_;
      return false;
    }
    ++reschedules_;
    for (std::size_t j = 0; j < live_.tiers.size(); ++j) {
      for (std::size_t k = 0; k < live_.tiers[j].size(); ++k) {
        live_.tiers[j][k].jobs = std::move(candidate.tiers[j][k].jobs);
        for (JobId id : live_.tiers[j][k].waiting()) records_[id - 1].resources[j] = k;
      }
    }
    for (std::size_t j = 0; j < live_.tiers.size(); ++j)
      for (std::size_t k = 0; k < live_.tiers[j].size(); ++k)
        if (!live_.tiers[j][k].head_in_service && !live_.tiers[j][k].jobs.empty()) start_service(j, k);
    return true;
  }

  SimReport run_to_completion() {
    while (!events_.empty()) step();
    return report();
  }

  // Outcome of every job. Requires the run to be complete.
  SimReport report() const {
    SimReport out;
    out.reschedules = reschedules_;
    out.rejected_reschedules = rejected_;
    const std::size_t n = env_.num_tiers();
    for (const Job& job : jobs_) {
      const auto& r = records_[job.id() - 1];
      if (r.status != Status::Done) throw InvariantError("job " + std::to_string(job.id()) + " did not finish");
      JobOutcome o;
      o.id = job.id();
      o.tier_arrivals = r.arrivals;
      o.tier_starts = r.starts;
      o.tier_departures = r.departures;
      o.tier_resources = r.resources;
      for (std::size_t j = 0; j < n; ++j) {
        const Time w = r.starts[j] - r.arrivals[j];
        o.waits.push_back(w);
        o.tier_alpha.push_back(w - differentiated_allowance(job, j));
        o.total_wait += w;
      }
      o.response_time = r.departures[n - 1] - r.arrivals[0];
      o.alpha = o.response_time - job.deadline();
      o.penalty = penalty(o.alpha, env_.penalty);
      out.total_violation += o.alpha;
      out.positive_violation += std::max(0.0, o.alpha);
      out.max_violation = std::max(out.max_violation, o.alpha);
      out.total_penalty += o.penalty;
      out.total_wait += o.total_wait;
      out.jobs.push_back(std::move(o));
    }
    return out;
  }

 private:
  enum class EventKind { Completion = 0, Arrival = 1 };
  enum class Status { Pending, Waiting, InService, Done };

  struct Event {
    Time time;
    EventKind kind;
    JobId job;
    std::size_t tier;
    std::size_t resource;
  };

  // Min-heap order: time, then completions before arrivals, then lower job id.
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      if (a.time != b.time) return a.time > b.time;
      if (a.kind != b.kind) return a.kind > b.kind;
      return a.job > b.job;
    }
  };

  struct Record {
    Status status = Status::Pending;
    std::size_t tier = 0;
    std::vector<Time> arrivals, starts, departures;
    std::vector<std::size_t> resources;
  };

  static constexpr Time nan() noexcept { return std::numeric_limits<Time>::quiet_NaN(); }

  JobProgress progress_of(JobId id) const {
    const auto& r = records_[id - 1];
    JobProgress p;
    p.id = id;
    p.tier = r.tier;
    p.tier_arrivals.assign(r.arrivals.begin(), r.arrivals.begin() + static_cast<std::ptrdiff_t>(r.tier) + 1);
    p.tier_departures.assign(r.departures.begin(), r.departures.begin() + static_cast<std::ptrdiff_t>(r.tier));
    for (std::size_t j = 0; j < r.tier; ++j) p.completed_waits.push_back(r.starts[j] - r.arrivals[j]);
    p.elapsed_wait = r.status == Status::InService ? r.starts[r.tier] - r.arrivals[r.tier] : clock_ - r.arrivals[r.tier];
    return p;
  }

  void record(TraceKind kind, JobId job, std::size_t tier, std::size_t resource) {
    if (options_.record_trace) trace_.push_back(TraceEvent{clock_, kind, job, tier, resource});
  }

  void on_arrival(const Event& ev) {
    const std::size_t j = ev.tier;
    auto& r = records_[ev.job - 1];
    r.status = Status::Waiting;
    r.tier = j;
    r.arrivals[j] = clock_;
    ++arrived_[j];

    for (std::size_t k = 0; k < live_.tiers[j].size(); ++k) {
      auto& q = live_.tiers[j][k];
      q.head_residual = q.head_in_service ? std::max(0.0, service_end_[j][k] - clock_) : 0.0;
    }
    const Placement p = policy_.assign(jobs_.at(ev.job), j, live_, jobs_);
    if (p.resource >= live_.tiers[j].size())
      throw InvariantError("policy " + policy_.name() + " placed job " + std::to_string(ev.job) +
                           " on nonexistent resource " + std::to_string(p.resource + 1));
    auto& q = live_.tiers[j][p.resource];
    if (p.position > q.jobs.size() || (q.head_in_service && p.position == 0))
      throw InvariantError("policy " + policy_.name() + " placed job " + std::to_string(ev.job) +
                           " at invalid position " + std::to_string(p.position));
    q.jobs.insert(q.jobs.begin() + static_cast<std::ptrdiff_t>(p.position), ev.job);
    r.resources[j] = p.resource;
    record(TraceKind::Arrive, ev.job, j, p.resource);
    if (!q.head_in_service) start_service(j, p.resource);
  }

  void on_completion(const Event& ev) {
    const std::size_t j = ev.tier, k = ev.resource;
    auto& q = live_.tiers[j][k];
    if (!q.head_in_service || q.jobs.empty() || q.jobs.front() != ev.job)
      throw InvariantError("completion of job " + std::to_string(ev.job) + " that is not in service");
    auto& r = records_[ev.job - 1];
    r.departures[j] = clock_;
    ++departed_[j];
    q.jobs.erase(q.jobs.begin());
    q.head_in_service = false;
    q.head_residual = 0.0;
    record(TraceKind::Finish, ev.job, j, k);
    if (j + 1 < env_.num_tiers()) {
      events_.push(Event{clock_, EventKind::Arrival, ev.job, j + 1, 0});
      r.status = Status::Pending;
    } else {
      r.status = Status::Done;
    }
    if (!q.jobs.empty()) start_service(j, k);
  }

  void start_service(std::size_t j, std::size_t k) {
    auto& q = live_.tiers[j][k];
    const JobId id = q.jobs.front();
    auto& r = records_[id - 1];
    r.status = Status::InService;
    r.starts[j] = clock_;
    r.resources[j] = k;
    q.head_in_service = true;
    const Time exec = jobs_.at(id).exec(j);
    q.head_residual = exec;
    service_end_[j][k] = clock_ + exec;
    events_.push(Event{service_end_[j][k], EventKind::Completion, id, j, k});
    record(TraceKind::Start, id, j, k);
  }

  bool hook_due(const Event& ev) {
    switch (epoch_.kind) {
      case RescheduleEpoch::Kind::Never: return false;
      case RescheduleEpoch::Kind::EveryEvent: return true;
      case RescheduleEpoch::Kind::EveryArrivals:
        return ev.kind == EventKind::Arrival && ev.tier == 0 && arrived_[0] % epoch_.arrivals == 0;
      case RescheduleEpoch::Kind::Interval:
        if (clock_ + kTimeTolerance < next_interval_) return false;
        while (next_interval_ <= clock_ + kTimeTolerance) next_interval_ += epoch_.interval;
        return true;
    }
    return false;
  }

  void check_invariants() const {
    for (std::size_t j = 0; j < live_.tiers.size(); ++j) {
      std::size_t resident = 0;
      for (const auto& q : live_.tiers[j]) {
        if (!q.head_in_service && !q.jobs.empty())
          throw InvariantError("work conservation: idle resource with waiting jobs in tier " + std::to_string(j + 1));
        resident += q.jobs.size();
      }
      if (arrived_[j] != resident + departed_[j])
        throw InvariantError("job conservation broken in tier " + std::to_string(j + 1));
    }
  }

  const JobSet& jobs_;
  EnvironmentConfig env_;
  PlacementPolicy& policy_;
  SimOptions options_;

  Time clock_ = 0.0;
  Schedule live_;
  std::vector<std::vector<Time>> service_end_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::vector<Record> records_;
  std::vector<std::size_t> arrived_, departed_;
  std::vector<TraceEvent> trace_;
  std::vector<std::string> incidents_;

  Optimizer optimizer_;
  RescheduleEpoch epoch_{RescheduleEpoch::Kind::Never};
  Time next_interval_ = 0.0;
  std::size_t reschedules_ = 0;
  std::size_t rejected_ = 0;
};

}  // namespace mtsched
