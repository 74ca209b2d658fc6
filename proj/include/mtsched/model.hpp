#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtsched {

using Time = double;
using JobId = std::uint32_t;

// Absolute tolerance for time comparisons.
inline constexpr Time kTimeTolerance = 1e-9;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: flags, files, parameters. Maps to CLI exit code 3.
class InputError : public Error {
 public:
  using Error::Error;
};

// An internal invariant was broken. Maps to CLI exit code 4.
class InvariantError : public Error {
 public:
  using Error::Error;
};

struct PenaltyModel {
  double chi = 1.0;   // monetary cost factor
  double nu = 0.01;   // exponential scaling, 1/time

  void validate() const {
    if (!(chi > 0.0) || !std::isfinite(chi)) throw InputError("penalty: chi must be > 0");
    if (!(nu > 0.0) || !std::isfinite(nu)) throw InputError("penalty: nu must be > 0");
  }
};

struct EnvironmentConfig {
  std::vector<std::size_t> resources_per_tier{3, 3};
  PenaltyModel penalty{};
  double allowance_fraction = 0.20;

  static EnvironmentConfig uniform(std::size_t tiers, std::size_t resources) {
    EnvironmentConfig env;
    env.resources_per_tier.assign(tiers, resources);
    return env;
  }

  std::size_t num_tiers() const noexcept { return resources_per_tier.size(); }
  std::size_t resources(std::size_t tier) const { return resources_per_tier.at(tier); }
  std::size_t total_resources() const noexcept {
    std::size_t n = 0;
    for (auto m : resources_per_tier) n += m;
    return n;
  }

  void validate() const {
    if (resources_per_tier.empty()) throw InputError("environment: at least one tier is required");
    for (std::size_t j = 0; j < resources_per_tier.size(); ++j)
      if (resources_per_tier[j] == 0)
        throw InputError("environment: tier " + std::to_string(j + 1) + " has no resources");
    penalty.validate();
    if (!(allowance_fraction >= 0.0) || !std::isfinite(allowance_fraction))
      throw InputError("environment: allowance fraction must be >= 0");
  }
};

// A job of the stream. Ids are dense, 1-based, in arrival order. Only the
// first-tier arrival is an input; later tier arrivals are simulation outputs.
class Job {
 public:
  Job(JobId id, Time arrival, std::vector<Time> exec, Time target_completion)
      : id_(id), arrival_(arrival), exec_(std::move(exec)), target_(target_completion) {
    if (id_ == 0) throw InputError("job ids start at 1");
    if (exec_.empty()) throw InputError(describe("has no execution times"));
    if (!std::isfinite(arrival_) || arrival_ < 0.0) throw InputError(describe("has invalid arrival time"));
    for (Time e : exec_) {
      if (!(e > 0.0) || !std::isfinite(e)) throw InputError(describe("has non-positive execution time"));
      total_ += e;
    }
    if (!std::isfinite(target_)) throw InputError(describe("has invalid target completion"));
    if (deadline() < total_ - kTimeTolerance)
      throw InputError(describe("has a deadline shorter than its total execution time"));
  }

  JobId id() const noexcept { return id_; }
  Time arrival() const noexcept { return arrival_; }
  Time target_completion() const noexcept { return target_; }
  std::size_t num_tiers() const noexcept { return exec_.size(); }
  Time exec(std::size_t tier) const { return exec_.at(tier); }
  std::span<const Time> exec() const noexcept { return exec_; }
  Time total_exec() const noexcept { return total_; }
  Time deadline() const noexcept { return target_ - arrival_; }
  // Total waiting allowance across all tiers. Clamped at zero so that a
  // deadline equal to the execution time within tolerance reads as zero slack.
  Time allowance() const noexcept { return std::max(0.0, deadline() - total_); }

  friend bool operator==(const Job&, const Job&) = default;

 private:
  std::string describe(const std::string& what) const {
    return "job " + std::to_string(id_) + " " + what;
  }

  JobId id_;
  Time arrival_;
  std::vector<Time> exec_;
  Time target_;
  Time total_ = 0.0;
};

class JobSet {
 public:
  JobSet() = default;
  explicit JobSet(std::vector<Job> jobs) {
    for (auto& j : jobs) push_back(std::move(j));
  }

  void push_back(Job job) {
    if (job.id() != jobs_.size() + 1)
      throw InputError("job ids must be dense and ordered: expected " + std::to_string(jobs_.size() + 1) +
                       ", got " + std::to_string(job.id()));
    if (!jobs_.empty()) {
      if (job.arrival() < jobs_.back().arrival())
        throw InputError("job " + std::to_string(job.id()) + " arrives before its predecessor");
      if (job.num_tiers() != jobs_.front().num_tiers())
        throw InputError("job " + std::to_string(job.id()) + " has a different tier count");
    }
    jobs_.push_back(std::move(job));
  }

  const Job& at(JobId id) const {
    if (id == 0 || id > jobs_.size()) throw InputError("unknown job id " + std::to_string(id));
    return jobs_[id - 1];
  }
  bool contains(JobId id) const noexcept { return id >= 1 && id <= jobs_.size(); }
  std::size_t size() const noexcept { return jobs_.size(); }
  bool empty() const noexcept { return jobs_.empty(); }
  std::size_t num_tiers() const noexcept { return jobs_.empty() ? 0 : jobs_.front().num_tiers(); }
  auto begin() const noexcept { return jobs_.begin(); }
  auto end() const noexcept { return jobs_.end(); }

  friend bool operator==(const JobSet&, const JobSet&) = default;

 private:
  std::vector<Job> jobs_;
};

// Where a job is in the environment and how long it has waited so far.
// Tier indices are 0-based.
struct JobProgress {
  JobId id = 0;
  std::size_t tier = 0;                 // tier the job currently resides in
  std::vector<Time> tier_arrivals;      // A_{i,j} for j <= tier
  std::vector<Time> tier_departures;    // D_{i,j} for j < tier
  std::vector<Time> completed_waits;    // waits of finished tiers, j < tier
  Time elapsed_wait = 0.0;              // wait accrued so far in the current tier

  Time completed_wait_total() const noexcept {
    Time s = 0.0;
    for (Time w : completed_waits) s += w;
    return s;
  }
};

// Queue of one resource. The head is the job in service when
// head_in_service is set; it is pinned and never reordered or migrated.
struct ResourceQueue {
  std::vector<JobId> jobs;
  bool head_in_service = false;
  Time head_residual = 0.0;

  std::span<const JobId> waiting() const noexcept {
    std::span<const JobId> all(jobs);
    return head_in_service && !all.empty() ? all.subspan(1) : all;
  }
  std::size_t waiting_count() const noexcept { return waiting().size(); }

  friend bool operator==(const ResourceQueue&, const ResourceQueue&) = default;
};

// beta: per tier, per resource, the ordered job ids of each queue.
struct Schedule {
  std::vector<std::vector<ResourceQueue>> tiers;

  static Schedule empty_for(const EnvironmentConfig& env) {
    Schedule s;
    s.tiers.resize(env.num_tiers());
    for (std::size_t j = 0; j < env.num_tiers(); ++j) s.tiers[j].resize(env.resources(j));
    return s;
  }

  ResourceQueue& queue(std::size_t tier, std::size_t resource) { return tiers.at(tier).at(resource); }
  const ResourceQueue& queue(std::size_t tier, std::size_t resource) const {
    return tiers.at(tier).at(resource);
  }

  std::size_t waiting_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tiers)
      for (const auto& q : t) n += q.waiting_count();
    return n;
  }
  std::size_t waiting_count(std::size_t tier) const {
    std::size_t n = 0;
    for (const auto& q : tiers.at(tier)) n += q.waiting_count();
    return n;
  }

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

// Frozen state of the environment at one instant: the live schedule plus the
// wait bookkeeping of every resident job.
struct Snapshot {
  Time time = 0.0;
  Schedule schedule;
  std::map<JobId, JobProgress> progress;

  const JobProgress& progress_of(JobId id) const {
    auto it = progress.find(id);
    if (it == progress.end())
      throw InputError("job " + std::to_string(id) + " is not resident in the snapshot");
    return it->second;
  }
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string summary() const {
    std::string s;
    for (const auto& v : violations) {
      if (!s.empty()) s += "; ";
      s += v;
    }
    return s;
  }
};

namespace detail {

inline void check_structure(const Schedule& schedule, const EnvironmentConfig& env, const JobSet& jobs,
                            ValidationReport& report) {
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
  if (schedule.tiers.size() != env.num_tiers()) {
    fail("schedule has " + std::to_string(schedule.tiers.size()) + " tiers, environment has " +
         std::to_string(env.num_tiers()));
    return;
  }
  std::map<JobId, std::size_t> tier_of;
  for (std::size_t j = 0; j < schedule.tiers.size(); ++j) {
    const auto& tier = schedule.tiers[j];
    if (tier.size() != env.resources(j))
      fail("tier " + std::to_string(j + 1) + " has " + std::to_string(tier.size()) + " queues, expected " +
           std::to_string(env.resources(j)));
    std::set<JobId> seen;
    for (std::size_t k = 0; k < tier.size(); ++k) {
      const auto& q = tier[k];
      if (q.head_in_service && q.jobs.empty())
        fail("queue " + std::to_string(j + 1) + "," + std::to_string(k + 1) + " marks an in-service head but is empty");
      if (q.head_in_service && (!(q.head_residual >= -kTimeTolerance) || !std::isfinite(q.head_residual)))
        fail("queue " + std::to_string(j + 1) + "," + std::to_string(k + 1) + " has a negative residual");
      for (JobId id : q.jobs) {
        if (!jobs.contains(id)) {
          fail("unknown job " + std::to_string(id) + " in tier " + std::to_string(j + 1));
          continue;
        }
        if (!seen.insert(id).second)
          fail("job " + std::to_string(id) + " duplicate within tier " + std::to_string(j + 1));
        auto [it, fresh] = tier_of.emplace(id, j);
        if (!fresh && it->second != j)
          fail("job " + std::to_string(id) + " appears in tiers " + std::to_string(it->second + 1) + " and " +
               std::to_string(j + 1));
      }
    }
  }
}

}  // namespace detail

// Structural checks only: shapes, known ids, no duplicates within or across
// tiers, well-formed in-service heads.
inline ValidationReport validate_schedule(const Schedule& schedule, const EnvironmentConfig& env,
                                          const JobSet& jobs) {
  ValidationReport report;
  detail::check_structure(schedule, env, jobs, report);
  return report;
}

// Structural checks plus consistency with a reference state: every job sits
// in the tier it resides in, and in-service heads are untouched.
inline ValidationReport validate_schedule(const Schedule& schedule, const EnvironmentConfig& env,
                                          const JobSet& jobs, const Snapshot& reference) {
  ValidationReport report;
  detail::check_structure(schedule, env, jobs, report);
  if (!report.ok()) return report;
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

  const auto& ref = reference.schedule;
  if (ref.tiers.size() != schedule.tiers.size()) {
    fail("reference schedule has a different tier count");
    return report;
  }
  for (std::size_t j = 0; j < schedule.tiers.size(); ++j) {
    std::multiset<JobId> want, got;
    for (std::size_t k = 0; k < schedule.tiers[j].size(); ++k) {
      const auto& q = schedule.tiers[j][k];
      const auto& r = ref.tiers[j].at(k);
      const std::string where = std::to_string(j + 1) + "," + std::to_string(k + 1);
      if (r.head_in_service) {
        if (!q.head_in_service || q.jobs.empty() || q.jobs.front() != r.jobs.front())
          fail("in-service job " + std::to_string(r.jobs.front()) + " of queue " + where + " was reordered or migrated");
        else if (std::abs(q.head_residual - r.head_residual) > kTimeTolerance)
          fail("in-service job " + std::to_string(r.jobs.front()) + " residual changed");
      } else if (q.head_in_service) {
        fail("queue " + where + " claims an in-service head that is not in service");
      }
      for (JobId id : q.waiting()) got.insert(id);
      for (JobId id : r.waiting()) want.insert(id);
    }
    if (want != got) fail("tier " + std::to_string(j + 1) + " waiting set differs from the resident jobs");
  }
  return report;
}

// Sum of execution times of the jobs ahead of `id` in its tier-`tier` queue,
// including the residual of an in-service head. Zero for the job in service.
inline Time remaining_wait(const Schedule& schedule, JobId id, std::size_t tier, const JobSet& jobs) {
  for (const auto& q : schedule.tiers.at(tier)) {
    auto it = std::find(q.jobs.begin(), q.jobs.end(), id);
    if (it == q.jobs.end()) continue;
    if (it == q.jobs.begin()) return 0.0;
    Time wait = 0.0;
    auto first = q.jobs.begin();
    if (q.head_in_service) {
      wait += q.head_residual;
      ++first;
    }
    for (auto h = first; h != it; ++h) wait += jobs.at(*h).exec(tier);
    return wait;
  }
  throw InputError("job " + std::to_string(id) + " not found in tier " + std::to_string(tier + 1));
}

}  // namespace mtsched
