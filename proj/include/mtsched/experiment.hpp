#pragma once

#include <algorithm>
#include <cmath>
#include <atomic>
#include <future>
#include <thread>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtsched/baselines.hpp"
#include "mtsched/ga.hpp"
#include "mtsched/model.hpp"
#include "mtsched/penalty.hpp"
#include "mtsched/sim.hpp"
#include "mtsched/workload.hpp"

namespace mtsched {

// A policy as named on the command line: a dispatcher, optionally refined by
// one of the GA variants under one allowance mode.
//   fcfs | wrr | wlc | random | ga-virtualized[-wal|-wpt] | ga-segmented[-wal|-wpt]
struct PolicySpec {
  PolicyKind placement = PolicyKind::FCFS;
  std::optional<QueueMode> optimizer;
  AllowanceMode allowance = AllowanceMode::MultiTier;

  bool optimizing() const noexcept { return optimizer.has_value(); }

  std::string name() const {
    if (!optimizer) return std::string(to_string(placement));
    return "ga-" + std::string(to_string(*optimizer)) + "-" + std::string(to_string(allowance));
  }

  static PolicySpec parse(std::string_view s, AllowanceMode default_mode = AllowanceMode::MultiTier) {
    PolicySpec p;
    p.allowance = default_mode;
    if (s == "fcfs") return p;
    if (s == "wrr") {
      p.placement = PolicyKind::WeightedRoundRobin;
      return p;
    }
    if (s == "wlc") {
      p.placement = PolicyKind::WeightedLeastConnection;
      return p;
    }
    if (s == "random") {
      p.placement = PolicyKind::RandomAssign;
      return p;
    }
    auto strip = [&](std::string_view prefix) {
      if (!s.starts_with(prefix)) return false;
      auto rest = s.substr(prefix.size());
      if (rest.empty()) return true;
      if (rest == "-wal" || rest == "-wpt") {
        p.allowance = parse_allowance_mode(rest.substr(1));
        return true;
      }
      return false;
    };
    if (strip("ga-virtualized")) {
      p.optimizer = QueueMode::SystemVirtualized;
      return p;
    }
    if (strip("ga-segmented")) {
      p.optimizer = QueueMode::Segmented;
      return p;
    }
    throw InputError("unknown policy '" + std::string(s) +
                     "' (expected fcfs, wrr, wlc, random, ga-virtualized[-wal|-wpt], ga-segmented[-wal|-wpt])");
  }
};

struct ExperimentConfig {
  EnvironmentConfig env{};
  GAConfig ga{};
  RescheduleEpoch epoch{};
  std::uint64_t seed = 1;  // drives the GA and random placement
};

inline GAConfig ga_config_for(const PolicySpec& policy, const ExperimentConfig& cfg, std::uint64_t seed) {
  GAConfig ga = cfg.ga;
  ga.queue_mode = policy.optimizer.value_or(QueueMode::SystemVirtualized);
  ga.allowance = policy.allowance;
  ga.seed = seed;
  return ga;
}

// ---------------------------------------------------------------------------
// Frozen snapshots
// ---------------------------------------------------------------------------

// Runs the workload under a dispatcher until at least `waiting` jobs are
// queued (not in service), then freezes the state.
inline Snapshot freeze_snapshot(const JobSet& jobs, const EnvironmentConfig& env, PlacementPolicy& placement,
                                std::size_t waiting) {
  Simulator sim(jobs, env, placement, SimOptions{.record_trace = false});
  while (!sim.done()) {
    sim.step();
    if (sim.waiting_count() >= waiting && sim.next_event_time() > sim.clock()) return sim.snapshot();
  }
  throw InputError("workload never reaches " + std::to_string(waiting) + " waiting jobs");
}

struct SnapshotOutcome {
  PolicySpec policy;
  Snapshot snapshot;
  Schedule enhanced;
  ViolationBreakdown initial;
  ViolationBreakdown enhanced_breakdown;
  std::vector<GenerationStats> history;
  std::size_t evaluations = 0;
};

// Optimizes one frozen snapshot. Non-optimizing policies keep the snapshot's
// schedule, so their initial and enhanced figures coincide.
inline SnapshotOutcome optimize_snapshot(const Snapshot& snapshot, const JobSet& jobs, const PolicySpec& policy,
                                         const ExperimentConfig& cfg) {
  SnapshotOutcome out{.policy = policy, .snapshot = snapshot, .enhanced = snapshot.schedule};
  out.initial = total_penalty(jobs, snapshot, policy.allowance, cfg.env.penalty);
  if (policy.optimizing()) {
    auto ga = optimize(snapshot, jobs, ga_config_for(policy, cfg, cfg.seed));
    out.enhanced = std::move(ga.best);
    out.history = std::move(ga.history);
    out.evaluations = ga.evaluations;
  }
  Snapshot after = snapshot;
  after.schedule = out.enhanced;
  out.enhanced_breakdown = total_penalty(jobs, after, policy.allowance, cfg.env.penalty);
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end runs
// ---------------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  Time time = 0.0;
  std::size_t waiting = 0;
  double initial_fitness = 0.0;
  double best_fitness = 0.0;
};

struct RunOutcome {
  PolicySpec policy;
  SimReport report;
  std::vector<TraceEvent> trace;
  std::vector<EpochRecord> epochs;
  std::vector<std::string> incidents;
};

// Simulates the whole workload. Optimizing policies dispatch with FCFS and
// rerun their GA on every reschedule epoch; epoch e uses GA substream e.
inline RunOutcome run_policy(const JobSet& jobs, const PolicySpec& policy, const ExperimentConfig& cfg,
                             bool with_optimizer = true) {
  auto placement = make_policy(policy.placement, cfg.seed);
  Simulator sim(jobs, cfg.env, *placement);
  RunOutcome out{.policy = policy};
  if (policy.optimizing() && with_optimizer) {
    sim.set_optimizer(
        [&](const Snapshot& snap) {
          if (snap.schedule.waiting_count() == 0) return snap.schedule;
          const std::size_t e = out.epochs.size();
          auto ga = optimize(snap, jobs, ga_config_for(policy, cfg, derive_seed(cfg.seed, e)));
          out.epochs.push_back(
              EpochRecord{e, snap.time, snap.schedule.waiting_count(), ga.initial_fitness, ga.best_fitness});
          return std::move(ga.best);
        },
        cfg.epoch);
  }
  out.report = sim.run_to_completion();
  out.trace = sim.trace();
  out.incidents = sim.incidents();
  return out;
}

struct RunComparison {
  RunOutcome initial;   // same dispatcher without the optimizer
  RunOutcome enhanced;  // the policy as specified
};

inline RunComparison run_with_baseline(const JobSet& jobs, const PolicySpec& policy, const ExperimentConfig& cfg) {
  RunComparison c;
  c.enhanced = run_policy(jobs, policy, cfg, true);
  if (policy.optimizing())
    c.initial = run_policy(jobs, policy, cfg, false);
  else
    c.initial = c.enhanced;
  return c;
}

// ---------------------------------------------------------------------------
// Seed sweeps
// ---------------------------------------------------------------------------

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

struct SeedRun {
  std::uint64_t seed = 0;
  PolicySpec policy;
  SimReport report;
};

struct CompareRow {
  PolicySpec policy;
  double total_violation = 0.0;  // median over seeds of per-seed totals
  double mean_violation = 0.0;   // median over seeds of per-seed means
  double max_violation = 0.0;    // median over seeds of per-seed maxima
  double total_penalty = 0.0;    // median over seeds of per-seed penalty
  std::size_t seeds = 0;
};

struct Comparison {
  std::vector<CompareRow> rows;
  std::vector<SeedRun> runs;  // policy-major, seed order within a policy
};

inline double mean_alpha(const SimReport& r) {
  return r.jobs.empty() ? 0.0 : r.total_violation / static_cast<double>(r.jobs.size());
}

inline std::vector<CompareRow> summarize(const std::vector<PolicySpec>& policies, const std::vector<SeedRun>& runs) {
  std::vector<CompareRow> rows;
  for (const auto& p : policies) {
    std::vector<double> tot, mean, mx, pen;
    for (const auto& r : runs) {
      if (r.policy.name() != p.name()) continue;
      tot.push_back(r.report.total_violation);
      mean.push_back(mean_alpha(r.report));
      mx.push_back(r.report.max_violation);
      pen.push_back(r.report.total_penalty);
    }
    rows.push_back(CompareRow{p, median(tot), median(mean), median(mx), median(pen), tot.size()});
  }
  return rows;
}

// Runs every policy on every seed. With no fixed workload, seed s also
// generates the workload (spec.seed = s). Seeds run concurrently, one
// simulator each; results are merged in a fixed order.
inline Comparison compare_policies(const std::vector<PolicySpec>& policies, const std::vector<std::uint64_t>& seeds,
                                   const WorkloadSpec& workload, const ExperimentConfig& cfg,
                                   const JobSet* fixed_jobs = nullptr, unsigned threads = 0) {
  if (seeds.empty()) throw InputError("compare: at least one seed is required");
  if (policies.empty()) throw InputError("compare: at least one policy is required");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  struct Task {
    std::size_t policy;
    std::size_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < policies.size(); ++p)
    for (std::size_t s = 0; s < seeds.size(); ++s) tasks.push_back({p, s});

  std::vector<JobSet> workloads;
  for (auto seed : seeds) {
    if (fixed_jobs) {
      workloads.push_back(*fixed_jobs);
    } else {
      WorkloadSpec w = workload;
      w.seed = seed;
      workloads.push_back(generate(w, cfg.env));
    }
  }

  std::vector<SeedRun> runs(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const auto [p, s] = tasks[t];
      ExperimentConfig c = cfg;
      c.seed = seeds[s];
      runs[t] = SeedRun{seeds[s], policies[p], run_policy(workloads[s], policies[p], c).report};
    }
  };
  std::vector<std::future<void>> pool;
  for (unsigned i = 0; i < std::min<std::size_t>(threads, tasks.size()); ++i)
    pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();

  Comparison out;
  out.rows = summarize(policies, runs);
  out.runs = std::move(runs);
  return out;
}

// (initial - enhanced) / initial in percent; NaN when initial is not positive.
inline double improvement_percent(double initial, double enhanced) {
  if (!(initial > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * (initial - enhanced) / initial;
}

}  // namespace mtsched
