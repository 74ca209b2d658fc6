#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mtsched/model.hpp"

namespace mtsched {

// Which waiting allowance a violation is measured against.
enum class AllowanceMode {
  MultiTier,       // the job's whole allowance, against its cumulative wait
  Differentiated,  // per-tier share of the allowance, proportional to execution time
};

inline std::string_view to_string(AllowanceMode mode) noexcept {
  return mode == AllowanceMode::MultiTier ? "wal" : "wpt";
}

inline AllowanceMode parse_allowance_mode(std::string_view s) {
  if (s == "wal") return AllowanceMode::MultiTier;
  if (s == "wpt") return AllowanceMode::Differentiated;
  throw InputError("unknown allowance mode '" + std::string(s) + "' (expected wal or wpt)");
}

// Share of the job's total allowance granted to one tier.
inline Time differentiated_allowance(const Job& job, std::size_t tier) {
  if (!(job.total_exec() > 0.0)) throw InputError("job " + std::to_string(job.id()) + " has zero total execution time");
  return job.allowance() * (job.exec(tier) / job.total_exec());
}

// Allowance granted to tiers 0..tier inclusive.
inline Time differentiated_allowance_through(const Job& job, std::size_t tier) {
  Time s = 0.0;
  for (std::size_t j = 0; j <= tier; ++j) s += differentiated_allowance(job, j);
  return s;
}

// Waits of completed tiers, plus elapsed and remaining wait in the current one.
inline Time expected_wait_multitier(const JobProgress& job, const Schedule& schedule, const JobSet& jobs) {
  return job.completed_wait_total() + job.elapsed_wait + remaining_wait(schedule, job.id, job.tier, jobs);
}

// Expected wait within a single tier. Realized for completed tiers.
inline Time expected_wait_tier(const JobProgress& job, const Schedule& schedule, std::size_t tier,
                               const JobSet& jobs) {
  if (tier < job.tier) return job.completed_waits.at(tier);
  if (tier > job.tier)
    throw InputError("job " + std::to_string(job.id) + " has not reached tier " + std::to_string(tier + 1));
  return job.elapsed_wait + remaining_wait(schedule, job.id, tier, jobs);
}

// Signed violation time: positive means the client is not satisfied. In the
// differentiated mode this is the violation of the current tier only.
inline Time violation_time(const JobProgress& job, const Schedule& schedule, const JobSet& jobs,
                           AllowanceMode mode) {
  const Job& spec = jobs.at(job.id);
  if (mode == AllowanceMode::MultiTier) return expected_wait_multitier(job, schedule, jobs) - spec.allowance();
  return expected_wait_tier(job, schedule, job.tier, jobs) - differentiated_allowance(spec, job.tier);
}

// Exponential SLA penalty. A satisfied client (alpha <= 0) costs nothing.
inline double penalty(Time alpha, const PenaltyModel& model) noexcept {
  if (!(alpha > 0.0)) return 0.0;
  return model.chi * -std::expm1(-model.nu * alpha);
}

struct JobViolation {
  JobId id = 0;
  std::size_t tier = 0;
  std::size_t resource = 0;
  Time alpha = 0.0;                 // signed violation time
  std::vector<Time> tier_alpha;     // per-tier violations, differentiated mode only
  double penalty = 0.0;
};

struct ViolationBreakdown {
  AllowanceMode mode = AllowanceMode::MultiTier;
  std::vector<JobViolation> jobs;
  Time total_violation = 0.0;     // sum of signed alpha
  Time positive_violation = 0.0;  // sum of max(alpha, 0)
  Time max_violation = -std::numeric_limits<Time>::infinity();
  double total_penalty = 0.0;

  void add(JobViolation v) {
    total_violation += v.alpha;
    positive_violation += std::max(0.0, v.alpha);
    max_violation = std::max(max_violation, v.alpha);
    total_penalty += v.penalty;
    jobs.push_back(std::move(v));
  }
};

namespace detail {

inline EnvironmentConfig shape_of(const Schedule& schedule, const PenaltyModel& model) {
  EnvironmentConfig env;
  env.resources_per_tier.clear();
  for (const auto& t : schedule.tiers) env.resources_per_tier.push_back(t.size());
  env.penalty = model;
  return env;
}

}  // namespace detail

// Violation and penalty of every waiting job in the snapshot. Jobs already in
// service are not schedulable and are left out.
//
// MultiTier:      alpha_i = completed waits + elapsed + remaining - allowance
// Differentiated: alpha_i = sum over tiers reached so far of (tier wait - tier allowance),
//                 the current tier using elapsed + remaining as its wait.
inline ViolationBreakdown total_penalty(const JobSet& jobs, const Snapshot& snapshot, AllowanceMode mode,
                                        const PenaltyModel& model) {
  const auto& schedule = snapshot.schedule;
  const auto report = validate_schedule(schedule, detail::shape_of(schedule, model), jobs);
  if (!report.ok()) throw InputError("invalid schedule: " + report.summary());

  ViolationBreakdown out;
  out.mode = mode;
  for (std::size_t j = 0; j < schedule.tiers.size(); ++j) {
    for (std::size_t k = 0; k < schedule.tiers[j].size(); ++k) {
      const auto& q = schedule.tiers[j][k];
      Time ahead = q.head_in_service ? q.head_residual : 0.0;
      for (JobId id : q.waiting()) {
        const Job& job = jobs.at(id);
        const JobProgress& p = snapshot.progress_of(id);
        if (p.tier != j)
          throw InputError("job " + std::to_string(id) + " is queued in tier " + std::to_string(j + 1) +
                           " but resides in tier " + std::to_string(p.tier + 1));
        JobViolation v{.id = id, .tier = j, .resource = k};
        if (mode == AllowanceMode::MultiTier) {
          v.alpha = p.completed_wait_total() + p.elapsed_wait + ahead - job.allowance();
        } else {
          v.tier_alpha.reserve(j + 1);
          for (std::size_t t = 0; t < j; ++t)
            v.tier_alpha.push_back(p.completed_waits.at(t) - differentiated_allowance(job, t));
          v.tier_alpha.push_back(p.elapsed_wait + ahead - differentiated_allowance(job, j));
          for (Time a : v.tier_alpha) v.alpha += a;
        }
        v.penalty = penalty(v.alpha, model);
        out.add(std::move(v));
        ahead += job.exec(j);
      }
    }
  }
  return out;
}

}  // namespace mtsched
