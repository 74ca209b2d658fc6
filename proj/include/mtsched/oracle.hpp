#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mtsched/model.hpp"
#include "mtsched/penalty.hpp"

namespace mtsched {

struct OracleLimits {
  std::size_t max_waiting_jobs = 9;
  std::uint64_t max_states = 50'000'000;
};

struct OracleResult {
  Schedule best;
  double fitness = 0.0;
  std::uint64_t states = 0;
};

class OracleTooLarge : public InputError {
 public:
  OracleTooLarge(std::size_t jobs, double states)
      : InputError("oracle refuses instance: " + std::to_string(jobs) + " waiting jobs, ~" +
                   std::to_string(static_cast<std::uint64_t>(states)) + " schedules"),
        estimated_states(states) {}
  double estimated_states;
};

// Number of distinct schedules of w jobs over m queues: (w + m - 1)! / (m - 1)!.
inline double schedule_count(std::size_t waiting, std::size_t queues) {
  double n = 1.0;
  for (std::size_t x = queues; x < waiting + queues; ++x) n *= static_cast<double>(x);
  return n;
}

// Exhaustive minimizer of the summed signed violation time. Every tier's
// waiting jobs are enumerated over every assignment to that tier's queues and
// every order within them (as permutations of the jobs plus queue
// separators); the cross product of tiers is scored with total_penalty.
// Ties keep the first schedule in enumeration order.
inline OracleResult exhaustive_best(const Snapshot& snapshot, const JobSet& jobs, AllowanceMode mode,
                                    const PenaltyModel& model = {}, OracleLimits limits = {}) {
  const auto& base = snapshot.schedule;
  const std::size_t tiers = base.tiers.size();

  double estimate = 1.0;
  for (std::size_t j = 0; j < tiers; ++j) estimate *= schedule_count(base.waiting_count(j), base.tiers[j].size());
  if (base.waiting_count() > limits.max_waiting_jobs || estimate > static_cast<double>(limits.max_states))
    throw OracleTooLarge(base.waiting_count(), estimate);

  // Tokens: 0 separates queues, job ids are >= 1. Sorted start so that
  // next_permutation visits every distinct arrangement once.
  std::vector<std::vector<JobId>> start(tiers);
  for (std::size_t j = 0; j < tiers; ++j) {
    auto& tok = start[j];
    tok.assign(base.tiers[j].size() - 1, 0);
    for (const auto& q : base.tiers[j])
      for (JobId id : q.waiting()) tok.push_back(id);
    std::sort(tok.begin(), tok.end());
  }

  Snapshot candidate = snapshot;
  auto install = [&](std::size_t j, const std::vector<JobId>& tok) {
    auto& queues = candidate.schedule.tiers[j];
    for (auto& q : queues) q.jobs.resize(q.head_in_service ? 1 : 0);
    std::size_t k = 0;
    for (JobId t : tok) {
      if (t == 0)
        ++k;
      else
        queues[k].jobs.push_back(t);
    }
  };

  OracleResult out;
  out.fitness = std::numeric_limits<double>::infinity();
  std::vector<std::vector<JobId>> current = start;
  for (std::size_t j = 0; j < tiers; ++j) install(j, current[j]);

  // Odometer over tiers: the last tier varies fastest.
  for (;;) {
    const double f = total_penalty(jobs, candidate, mode, model).total_violation;
    ++out.states;
    if (f < out.fitness) {
      out.fitness = f;
      out.best = candidate.schedule;
    }
    std::size_t j = tiers;
    while (j > 0) {
      --j;
      if (std::next_permutation(current[j].begin(), current[j].end())) {
        install(j, current[j]);
        break;
      }
      current[j] = start[j];  // wrapped around
      install(j, current[j]);
      if (j == 0) return out;
    }
    if (tiers == 0) return out;
  }
}

}  // namespace mtsched
