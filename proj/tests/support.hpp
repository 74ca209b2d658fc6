#pragma once

#include <cstdint>
#include <vector>

#include "mtsched/mtsched.hpp"

namespace mtsched::testing {

struct JobSpec {
  Time arrival;
  std::vector<Time> exec;
  Time target;
};

inline JobSet make_jobs(const std::vector<JobSpec>& specs) {
  JobSet jobs;
  JobId id = 1;
  for (const auto& s : specs) jobs.push_back(Job(id++, s.arrival, s.exec, s.target));
  return jobs;
}

struct Scenario {
  EnvironmentConfig env;
  JobSet jobs;
  Snapshot snapshot;
};

// Generated workload, randomly dispatched, frozen after a random number of
// events. Waiting jobs can sit in every tier.
inline Scenario random_scenario(std::uint64_t seed, EnvironmentConfig env, std::size_t num_jobs = 40,
                                double lambda = 4.0) {
  Scenario s{std::move(env), {}, {}};
  WorkloadSpec w;
  w.arrival_rate = lambda;
  w.num_jobs = num_jobs;
  w.seed = seed;
  s.jobs = generate(w, s.env);
  RandomAssignPolicy placement(seed);
  Simulator sim(s.jobs, s.env, placement, SimOptions{.record_trace = false});
  Rng rng(derive_seed(seed, 99));
  const std::size_t steps = 1 + rng.below(num_jobs * (s.env.num_tiers() + 1));
  for (std::size_t i = 0; i < steps && !sim.done(); ++i) sim.step();
  s.snapshot = sim.snapshot();
  return s;
}

}  // namespace mtsched::testing
