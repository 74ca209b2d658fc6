#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtsched/mtsched.hpp"
#include "support.hpp"

using namespace mtsched;
using mtsched::testing::make_jobs;
using mtsched::testing::random_scenario;

namespace {

constexpr AllowanceMode kModes[] = {AllowanceMode::MultiTier, AllowanceMode::Differentiated};

// One tier, one idle resource, every job fresh at t = 0.
Snapshot single_queue(const JobSet& jobs, std::vector<JobId> order, std::size_t resources = 1) {
  Snapshot s;
  s.schedule = Schedule::empty_for(EnvironmentConfig::uniform(1, resources));
  s.schedule.queue(0, 0).jobs = std::move(order);
  for (const Job& j : jobs) s.progress[j.id()] = JobProgress{.id = j.id(), .tier_arrivals = {0.0}};
  return s;
}

GAConfig small_config(std::uint64_t seed, std::size_t generations = 200) {
  GAConfig c;
  c.generations = generations;
  c.seed = seed;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Encoding and fitness
// ---------------------------------------------------------------------------

TEST(Encoding, RoundTripAndValidity) {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto sc = random_scenario(seed, EnvironmentConfig::uniform(2, 3), 40, 6.0);
    const auto c = encode(sc.snapshot);
    EXPECT_EQ(c.genes.size(), sc.snapshot.schedule.waiting_count());
    EXPECT_EQ(c.segment_count(), 6u);
    const auto decoded = decode(c, sc.snapshot);
    ASSERT_EQ(decoded, sc.snapshot.schedule);
    VirtualQueueProblem problem(sc.snapshot, sc.jobs, AllowanceMode::MultiTier);
    Rng rng(seed);
    const auto r = decode(problem.random_individual(rng), sc.snapshot);
    ASSERT_TRUE(validate_schedule(r, sc.env, sc.jobs, sc.snapshot).ok());
  }
}

TEST(Encoding, EmptyQueuesKeepSegments) {
  const auto jobs = make_jobs({{0.0, {1.0}, 5.0}});
  auto s = single_queue(jobs, {}, 3);
  s.schedule.queue(0, 2).jobs = {1};
  const auto c = encode(s);
  EXPECT_EQ(c.bounds, (std::vector<std::uint32_t>{0, 0, 0, 1}));
  EXPECT_EQ(decode(c, s), s.schedule);
  auto bad = c;
  bad.genes = {2};
  EXPECT_THROW(decode(bad, s), InputError);
  bad = c;
  bad.bounds.pop_back();
  EXPECT_THROW(decode(bad, s), InputError);
}

TEST(Fitness, SingleJobIsMinusAllowance) {
  const auto jobs = make_jobs({{0.0, {2.0, 3.0}, 9.0}});
  Snapshot s;
  s.schedule = Schedule::empty_for(EnvironmentConfig::uniform(2, 1));
  s.schedule.queue(0, 0).jobs = {1};
  s.progress[1] = JobProgress{.id = 1, .tier_arrivals = {0.0}};
  EXPECT_DOUBLE_EQ(fitness(encode(s), s, jobs, AllowanceMode::MultiTier), -4.0);
  EXPECT_DOUBLE_EQ(fitness(encode(s), s, jobs, AllowanceMode::Differentiated), -4.0 * 2.0 / 5.0);
}

TEST(Fitness, TwoJobOrderDifference) {
  // f(a before b) - f(b before a) = E_a - E_b: only the second job waits.
  const auto jobs = make_jobs({{0.0, {2.5}, 9.0}, {0.0, {0.75}, 9.0}});
  for (auto mode : kModes) {
    const auto ab = single_queue(jobs, {1, 2}), ba = single_queue(jobs, {2, 1});
    EXPECT_NEAR(fitness(encode(ab), ab, jobs, mode) - fitness(encode(ba), ba, jobs, mode), 2.5 - 0.75, 1e-12);
  }
}

TEST(Fitness, EqualsPenaltyEngineTotal) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto sc = random_scenario(seed, EnvironmentConfig::uniform(1 + seed % 3, 1 + seed % 3), 40, 6.0);
    for (auto mode : kModes) {
      VirtualQueueProblem problem(sc.snapshot, sc.jobs, mode);
      Rng rng(seed);
      for (int i = 0; i < 5; ++i) {
        const auto c = i == 0 ? encode(sc.snapshot) : problem.random_individual(rng);
        Snapshot candidate = sc.snapshot;
        candidate.schedule = decode(c, sc.snapshot);
        const auto b = total_penalty(sc.jobs, candidate, mode, PenaltyModel{});
        ASSERT_NEAR(fitness(c, sc.snapshot, sc.jobs, mode), b.total_violation, 1e-9 * (1.0 + std::abs(b.total_violation)));
        ASSERT_EQ(problem.evaluate(c), problem.evaluate(c));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

TEST(Operators, CrossoverBoundaries) {
  std::uint64_t seed = 5;
  while (random_scenario(seed, EnvironmentConfig::uniform(2, 3), 40, 8.0).snapshot.schedule.waiting_count() <= 4) ++seed;
  const auto sc = random_scenario(seed, EnvironmentConfig::uniform(2, 3), 40, 8.0);
  VirtualQueueProblem problem(sc.snapshot, sc.jobs, AllowanceMode::MultiTier);
  ASSERT_GT(problem.gene_count(), 4u);
  Rng rng(1);
  const auto a = problem.random_individual(rng), b = problem.random_individual(rng);
  const auto [a0, b0] = problem.crossover_at(a, b, 0);
  EXPECT_EQ(a0, b);
  EXPECT_EQ(b0, a);
  const auto [aG, bG] = problem.crossover_at(a, b, problem.gene_count());
  EXPECT_EQ(aG, a);
  EXPECT_EQ(bG, b);
  const auto [x, y] = problem.crossover(a, a, rng);
  EXPECT_EQ(x, a);
  EXPECT_EQ(y, a);
}

TEST(Operators, CrossoverKeepsPrefix) {
  const auto jobs = make_jobs(std::vector<mtsched::testing::JobSpec>(6, {0.0, {1.0}, 20.0}));
  auto s = single_queue(jobs, {1, 2, 3}, 2);
  s.schedule.queue(0, 1).jobs = {4, 5, 6};
  VirtualQueueProblem problem(s, jobs, AllowanceMode::MultiTier);
  Chromosome a{{1, 2, 3, 4, 5, 6}, {0, 3, 6}};
  Chromosome b{{6, 5, 4, 3, 2, 1}, {0, 2, 6}};
  // a's tokens: 1 2 3 | 4 5 6, b's tokens: 6 5 | 4 3 2 1. Cut after 2 genes.
  const auto [ca, cb] = problem.crossover_at(a, b, 2);
  EXPECT_EQ(ca.genes, (std::vector<JobId>{1, 2, 6, 5, 4, 3}));  // 1 2 + 6 5 4 3 with b's separator
  EXPECT_EQ(ca.bounds, (std::vector<std::uint32_t>{0, 4, 6}));
  EXPECT_EQ(cb.genes, (std::vector<JobId>{6, 5, 1, 2, 3, 4}));  // 6 5 + 1 2 3 | 4
  EXPECT_EQ(cb.bounds, (std::vector<std::uint32_t>{0, 5, 6}));
}

TEST(Operators, FuzzValidity) {
  std::size_t crossovers = 0, mutations = 0;
  for (std::uint64_t seed = 1; crossovers < 10000; ++seed) {
    const auto sc = random_scenario(seed, EnvironmentConfig::uniform(1 + seed % 3, 1 + seed % 4), 40, 6.0);
    VirtualQueueProblem problem(sc.snapshot, sc.jobs, AllowanceMode::MultiTier);
    Rng rng(seed);
    auto a = problem.random_individual(rng), b = problem.incumbent();
    for (int i = 0; i < 100; ++i, ++crossovers, ++mutations) {
      auto [x, y] = problem.crossover(a, b, rng);
      ASSERT_TRUE(problem.is_valid(x)) << "seed " << seed;
      ASSERT_TRUE(problem.is_valid(y)) << "seed " << seed;
      auto m = problem.mutate(x, rng);
      ASSERT_TRUE(problem.is_valid(m)) << "seed " << seed;
      ASSERT_TRUE(validate_schedule(decode(m, sc.snapshot), sc.env, sc.jobs, sc.snapshot).ok());
      a = std::move(m);
      b = std::move(y);
    }
  }
  EXPECT_GE(crossovers, 10000u);
  EXPECT_GE(mutations, 10000u);
}

TEST(Operators, MutationMigratesAtUniformRate) {
  // One tier, M balanced queues of s = W/M jobs. The removed gene has W + M - 1
  // insertion slots, s of them in its own queue: P(migrate) = 1 - s/(W + M - 1) ~ 1 - 1/M.
  for (std::size_t m : {2u, 3u, 5u}) {
    const std::size_t w = 60;
    const auto jobs = make_jobs(std::vector<mtsched::testing::JobSpec>(w, {0.0, {1.0}, 200.0}));
    std::vector<JobId> all(w);
    std::iota(all.begin(), all.end(), 1u);
    auto s = single_queue(jobs, {}, m);
    for (std::size_t i = 0; i < w; ++i) s.schedule.queue(0, i % m).jobs.push_back(all[i]);
    VirtualQueueProblem problem(s, jobs, AllowanceMode::MultiTier);
    Rng rng(m);
    const auto c = problem.incumbent();
    auto segment_of = [&](const Chromosome& x, JobId id) {
      const auto pos = static_cast<std::size_t>(std::find(x.genes.begin(), x.genes.end(), id) - x.genes.begin());
      return static_cast<std::size_t>(std::upper_bound(x.bounds.begin(), x.bounds.end(), pos) - x.bounds.begin());
    };
    std::size_t moved = 0;
    constexpr int kTrials = 10000;
    for (int i = 0; i < kTrials; ++i) {
      const auto next = problem.mutate(c, rng);
      for (JobId id = 1; id <= w; ++id) {
        if (segment_of(next, id) != segment_of(c, id)) {
          ++moved;
          break;
        }
      }
    }
    const double rate = static_cast<double>(moved) / kTrials;
    const double exact = 1.0 - static_cast<double>(w / m) / static_cast<double>(w + m - 1);
    EXPECT_NEAR(rate, exact, 0.02) << "M = " << m;
    EXPECT_NEAR(rate, 1.0 - 1.0 / static_cast<double>(m), 0.03) << "M = " << m;
  }
}

TEST(Operators, MutationOfSingleGeneTier) {
  const auto jobs = make_jobs({{0.0, {1.0}, 5.0}});
  const auto s = single_queue(jobs, {1});
  VirtualQueueProblem problem(s, jobs, AllowanceMode::MultiTier);
  Rng rng(3);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(problem.mutate(problem.incumbent(), rng), problem.incumbent());
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

TEST(Selection, Probabilities) {
  const std::vector<double> equal{3.0, 3.0, 3.0, 3.0};
  for (double p : roulette_probabilities(equal)) EXPECT_DOUBLE_EQ(p, 0.25);

  const std::vector<double> raw{12.0, -4.0, 7.5, 30.0, 0.0};
  const auto p = roulette_probabilities(raw);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  EXPECT_GT(p[1], p[4]);
  EXPECT_GT(p[4], p[2]);
  const auto norm = normalize_fitness(raw);
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_EQ(norm[i].raw, raw[i]);
    sum += norm[i].normalized;
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Selection, BetterOfTwoDominates) {
  // weights {20 + eps, eps}
  const std::vector<double> raw{10.0, 30.0};
  Rng rng(17);
  int first = 0;
  constexpr int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) first += select(raw, rng) == 0;
  EXPECT_GE(first, kDraws - 1);
  EXPECT_THROW(select(std::vector<double>{}, rng), InputError);
  EXPECT_THROW(select(std::vector<double>{1.0, NAN}, rng), InputError);
}

TEST(Selection, UniformWhenDegenerate) {
  const std::vector<double> raw(4, -2.5);
  Rng rng(23);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 40000; ++i) ++counts[select(raw, rng)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------

TEST(Evolve, BudgetElitismDeterminism) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sc = random_scenario(seed, EnvironmentConfig{}, 60, 8.0);
    for (auto mode : kModes) {
      auto cfg = small_config(seed, 300);
      cfg.allowance = mode;
      const auto r = evolve(sc.snapshot, sc.jobs, cfg);
      ASSERT_EQ(r.evaluations, cfg.population * cfg.generations);
      ASSERT_EQ(r.history.size(), cfg.generations);
      for (std::size_t g = 1; g < r.history.size(); ++g) ASSERT_LE(r.history[g].best, r.history[g - 1].best);
      ASSERT_LE(r.best_fitness, r.initial_fitness);
      ASSERT_EQ(r.history.back().best, r.best_fitness);
      ASSERT_TRUE(validate_schedule(r.best, sc.env, sc.jobs, sc.snapshot).ok());
      Snapshot after = sc.snapshot;
      after.schedule = r.best;
      ASSERT_NEAR(total_penalty(sc.jobs, after, mode, PenaltyModel{}).total_violation, r.best_fitness,
                  1e-9 * (1.0 + std::abs(r.best_fitness)));
      const auto again = evolve(sc.snapshot, sc.jobs, cfg);
      ASSERT_EQ(again.best, r.best);
      ASSERT_EQ(again.best_fitness, r.best_fitness);
    }
  }
}

TEST(Evolve, OperatorCounts) {
  GAConfig c;
  EXPECT_EQ(c.crossovers(), 1u);
  EXPECT_EQ(c.mutations(), 1u);
  c.population = 25;
  EXPECT_EQ(c.crossovers(), 3u);  // round(2.5) away from zero
  c.population = 1;
  EXPECT_THROW(c.validate(), InputError);
}

TEST(Evolve, SegmentedStaysInQueue) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sc = random_scenario(seed, EnvironmentConfig{}, 60, 8.0);
    auto cfg = small_config(seed, 300);
    cfg.queue_mode = QueueMode::Segmented;
    const auto r = evolve_segmented(sc.snapshot, sc.jobs, cfg);
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t k = 0; k < 3; ++k) {
        auto before = sc.snapshot.schedule.queue(j, k).jobs, after = r.best.queue(j, k).jobs;
        std::sort(before.begin(), before.end());
        std::sort(after.begin(), after.end());
        ASSERT_EQ(before, after);
      }
    }
    for (std::size_t g = 1; g < r.history.size(); ++g) ASSERT_LE(r.history[g].best, r.history[g - 1].best);
    ASSERT_LE(r.best_fitness, r.initial_fitness);
    ASSERT_EQ(r.best, evolve_segmented(sc.snapshot, sc.jobs, cfg).best);
  }
}

TEST(Evolve, SegmentedMatchesVirtualizedOnOneQueue) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sc = random_scenario(seed, EnvironmentConfig::uniform(1, 1), 30, 3.0);
    auto cfg = small_config(seed);
    const auto v = evolve(sc.snapshot, sc.jobs, cfg);
    const auto s = evolve_segmented(sc.snapshot, sc.jobs, cfg);
    ASSERT_EQ(v.best, s.best);
    ASSERT_EQ(v.best_fitness, s.best_fitness);
  }
}

TEST(Evolve, OptimalSnapshotIsKept) {
  // shortest job first on one idle queue is optimal for equal allowances
  const auto jobs = make_jobs({{0.0, {1.0}, 9.0}, {0.0, {2.0}, 10.0}, {0.0, {3.0}, 11.0}, {0.0, {4.0}, 12.0}});
  const auto s = single_queue(jobs, {1, 2, 3, 4});
  const auto oracle = exhaustive_best(s, jobs, AllowanceMode::MultiTier);
  const auto r = evolve(s, jobs, small_config(1));
  EXPECT_EQ(r.best_fitness, r.initial_fitness);
  EXPECT_EQ(r.best, s.schedule);
  EXPECT_DOUBLE_EQ(oracle.fitness, r.best_fitness);
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

TEST(Oracle, SingleJob) {
  const auto jobs = make_jobs({{0.0, {2.0}, 5.0}});
  const auto r = exhaustive_best(single_queue(jobs, {1}), jobs, AllowanceMode::MultiTier);
  EXPECT_DOUBLE_EQ(r.fitness, -3.0);
  EXPECT_EQ(r.states, 1u);
}

TEST(Oracle, TwoJobsHandAlgebra) {
  // f(1,2) = -A1 + (E1 - A2),  f(2,1) = -A2 + (E2 - A1): shorter job first wins
  const auto jobs = make_jobs({{0.0, {3.0}, 9.0}, {0.0, {1.0}, 9.0}});
  const auto r = exhaustive_best(single_queue(jobs, {1, 2}), jobs, AllowanceMode::MultiTier);
  EXPECT_EQ(r.best.queue(0, 0).jobs, (std::vector<JobId>{2, 1}));
  EXPECT_DOUBLE_EQ(r.fitness, -6.0 + (1.0 - 8.0));
  EXPECT_EQ(r.states, 2u);

  // equal execution, the allowances cancel: the tie keeps the first enumerated order
  const auto eq = make_jobs({{0.0, {2.0}, 3.0}, {0.0, {2.0}, 9.0}});
  const auto t = exhaustive_best(single_queue(eq, {2, 1}), eq, AllowanceMode::MultiTier);
  EXPECT_EQ(t.best.queue(0, 0).jobs, (std::vector<JobId>{1, 2}));
}

TEST(Oracle, CountsAndLimits) {
  EXPECT_DOUBLE_EQ(schedule_count(3, 1), 6.0);
  EXPECT_DOUBLE_EQ(schedule_count(2, 2), 6.0);  // (3)!/(1)!
  EXPECT_DOUBLE_EQ(schedule_count(0, 3), 1.0);
  const auto sc = random_scenario(3, EnvironmentConfig::uniform(2, 2), 40, 10.0);
  ASSERT_GT(sc.snapshot.schedule.waiting_count(), 2u);
  EXPECT_THROW(exhaustive_best(sc.snapshot, sc.jobs, AllowanceMode::MultiTier, {}, OracleLimits{.max_waiting_jobs = 2}),
               OracleTooLarge);
}

TEST(Oracle, MinimalOverEnumerationAndNeverBeatenByGa) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; checked < 20; ++seed) {
    const auto sc = random_scenario(seed, EnvironmentConfig::uniform(2, 2), 20, 4.0);
    const auto w = sc.snapshot.schedule.waiting_count();
    if (w < 2 || w > 6) continue;
    ++checked;
    for (auto mode : kModes) {
      const auto o = exhaustive_best(sc.snapshot, sc.jobs, mode);
      double expected_states = 1.0;
      for (std::size_t j = 0; j < 2; ++j) expected_states *= schedule_count(sc.snapshot.schedule.waiting_count(j), 2);
      ASSERT_EQ(static_cast<double>(o.states), expected_states);
      ASSERT_TRUE(validate_schedule(o.best, sc.env, sc.jobs, sc.snapshot).ok());
      VirtualQueueProblem problem(sc.snapshot, sc.jobs, mode);
      Rng rng(seed);
      for (int i = 0; i < 200; ++i) ASSERT_LE(o.fitness, problem.evaluate(problem.random_individual(rng)) + 1e-9);
      auto cfg = small_config(seed);
      cfg.allowance = mode;
      const auto ga = evolve(sc.snapshot, sc.jobs, cfg);
      ASSERT_LE(o.fitness, ga.best_fitness + 1e-9);
    }
  }
}
