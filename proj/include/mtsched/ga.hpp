#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtsched/model.hpp"
#include "mtsched/penalty.hpp"
#include "mtsched/rng.hpp"

namespace mtsched {

// ---------------------------------------------------------------------------
// Chromosome: the system virtual queue. All waiting jobs of all resource
// queues cascaded in tier-major order; segment s is genes[bounds[s], bounds[s+1]).
// In-service jobs are pinned in the snapshot and are not genes.
// ---------------------------------------------------------------------------

struct Chromosome {
  std::vector<JobId> genes;
  std::vector<std::uint32_t> bounds;  // size = segments + 1, bounds.front() == 0

  std::size_t segment_count() const noexcept { return bounds.empty() ? 0 : bounds.size() - 1; }
  std::span<const JobId> segment(std::size_t s) const {
    return std::span<const JobId>(genes).subspan(bounds.at(s), bounds.at(s + 1) - bounds.at(s));
  }

  friend bool operator==(const Chromosome&, const Chromosome&) = default;
};

struct SegmentSlot {
  std::size_t tier = 0;
  std::size_t resource = 0;
  Time residual = 0.0;  // residual service time of the pinned head, 0 when idle
};

// Fixed structure shared by every chromosome of one search: which resource
// each segment maps to and which segments belong to each tier.
struct ChromosomeLayout {
  std::vector<SegmentSlot> segments;
  std::vector<std::size_t> tier_first;  // size = tiers + 1, segment index ranges

  std::size_t tier_count() const noexcept { return tier_first.empty() ? 0 : tier_first.size() - 1; }
  std::size_t segments_in_tier(std::size_t t) const { return tier_first[t + 1] - tier_first[t]; }
};

// Scores and gene data for one snapshot. Evaluating a chromosome is a single
// pass: each gene contributes its fixed offset plus the work queued ahead of it.
class VirtualQueueProblem {
 public:
  using Individual = Chromosome;

  // Whole environment.
  VirtualQueueProblem(const Snapshot& snapshot, const JobSet& jobs, AllowanceMode mode)
      : VirtualQueueProblem(snapshot, jobs, mode, kAllQueues, kAllQueues) {}

  // One resource queue only (reorder-only search).
  VirtualQueueProblem(const Snapshot& snapshot, const JobSet& jobs, AllowanceMode mode, std::size_t tier,
                      std::size_t resource)
      : mode_(mode) {
    const auto& sched = snapshot.schedule;
    exec_.assign(jobs.size() + 1, 0.0);
    offset_.assign(jobs.size() + 1, 0.0);
    const bool single = tier != kAllQueues;
    layout_.tier_first.push_back(0);
    incumbent_.bounds.push_back(0);
    for (std::size_t j = 0; j < sched.tiers.size(); ++j) {
      if (single && j != tier) continue;
      for (std::size_t k = 0; k < sched.tiers[j].size(); ++k) {
        if (single && k != resource) continue;
        const auto& q = sched.tiers[j][k];
        layout_.segments.push_back(SegmentSlot{j, k, q.head_in_service ? q.head_residual : 0.0});
        for (JobId id : q.waiting()) {
          const JobProgress& p = snapshot.progress_of(id);
          if (p.tier != j)
            throw InputError("job " + std::to_string(id) + " is queued outside the tier it resides in");
          const Job& job = jobs.at(id);
          exec_[id] = job.exec(j);
          offset_[id] = gene_offset(job, p, mode);
          incumbent_.genes.push_back(id);
        }
        incumbent_.bounds.push_back(static_cast<std::uint32_t>(incumbent_.genes.size()));
      }
      layout_.tier_first.push_back(layout_.segments.size());
    }
    tier_genes_.push_back(0);
    for (std::size_t t = 0; t < layout_.tier_count(); ++t)
      tier_genes_.push_back(incumbent_.bounds[layout_.tier_first[t + 1]]);
  }

  const ChromosomeLayout& layout() const noexcept { return layout_; }
  const Chromosome& incumbent() const noexcept { return incumbent_; }
  AllowanceMode mode() const noexcept { return mode_; }
  std::size_t gene_count() const noexcept { return incumbent_.genes.size(); }
  // Gene index range [first, last) of tier t.
  std::pair<std::size_t, std::size_t> tier_genes(std::size_t t) const { return {tier_genes_[t], tier_genes_[t + 1]}; }

  // Raw fitness: sum of signed violation times of all genes.
  double evaluate(const Chromosome& c) const {
    double total = 0.0;
    for (std::size_t s = 0; s < layout_.segments.size(); ++s) {
      double ahead = layout_.segments[s].residual;
      for (std::uint32_t g = c.bounds[s]; g < c.bounds[s + 1]; ++g) {
        const JobId id = c.genes[g];
        total += offset_[id] + ahead;
        ahead += exec_[id];
      }
    }
    return total;
  }

  Chromosome random_individual(Rng& rng) const;
  std::pair<Chromosome, Chromosome> crossover(const Chromosome& a, const Chromosome& b, Rng& rng) const {
    return crossover_at(a, b, rng.below(gene_count() + 1));
  }
  std::pair<Chromosome, Chromosome> crossover_at(const Chromosome& a, const Chromosome& b, std::size_t cut) const;
  Chromosome mutate(const Chromosome& c, Rng& rng) const;

  // True when c has this problem's shape and each tier holds exactly the
  // incumbent's jobs, each once.
  bool is_valid(const Chromosome& c) const {
    if (c.bounds.size() != incumbent_.bounds.size() || c.genes.size() != incumbent_.genes.size()) return false;
    if (c.bounds.front() != 0 || c.bounds.back() != c.genes.size()) return false;
    for (std::size_t s = 0; s + 1 < c.bounds.size(); ++s)
      if (c.bounds[s] > c.bounds[s + 1]) return false;
    for (std::size_t t = 0; t < layout_.tier_count(); ++t) {
      if (c.bounds[layout_.tier_first[t]] != tier_genes_[t] || c.bounds[layout_.tier_first[t + 1]] != tier_genes_[t + 1])
        return false;
      std::vector<JobId> want(incumbent_.genes.begin() + tier_genes_[t], incumbent_.genes.begin() + tier_genes_[t + 1]);
      std::vector<JobId> got(c.genes.begin() + tier_genes_[t], c.genes.begin() + tier_genes_[t + 1]);
      std::sort(want.begin(), want.end());
      std::sort(got.begin(), got.end());
      if (want != got || std::adjacent_find(got.begin(), got.end()) != got.end()) return false;
    }
    return true;
  }

  // Token form of one tier: genes with a 0 separator between segments.
  std::vector<JobId> tier_tokens(const Chromosome& c, std::size_t t) const {
    std::vector<JobId> tokens;
    const auto [g0, g1] = tier_genes(t);
    tokens.reserve(g1 - g0 + layout_.segments_in_tier(t));
    for (std::size_t s = layout_.tier_first[t]; s < layout_.tier_first[t + 1]; ++s) {
      if (s != layout_.tier_first[t]) tokens.push_back(kSeparator);
      tokens.insert(tokens.end(), c.genes.begin() + c.bounds[s], c.genes.begin() + c.bounds[s + 1]);
    }
    return tokens;
  }

  void store_tier_tokens(Chromosome& c, std::size_t t, std::span<const JobId> tokens) const {
    std::size_t g = tier_genes_[t];
    std::size_t s = layout_.tier_first[t];
    for (JobId tok : tokens) {
      if (tok == kSeparator) {
        c.bounds[++s] = static_cast<std::uint32_t>(g);
      } else {
        c.genes[g++] = tok;
      }
    }
  }

  static constexpr JobId kSeparator = 0;

 private:
  static constexpr std::size_t kAllQueues = std::numeric_limits<std::size_t>::max();

  static double gene_offset(const Job& job, const JobProgress& p, AllowanceMode mode) {
    if (mode == AllowanceMode::MultiTier) return p.completed_wait_total() + p.elapsed_wait - job.allowance();
    double off = p.elapsed_wait - differentiated_allowance(job, p.tier);
    for (std::size_t t = 0; t < p.tier; ++t) off += p.completed_waits.at(t) - differentiated_allowance(job, t);
    return off;
  }

  AllowanceMode mode_;
  ChromosomeLayout layout_;
  Chromosome incumbent_;
  std::vector<std::size_t> tier_genes_;
  std::vector<double> exec_;
  std::vector<double> offset_;
};

// Uniformly random placement and order of each tier's jobs over its queues.
inline Chromosome VirtualQueueProblem::random_individual(Rng& rng) const {
  Chromosome c = incumbent_;
  for (std::size_t t = 0; t < layout_.tier_count(); ++t) {
    auto tokens = tier_tokens(c, t);
    rng.shuffle(tokens.begin(), tokens.end());
    store_tier_tokens(c, t, tokens);
  }
  return c;
}

// Single-point crossover with order-preserving repair, tier by tier. The cut
// is a global gene position in [0, G]. Each child keeps its own
// parent's token prefix up to the cut (segment separators included) and takes
// the missing genes and separators in the other parent's order.
inline std::pair<Chromosome, Chromosome> VirtualQueueProblem::crossover_at(const Chromosome& a, const Chromosome& b,
                                                                           std::size_t cut) const {
  auto child = [&](const Chromosome& head, const Chromosome& tail) {
    Chromosome c = head;
    for (std::size_t t = 0; t < layout_.tier_count(); ++t) {
      const auto [g0, g1] = tier_genes(t);
      const std::size_t local = std::clamp(cut, g0, g1) - g0;
      if (local == g1 - g0) continue;  // whole tier before the cut
      const auto head_tokens = tier_tokens(head, t);
      const auto tail_tokens = tier_tokens(tail, t);
      std::vector<JobId> tokens;
      tokens.reserve(head_tokens.size());
      std::vector<JobId> taken;
      std::size_t separators = 0;
      for (std::size_t i = 0, genes = 0; genes < local; ++i) {
        tokens.push_back(head_tokens[i]);
        if (head_tokens[i] == kSeparator)
          ++separators;
        else {
          taken.push_back(head_tokens[i]);
          ++genes;
        }
      }
      std::sort(taken.begin(), taken.end());
      for (JobId tok : tail_tokens) {
        if (tok == kSeparator) {
          if (separators > 0)
            --separators;
          else
            tokens.push_back(tok);
        } else if (!std::binary_search(taken.begin(), taken.end(), tok)) {
          tokens.push_back(tok);
        }
      }
      store_tier_tokens(c, t, tokens);
    }
    return c;
  };
  return {child(a, b), child(b, a)};
}

// Insert mutation: one gene, chosen uniformly, is removed and reinserted at a
// uniform token position of its own tier. Landing in its own segment is a
// reorder, landing in another segment is a migration.
inline Chromosome VirtualQueueProblem::mutate(const Chromosome& c, Rng& rng) const {
  Chromosome out = c;
  if (gene_count() == 0) return out;
  const std::size_t g = rng.below(gene_count());
  std::size_t t = 0;
  while (g >= tier_genes_[t + 1]) ++t;
  auto tokens = tier_tokens(c, t);
  const auto victim = std::find(tokens.begin(), tokens.end(), c.genes[g]);
  const JobId id = *victim;
  tokens.erase(victim);
  const std::size_t pos = rng.below(tokens.size() + 1);
  tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), id);
  store_tier_tokens(out, t, tokens);
  return out;
}

// ---------------------------------------------------------------------------
// Encoding and fitness
// ---------------------------------------------------------------------------

inline Chromosome encode(const Snapshot& snapshot) {
  Chromosome c;
  c.bounds.push_back(0);
  for (const auto& tier : snapshot.schedule.tiers) {
    for (const auto& q : tier) {
      for (JobId id : q.waiting()) c.genes.push_back(id);
      c.bounds.push_back(static_cast<std::uint32_t>(c.genes.size()));
    }
  }
  return c;
}

// Rebuilds the full schedule: pinned heads from the snapshot, then each
// segment's genes in order.
inline Schedule decode(const Chromosome& c, const Snapshot& snapshot) {
  const auto& base = snapshot.schedule;
  std::size_t queues = 0;
  for (const auto& t : base.tiers) queues += t.size();
  if (c.segment_count() != queues || c.bounds.back() != c.genes.size())
    throw InputError("chromosome has " + std::to_string(c.segment_count()) + " segments, snapshot has " +
                     std::to_string(queues) + " queues");
  Schedule out = base;
  std::size_t s = 0;
  for (std::size_t j = 0; j < out.tiers.size(); ++j) {
    std::vector<JobId> want, got;
    for (auto& q : out.tiers[j]) {
      for (JobId id : q.waiting()) want.push_back(id);
      const auto seg = c.segment(s++);
      q.jobs.resize(q.head_in_service ? 1 : 0);
      q.jobs.insert(q.jobs.end(), seg.begin(), seg.end());
      got.insert(got.end(), seg.begin(), seg.end());
    }
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    if (want != got) throw InputError("chromosome jobs of tier " + std::to_string(j + 1) + " do not match the snapshot");
  }
  return out;
}

struct FitnessValue {
  double raw = 0.0;         // sum of signed violation times, lower is better
  double normalized = 0.0;  // selection probability within its population
};

// Raw fitness of a chromosome against a snapshot.
inline double fitness(const Chromosome& c, const Snapshot& snapshot, const JobSet& jobs, AllowanceMode mode) {
  VirtualQueueProblem problem(snapshot, jobs, mode);
  if (!problem.is_valid(c)) throw InputError("chromosome is not valid for this snapshot");
  return problem.evaluate(c);
}

// Roulette probabilities for a minimization fitness. Weights are inverted as
// (max f - f_r) + eps, then normalized to sum to one. A population of equal
// fitness gets uniform probabilities.
inline std::vector<double> roulette_probabilities(std::span<const double> raw) {
  std::vector<double> p(raw.size(), 0.0);
  if (raw.empty()) return p;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  double scale = 1.0;
  for (double f : raw) scale = std::max(scale, std::abs(f));
  const double eps = 1e-12 * scale;
  if (*hi - *lo <= eps) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(raw.size()));
    return p;
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < raw.size(); ++r) sum += p[r] = (*hi - raw[r]) + eps;
  for (double& x : p) x /= sum;
  return p;
}

inline std::vector<FitnessValue> normalize_fitness(std::span<const double> raw) {
  const auto p = roulette_probabilities(raw);
  std::vector<FitnessValue> out(raw.size());
  for (std::size_t r = 0; r < raw.size(); ++r) out[r] = FitnessValue{raw[r], p[r]};
  return out;
}

inline std::size_t roulette_pick(std::span<const double> probabilities, Rng& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t r = 0; r < probabilities.size(); ++r) {
    acc += probabilities[r];
    if (u < acc) return r;
  }
  return probabilities.size() - 1;
}

// Index of a parent drawn by roulette over the population's raw fitness.
inline std::size_t select(std::span<const double> raw, Rng& rng) {
  if (raw.empty()) throw InputError("cannot select from an empty population");
  for (double f : raw)
    if (!std::isfinite(f)) throw InputError("non-finite fitness in population");
  const auto p = roulette_probabilities(raw);
  return roulette_pick(p, rng);
}

// ---------------------------------------------------------------------------
// Evolution
// ---------------------------------------------------------------------------

enum class QueueMode { SystemVirtualized, Segmented };

inline std::string_view to_string(QueueMode m) noexcept {
  return m == QueueMode::SystemVirtualized ? "virtualized" : "segmented";
}

struct GAConfig {
  std::size_t population = 10;
  std::size_t generations = 1000;
  double crossover_rate = 0.1;  // crossover operations per generation, as a fraction of population
  double mutation_rate = 0.1;   // mutations per generation, as a fraction of population
  std::size_t elitism = 1;
  QueueMode queue_mode = QueueMode::SystemVirtualized;
  AllowanceMode allowance = AllowanceMode::MultiTier;
  std::uint64_t seed = 1;

  std::size_t crossovers() const noexcept {
    return static_cast<std::size_t>(std::llround(crossover_rate * static_cast<double>(population)));
  }
  std::size_t mutations() const noexcept {
    return static_cast<std::size_t>(std::llround(mutation_rate * static_cast<double>(population)));
  }

  void validate() const {
    if (population < 2) throw InputError("ga: population must be >= 2");
    if (generations < 1) throw InputError("ga: generations must be >= 1");
    if (!(crossover_rate >= 0.0) || !(mutation_rate >= 0.0)) throw InputError("ga: operator rates must be >= 0");
    if (elitism > population) throw InputError("ga: elitism exceeds population");
  }
};

struct GenerationStats {
  std::size_t generation = 0;  // 1-based
  double best = 0.0;           // best fitness seen so far
  double generation_best = 0.0;
  double mean = 0.0;
};

template <typename P>
concept SearchProblem = requires(const P& p, const typename P::Individual& x, Rng& rng) {
  { p.evaluate(x) } -> std::convertible_to<double>;
  { p.random_individual(rng) } -> std::same_as<typename P::Individual>;
  { p.crossover(x, x, rng) } -> std::same_as<std::pair<typename P::Individual, typename P::Individual>>;
  { p.mutate(x, rng) } -> std::same_as<typename P::Individual>;
};

template <typename Individual>
struct SearchResult {
  Individual best;
  double best_fitness = 0.0;
  double initial_fitness = 0.0;
  std::vector<GenerationStats> history;
  std::size_t evaluations = 0;
};

// Generational GA with elitism. Generation 1 is the incumbent plus n-1 random
// individuals. Each later generation holds the elites, the children of
// round(rate*n) crossovers and round(rate*n) mutations of roulette-selected
// parents, and roulette-selected copies for the remaining slots. Every
// generation evaluates exactly n individuals.
template <SearchProblem P>
SearchResult<typename P::Individual> genetic_search(const P& problem, const typename P::Individual& incumbent,
                                                    const GAConfig& config, Rng& rng) {
  config.validate();
  using Individual = typename P::Individual;
  const std::size_t n = config.population;

  std::vector<Individual> population;
  population.reserve(n);
  population.push_back(incumbent);
  while (population.size() < n) population.push_back(problem.random_individual(rng));

  SearchResult<Individual> result;
  result.history.reserve(config.generations);
  std::vector<double> scores(n);
  std::vector<std::size_t> order(n);

  for (std::size_t gen = 1;; ++gen) {
    double sum = 0.0;
    std::size_t gen_best = 0;
    for (std::size_t r = 0; r < n; ++r) {
      scores[r] = problem.evaluate(population[r]);
      ++result.evaluations;
      sum += scores[r];
      if (scores[r] < scores[gen_best]) gen_best = r;
    }
    if (gen == 1) {
      result.initial_fitness = scores[0];
      result.best = population[0];
      result.best_fitness = scores[0];
    }
    if (scores[gen_best] < result.best_fitness) {
      result.best_fitness = scores[gen_best];
      result.best = population[gen_best];
    }
    result.history.push_back(GenerationStats{gen, result.best_fitness, scores[gen_best], sum / static_cast<double>(n)});
    if (gen == config.generations) break;

    const auto prob = roulette_probabilities(scores);
    std::vector<Individual> next;
    next.reserve(n);
    if (config.elitism > 0) {
      next.push_back(result.best);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return scores[x] < scores[y]; });
      for (std::size_t e = 0; next.size() < config.elitism; ++e) next.push_back(population[order[e]]);
    }
    for (std::size_t c = 0; c < config.crossovers() && next.size() < n; ++c) {
      const auto& pa = population[roulette_pick(prob, rng)];
      const auto& pb = population[roulette_pick(prob, rng)];
      auto [ca, cb] = problem.crossover(pa, pb, rng);
      next.push_back(std::move(ca));
      if (next.size() < n) next.push_back(std::move(cb));
    }
    for (std::size_t m = 0; m < config.mutations() && next.size() < n; ++m)
      next.push_back(problem.mutate(population[roulette_pick(prob, rng)], rng));
    while (next.size() < n) next.push_back(population[roulette_pick(prob, rng)]);
    population = std::move(next);
  }
  return result;
}

struct GaResult {
  Schedule best;
  double initial_fitness = 0.0;
  double best_fitness = 0.0;
  std::vector<GenerationStats> history;  // fitness of the whole environment per generation
  std::size_t evaluations = 0;
};

// System virtualized queue GA: one chromosome spans every queue of every
// tier, so reordering and migration are searched together.
inline GaResult evolve(const Snapshot& snapshot, const JobSet& jobs, const GAConfig& config) {
  VirtualQueueProblem problem(snapshot, jobs, config.allowance);
  Rng rng(derive_seed(config.seed, 0));
  auto run = genetic_search(problem, problem.incumbent(), config, rng);
  return GaResult{decode(run.best, snapshot), run.initial_fitness, run.best_fitness, std::move(run.history),
                  run.evaluations};
}

// Segmented GA: an independent reorder-only search per resource queue.
// Queue q (tier-major index) uses substream q of the seed, so a single-queue
// environment behaves exactly like evolve(). Queues with fewer than two
// waiting jobs have nothing to reorder and are not searched.
inline GaResult evolve_segmented(const Snapshot& snapshot, const JobSet& jobs, const GAConfig& config) {
  config.validate();
  GaResult out;
  out.best = snapshot.schedule;
  out.history.resize(config.generations);
  for (std::size_t g = 0; g < config.generations; ++g) out.history[g].generation = g + 1;

  std::size_t q = 0;
  for (std::size_t j = 0; j < snapshot.schedule.tiers.size(); ++j) {
    for (std::size_t k = 0; k < snapshot.schedule.tiers[j].size(); ++k, ++q) {
      VirtualQueueProblem problem(snapshot, jobs, config.allowance, j, k);
      if (problem.gene_count() < 2) {
        // a single order exists; its fitness is constant over the run
        const double f = problem.evaluate(problem.incumbent());
        out.initial_fitness += f;
        out.best_fitness += f;
        for (auto& h : out.history) {
          h.best += f;
          h.generation_best += f;
          h.mean += f;
        }
        continue;
      }
      Rng rng(derive_seed(config.seed, q));
      auto run = genetic_search(problem, problem.incumbent(), config, rng);
      auto& dst = out.best.tiers[j][k];
      dst.jobs.resize(dst.head_in_service ? 1 : 0);
      dst.jobs.insert(dst.jobs.end(), run.best.genes.begin(), run.best.genes.end());
      out.initial_fitness += run.initial_fitness;
      out.best_fitness += run.best_fitness;
      out.evaluations += run.evaluations;
      for (std::size_t g = 0; g < config.generations; ++g) {
        out.history[g].best += run.history[g].best;
        out.history[g].generation_best += run.history[g].generation_best;
        out.history[g].mean += run.history[g].mean;
      }
    }
  }
  return out;
}

inline GaResult optimize(const Snapshot& snapshot, const JobSet& jobs, const GAConfig& config) {
  return config.queue_mode == QueueMode::SystemVirtualized ? evolve(snapshot, jobs, config)
                                                           : evolve_segmented(snapshot, jobs, config);
}

}  // namespace mtsched
