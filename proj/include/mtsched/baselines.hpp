#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mtsched/model.hpp"
#include "mtsched/rng.hpp"
#include "mtsched/sim.hpp"

namespace mtsched {

enum class PolicyKind { FCFS, WeightedRoundRobin, WeightedLeastConnection, RandomAssign };

inline std::string_view to_string(PolicyKind k) noexcept {
  switch (k) {
    case PolicyKind::FCFS: return "fcfs";
    case PolicyKind::WeightedRoundRobin: return "wrr";
    case PolicyKind::WeightedLeastConnection: return "wlc";
    case PolicyKind::RandomAssign: return "random";
  }
  return "?";
}

// Per tier, per resource weights. Empty means weight 1 everywhere.
using ResourceWeights = std::vector<std::vector<std::uint32_t>>;

namespace detail {

inline std::uint32_t weight_of(const ResourceWeights& w, std::size_t tier, std::size_t resource) {
  if (tier >= w.size() || w[tier].empty()) return 1;
  return w[tier].at(resource);
}

inline Placement append_to(const Schedule& live, std::size_t tier, std::size_t resource) {
  return Placement{resource, live.tiers[tier][resource].jobs.size()};
}

}  // namespace detail

// Appends to the queue whose tail finishes earliest (least remaining work),
// lowest index on ties. Default dispatcher for the optimizing policies.
class FcfsPolicy final : public PlacementPolicy {
 public:
  std::string name() const override { return "fcfs"; }

  Placement assign(const Job&, std::size_t tier, const Schedule& live, const JobSet& jobs) override {
    const auto& queues = live.tiers.at(tier);
    std::size_t best = 0;
    Time best_work = std::numeric_limits<Time>::infinity();
    for (std::size_t k = 0; k < queues.size(); ++k) {
      const auto& q = queues[k];
      Time work = q.head_in_service ? q.head_residual : 0.0;
      for (JobId h : q.waiting()) work += jobs.at(h).exec(tier);
      if (work < best_work - kTimeTolerance) {
        best_work = work;
        best = k;
      }
    }
    return detail::append_to(live, tier, best);
  }
};

// Cyclic pointer per tier; resource k receives weight_k consecutive jobs
// before the pointer advances. Zero-weight resources are skipped.
class WeightedRoundRobinPolicy final : public PlacementPolicy {
 public:
  explicit WeightedRoundRobinPolicy(ResourceWeights weights = {}) : weights_(std::move(weights)) {}

  std::string name() const override { return "wrr"; }

  Placement assign(const Job&, std::size_t tier, const Schedule& live, const JobSet&) override {
    const std::size_t m = live.tiers.at(tier).size();
    if (cursor_.size() <= tier) cursor_.resize(tier + 1);
    auto& c = cursor_[tier];
    for (std::size_t tries = 0; tries <= m; ++tries) {
      if (c.served < detail::weight_of(weights_, tier, c.resource)) {
        ++c.served;
        return detail::append_to(live, tier, c.resource);
      }
      c.resource = (c.resource + 1) % m;
      c.served = 0;
    }
    throw InputError("wrr: every resource of tier " + std::to_string(tier + 1) + " has zero weight");
  }

 private:
  struct Cursor {
    std::size_t resource = 0;
    std::uint32_t served = 0;
  };
  ResourceWeights weights_;
  std::vector<Cursor> cursor_;
};

// Fewest connections (waiting + in service) per unit weight; lowest index
// on ties.
class WeightedLeastConnectionPolicy final : public PlacementPolicy {
 public:
  explicit WeightedLeastConnectionPolicy(ResourceWeights weights = {}) : weights_(std::move(weights)) {}

  std::string name() const override { return "wlc"; }

  Placement assign(const Job&, std::size_t tier, const Schedule& live, const JobSet&) override {
    const auto& queues = live.tiers.at(tier);
    std::size_t best = queues.size();
    std::uint64_t best_conn = 0, best_weight = 1;
    for (std::size_t k = 0; k < queues.size(); ++k) {
      const std::uint64_t w = detail::weight_of(weights_, tier, k);
      if (w == 0) continue;
      const std::uint64_t conn = queues[k].jobs.size();
      // conn / w < best_conn / best_weight, without division
      if (best == queues.size() || conn * best_weight < best_conn * w) {
        best = k;
        best_conn = conn;
        best_weight = w;
      }
    }
    if (best == queues.size())
      throw InputError("wlc: every resource of tier " + std::to_string(tier + 1) + " has zero weight");
    return detail::append_to(live, tier, best);
  }

 private:
  ResourceWeights weights_;
};

class RandomAssignPolicy final : public PlacementPolicy {
 public:
  explicit RandomAssignPolicy(std::uint64_t seed) : rng_(derive_seed(seed, 0x7a11)) {}

  std::string name() const override { return "random"; }

  Placement assign(const Job&, std::size_t tier, const Schedule& live, const JobSet&) override {
    return detail::append_to(live, tier, rng_.below(live.tiers.at(tier).size()));
  }

 private:
  Rng rng_;
};

inline std::unique_ptr<PlacementPolicy> make_policy(PolicyKind kind, std::uint64_t seed = 1,
                                                    ResourceWeights weights = {}) {
  switch (kind) {
    case PolicyKind::FCFS: return std::make_unique<FcfsPolicy>();
    case PolicyKind::WeightedRoundRobin: return std::make_unique<WeightedRoundRobinPolicy>(std::move(weights));
    case PolicyKind::WeightedLeastConnection:
      return std::make_unique<WeightedLeastConnectionPolicy>(std::move(weights));
    case PolicyKind::RandomAssign: return std::make_unique<RandomAssignPolicy>(seed);
  }
  throw InvariantError("unknown policy kind");
}

}  // namespace mtsched
