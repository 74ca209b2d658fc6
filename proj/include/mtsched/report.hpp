#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mtsched/experiment.hpp"
#include "mtsched/ga.hpp"
#include "mtsched/penalty.hpp"
#include "mtsched/sim.hpp"
#include "mtsched/workload.hpp"

namespace mtsched {

// Line-delimited records. Every record carries "schema": "mtsched.<kind>/<version>".
inline constexpr int kRecordSchemaVersion = 1;

inline std::string schema_tag(std::string_view kind) {
  return "mtsched." + std::string(kind) + "/" + std::to_string(kRecordSchemaVersion);
}

struct Totals {
  std::size_t jobs = 0;
  double total_violation = 0.0;
  double positive_violation = 0.0;
  double max_violation = -std::numeric_limits<double>::infinity();
  double total_penalty = 0.0;

  double mean_violation() const { return jobs ? total_violation / static_cast<double>(jobs) : 0.0; }
};

inline Totals totals_of(const ViolationBreakdown& b) {
  return Totals{b.jobs.size(), b.total_violation, b.positive_violation, b.max_violation, b.total_penalty};
}

inline Totals totals_of(const SimReport& r) {
  return Totals{r.jobs.size(), r.total_violation, r.positive_violation, r.max_violation, r.total_penalty};
}

namespace detail {

// JSON has no NaN or infinity; those become null.
inline nlohmann::json number_or_null(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

}  // namespace detail

inline nlohmann::json to_json(const Totals& t) {
  return {{"jobs", t.jobs},
          {"total_violation", t.total_violation},
          {"mean_violation", t.mean_violation()},
          {"positive_violation", t.positive_violation},
          {"max_violation", detail::number_or_null(t.max_violation)},
          {"total_penalty", t.total_penalty}};
}

struct SummaryRecord {
  std::string scope;  // "snapshot" or "run"
  std::string policy;
  AllowanceMode mode = AllowanceMode::MultiTier;
  std::uint64_t seed = 0;
  Totals initial;
  Totals enhanced;
  std::size_t evaluations = 0;

  double violation_improvement() const {
    return improvement_percent(initial.total_violation, enhanced.total_violation);
  }
  double penalty_improvement() const { return improvement_percent(initial.total_penalty, enhanced.total_penalty); }
};

inline nlohmann::json to_json(const SummaryRecord& s) {
  return {{"schema", schema_tag("summary")},
          {"scope", s.scope},
          {"policy", s.policy},
          {"mode", to_string(s.mode)},
          {"seed", s.seed},
          {"initial", to_json(s.initial)},
          {"enhanced", to_json(s.enhanced)},
          {"violation_improvement_pct", detail::number_or_null(s.violation_improvement())},
          {"penalty_improvement_pct", detail::number_or_null(s.penalty_improvement())},
          {"evaluations", s.evaluations}};
}

// Waiting job in a frozen snapshot. Tiers and resources are 1-based.
inline nlohmann::json job_record(std::string_view phase, std::string_view policy, std::uint64_t seed,
                                 const JobViolation& v) {
  nlohmann::json j{{"schema", schema_tag("job")},
                   {"phase", phase},
                   {"policy", policy},
                   {"seed", seed},
                   {"id", v.id},
                   {"tier", v.tier + 1},
                   {"resource", v.resource + 1},
                   {"alpha", v.alpha},
                   {"penalty", v.penalty}};
  if (!v.tier_alpha.empty()) j["tier_alpha"] = v.tier_alpha;
  return j;
}

// Completed job of an end-to-end run.
inline nlohmann::json job_record(std::string_view phase, std::string_view policy, std::uint64_t seed,
                                 const JobOutcome& o) {
  std::vector<std::size_t> resources;
  for (auto r : o.tier_resources) resources.push_back(r + 1);
  return {{"schema", schema_tag("job")},
          {"phase", phase},
          {"policy", policy},
          {"seed", seed},
          {"id", o.id},
          {"alpha", o.alpha},
          {"penalty", o.penalty},
          {"response_time", o.response_time},
          {"total_wait", o.total_wait},
          {"waits", o.waits},
          {"tier_alpha", o.tier_alpha},
          {"tier_resources", resources},
          {"tier_arrivals", o.tier_arrivals},
          {"tier_starts", o.tier_starts},
          {"tier_departures", o.tier_departures}};
}

inline nlohmann::json history_record(std::string_view policy, std::uint64_t seed, const GenerationStats& g) {
  return {{"schema", schema_tag("history")},
          {"policy", policy},
          {"seed", seed},
          {"generation", g.generation},
          {"best", g.best},
          {"generation_best", g.generation_best},
          {"mean", g.mean}};
}

inline nlohmann::json epoch_record(std::string_view policy, std::uint64_t seed, const EpochRecord& e) {
  return {{"schema", schema_tag("epoch")},
          {"policy", policy},
          {"seed", seed},
          {"epoch", e.epoch},
          {"time", e.time},
          {"waiting", e.waiting},
          {"initial_fitness", e.initial_fitness},
          {"best_fitness", e.best_fitness}};
}

inline nlohmann::json compare_record(const CompareRow& r) {
  return {{"schema", schema_tag("compare")},
          {"policy", r.policy.name()},
          {"seeds", r.seeds},
          {"total_violation", detail::number_or_null(r.total_violation)},
          {"mean_violation", detail::number_or_null(r.mean_violation)},
          {"max_violation", detail::number_or_null(r.max_violation)},
          {"total_penalty", detail::number_or_null(r.total_penalty)}};
}

inline void write_line(std::ostream& os, const nlohmann::json& record) { os << record.dump() << '\n'; }

// ---------------------------------------------------------------------------
// Tab-separated tables. First line is "# mtsched-<table> <version>".
// ---------------------------------------------------------------------------

namespace detail {

inline std::string cell(double x) { return std::isfinite(x) ? format_time(x) : std::string("nan"); }

}  // namespace detail

inline void write_summary_table(std::ostream& os, const std::vector<SummaryRecord>& rows) {
  os << "# mtsched-summary " << kRecordSchemaVersion << '\n'
     << "scope\tpolicy\tmode\tseed\tjobs\tinitial_violation\tenhanced_violation\tviolation_pct\t"
        "initial_penalty\tenhanced_penalty\tpenalty_pct\tinitial_max\tenhanced_max\n";
  for (const auto& s : rows) {
    os << s.scope << '\t' << s.policy << '\t' << to_string(s.mode) << '\t' << s.seed << '\t' << s.enhanced.jobs
       << '\t' << detail::cell(s.initial.total_violation) << '\t' << detail::cell(s.enhanced.total_violation) << '\t'
       << detail::cell(s.violation_improvement()) << '\t' << detail::cell(s.initial.total_penalty) << '\t'
       << detail::cell(s.enhanced.total_penalty) << '\t' << detail::cell(s.penalty_improvement()) << '\t'
       << detail::cell(s.initial.max_violation) << '\t' << detail::cell(s.enhanced.max_violation) << '\n';
  }
}

inline void write_compare_table(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "# mtsched-compare " << kRecordSchemaVersion << '\n'
     << "policy\tseeds\ttotal_violation\tmean_violation\tmax_violation\ttotal_penalty\n";
  for (const auto& r : rows)
    os << r.policy.name() << '\t' << r.seeds << '\t' << detail::cell(r.total_violation) << '\t'
       << detail::cell(r.mean_violation) << '\t' << detail::cell(r.max_violation) << '\t'
       << detail::cell(r.total_penalty) << '\n';
}

}  // namespace mtsched
