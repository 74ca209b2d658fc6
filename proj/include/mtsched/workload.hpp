#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mtsched/model.hpp"
#include "mtsched/rng.hpp"

namespace mtsched {

struct WorkloadSpec {
  double arrival_rate = 2.0;        // lambda, Poisson arrivals
  double service_rate = 1.0;        // mu, exponential execution times
  std::size_t num_jobs = 100;
  double allowance_fraction = 0.20;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(arrival_rate > 0.0) || !std::isfinite(arrival_rate)) throw InputError("workload: lambda must be > 0");
    if (!(service_rate > 0.0) || !std::isfinite(service_rate)) throw InputError("workload: mu must be > 0");
    if (num_jobs < 1) throw InputError("workload: at least one job is required");
    if (!(allowance_fraction >= 0.0) || !std::isfinite(allowance_fraction))
      throw InputError("workload: allowance fraction must be >= 0");
  }
};

// Substream layout: stream 0 drives inter-arrival times, stream j+1 drives the
// execution times of tier j.
inline JobSet generate(const WorkloadSpec& spec, const EnvironmentConfig& env) {
  spec.validate();
  env.validate();
  const std::size_t tiers = env.num_tiers();

  Rng arrivals(derive_seed(spec.seed, 0));
  std::vector<Rng> service;
  service.reserve(tiers);
  for (std::size_t j = 0; j < tiers; ++j) service.emplace_back(derive_seed(spec.seed, j + 1));

  JobSet out;
  Time clock = 0.0;
  for (std::size_t i = 0; i < spec.num_jobs; ++i) {
    clock += arrivals.exponential(spec.arrival_rate);
    std::vector<Time> exec(tiers);
    Time total = 0.0;
    for (std::size_t j = 0; j < tiers; ++j) {
      exec[j] = service[j].exponential(spec.service_rate);
      total += exec[j];
    }
    const Time allowance = total * spec.allowance_fraction;
    out.push_back(Job(static_cast<JobId>(i + 1), clock, std::move(exec), clock + total + allowance));
  }
  return out;
}

// Workload files
//
//   # free-form comment lines
//   mtsched-workload 1
//   tiers <N>
//   fields id arrival exec_1 .. exec_N target_completion
//   <one record per line, whitespace separated>
//
// Numbers are written in shortest round-trip form, so save/load is bit exact.
inline constexpr int kWorkloadSchemaVersion = 1;

inline std::string format_time(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw InvariantError("cannot format number");
  return std::string(buf, end);
}

inline void write_workload(std::ostream& os, const JobSet& jobs) {
  const std::size_t tiers = jobs.num_tiers();
  os << "mtsched-workload " << kWorkloadSchemaVersion << '\n';
  os << "tiers " << tiers << '\n';
  os << "fields id arrival";
  for (std::size_t j = 1; j <= tiers; ++j) os << " exec_" << j;
  os << " target_completion\n";
  for (const Job& job : jobs) {
    os << job.id() << ' ' << format_time(job.arrival());
    for (Time e : job.exec()) os << ' ' << format_time(e);
    os << ' ' << format_time(job.target_completion()) << '\n';
  }
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line_no, std::string_view what) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw InputError("line " + std::to_string(line_no) + ": cannot parse " + std::string(what) + " '" +
                     std::string(tok) + "'");
  return value;
}

}  // namespace detail

inline JobSet read_workload(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  auto next_record = [&]() -> std::vector<std::string_view> {
    while (std::getline(is, line)) {
      ++line_no;
      auto toks = detail::split_ws(line);
      if (toks.empty() || toks.front().starts_with('#')) continue;
      return toks;
    }
    return {};
  };
  auto fail = [&](const std::string& msg) { return InputError("line " + std::to_string(line_no) + ": " + msg); };

  auto header = next_record();
  if (header.size() != 2 || header[0] != "mtsched-workload") throw fail("missing 'mtsched-workload' header");
  const int version = detail::parse_number<int>(header[1], line_no, "schema version");
  if (version != kWorkloadSchemaVersion)
    throw fail("unsupported schema version " + std::to_string(version) + " (expected " +
               std::to_string(kWorkloadSchemaVersion) + ")");

  auto tiers_rec = next_record();
  if (tiers_rec.size() != 2 || tiers_rec[0] != "tiers") throw fail("expected 'tiers <N>'");
  const auto tiers = detail::parse_number<std::size_t>(tiers_rec[1], line_no, "tier count");
  if (tiers == 0) throw fail("tier count must be >= 1");

  auto fields = next_record();
  std::vector<std::string> expected{"fields", "id", "arrival"};
  for (std::size_t j = 1; j <= tiers; ++j) expected.push_back("exec_" + std::to_string(j));
  expected.emplace_back("target_completion");
  if (fields.size() != expected.size() || !std::equal(fields.begin(), fields.end(), expected.begin()))
    throw fail("field list does not match 'tiers " + std::to_string(tiers) + "'");

  JobSet jobs;
  for (auto rec = next_record(); !rec.empty(); rec = next_record()) {
    if (rec.size() != tiers + 3)
      throw fail("expected " + std::to_string(tiers + 3) + " fields, got " + std::to_string(rec.size()));
    const auto id = detail::parse_number<JobId>(rec[0], line_no, "id");
    const auto arrival = detail::parse_number<double>(rec[1], line_no, "arrival");
    std::vector<Time> exec(tiers);
    for (std::size_t j = 0; j < tiers; ++j) exec[j] = detail::parse_number<double>(rec[2 + j], line_no, "exec");
    const auto target = detail::parse_number<double>(rec[2 + tiers], line_no, "target_completion");
    try {
      jobs.push_back(Job(id, arrival, std::move(exec), target));
    } catch (const InputError& e) {
      throw fail(e.what());
    }
  }
  return jobs;
}

inline void save(const JobSet& jobs, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open " + path.string() + " for writing");
  write_workload(os, jobs);
  if (!os) throw InputError("failed writing " + path.string());
}

inline JobSet load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open workload " + path.string());
  try {
    return read_workload(is);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace mtsched
