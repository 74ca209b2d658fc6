// mtsched: workload generation, simulation, GA rescheduling and policy comparison.
//
//   mtsched generate --jobs 100 --lambda 2.0 --seed 7 -o w.txt
//   mtsched run --policy ga-virtualized --mode wpt --snapshot-jobs 58 --out-dir out/
//   mtsched compare --policies wrr,wlc,ga-virtualized-wpt --seeds 1-10 --out-dir cmp/
//
// Every flag can also be set through MTSCHED_<FLAG> (upper case, dashes as
// underscores); the command line wins.
//
// Exit codes: 0 success, 2 usage, 3 input error, 4 internal invariant violation.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtsched/mtsched.hpp"
#include "mtsched/report.hpp"

namespace fs = std::filesystem;
using namespace mtsched;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::size_t jobs = 0;
  double lambda = 2.0;
  double mu = 1.0;
  double allowance = 0.20;
  double nu = 0.01;
  double chi = 1.0;
  std::size_t tiers = 2;
  std::size_t resources = 3;
  std::size_t population = 10;
  std::size_t generations = 1000;
  std::string mode = "wal";
  std::string epoch = "event";
  std::string workload;
  std::string out_dir = ".";
};

template <class T>
CLI::Option* env_option(CLI::App* app, const std::string& name, T& value, const std::string& help) {
  std::string env = "MTSCHED_";
  const auto first = name.substr(0, name.find(','));
  for (char c : first.substr(first.find_first_not_of('-')))
    env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return app->add_option(name, value, help)->envname(env)->capture_default_str();
}

void add_environment_flags(CLI::App* app, CommonFlags& f) {
  env_option(app, "--tiers", f.tiers, "number of tiers")->check(CLI::PositiveNumber);
  env_option(app, "--resources", f.resources, "resources per tier")->check(CLI::PositiveNumber);
  env_option(app, "--nu", f.nu, "penalty decay rate")->check(CLI::NonNegativeNumber);
  env_option(app, "--chi", f.chi, "penalty scale")->check(CLI::NonNegativeNumber);
}

void add_workload_flags(CLI::App* app, CommonFlags& f) {
  env_option(app, "--lambda", f.lambda, "Poisson arrival rate")->check(CLI::PositiveNumber);
  env_option(app, "--mu", f.mu, "exponential service rate per tier")->check(CLI::PositiveNumber);
  env_option(app, "--allowance", f.allowance, "waiting allowance as a fraction of total execution time")
      ->check(CLI::NonNegativeNumber);
}

void add_ga_flags(CLI::App* app, CommonFlags& f) {
  env_option(app, "--mode", f.mode, "allowance mode: wal (multi-tier) or wpt (differentiated)")
      ->check(CLI::IsMember({"wal", "wpt"}));
  env_option(app, "--population", f.population, "GA population size")->check(CLI::Range(2, 1'000'000));
  env_option(app, "--generations", f.generations, "GA generations")->check(CLI::PositiveNumber);
  env_option(app, "--epoch", f.epoch, "reschedule cadence: event | never | arrivals:K | time:DT");
  env_option(app, "--out-dir", f.out_dir, "directory for report files");
}

EnvironmentConfig environment_of(const CommonFlags& f) {
  auto env = EnvironmentConfig::uniform(f.tiers, f.resources);
  env.penalty = PenaltyModel{f.chi, f.nu};
  env.allowance_fraction = f.allowance;
  env.validate();
  return env;
}

WorkloadSpec workload_spec_of(const CommonFlags& f, std::uint64_t seed) {
  WorkloadSpec w;
  w.arrival_rate = f.lambda;
  w.service_rate = f.mu;
  w.num_jobs = f.jobs;
  w.allowance_fraction = f.allowance;
  w.seed = seed;
  return w;
}

ExperimentConfig experiment_of(const CommonFlags& f, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.env = environment_of(f);
  cfg.ga.population = f.population;
  cfg.ga.generations = f.generations;
  cfg.ga.allowance = parse_allowance_mode(f.mode);
  cfg.ga.validate();
  cfg.epoch = RescheduleEpoch::parse(f.epoch);
  cfg.seed = seed;
  return cfg;
}

JobSet workload_of(const CommonFlags& f, const EnvironmentConfig& env, std::uint64_t seed) {
  if (!f.workload.empty()) {
    JobSet jobs = load(f.workload);
    if (!jobs.empty() && jobs.at(1).exec().size() != env.num_tiers())
      throw InputError("workload has " + std::to_string(jobs.at(1).exec().size()) + " tiers, environment has " +
                       std::to_string(env.num_tiers()));
    return jobs;
  }
  if (f.jobs == 0) throw UsageError("either --workload or --jobs is required");
  return generate(workload_spec_of(f, seed), env);
}

PolicySpec policy_of(const std::string& name, const std::string& mode, bool mode_given) {
  const AllowanceMode m = parse_allowance_mode(mode);
  PolicySpec p;
  try {
    p = PolicySpec::parse(name, m);
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  if (mode_given && p.allowance != m)
    throw UsageError("policy '" + name + "' conflicts with --mode " + mode);
  return p;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  auto number = [&](std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw UsageError("bad seed '" + std::string(s) + "'");
    return v;
  };
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (auto dash = item.find('-'); dash != std::string::npos) {
      const auto lo = number(std::string_view(item).substr(0, dash));
      const auto hi = number(std::string_view(item).substr(dash + 1));
      if (hi < lo) throw UsageError("empty seed range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(number(item));
    }
  }
  if (out.empty()) throw UsageError("at least one seed is required");
  return out;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream os(dir / name);
  if (!os) throw InputError("cannot write " + (dir / name).string());
  return os;
}

// ---------------------------------------------------------------------------

int cmd_generate(const CommonFlags& f, std::uint64_t seed, const std::string& output) {
  const auto env = environment_of(f);
  const auto spec = workload_spec_of(f, seed);
  spec.validate();
  const JobSet jobs = generate(spec, env);
  if (output == "-") {
    write_workload(std::cout, jobs);
  } else {
    save(jobs, output);
    std::cout << "jobs\t" << spec.num_jobs << "\nlambda\t" << format_time(spec.arrival_rate) << "\nmu\t"
              << format_time(spec.service_rate) << "\nallowance\t" << format_time(spec.allowance_fraction)
              << "\ntiers\t" << env.num_tiers() << "\nseed\t" << seed << "\nfile\t" << output << '\n';
  }
  return 0;
}

int cmd_run(const CommonFlags& f, const std::string& policy_name, bool mode_given, std::uint64_t seed,
            std::size_t snapshot_jobs) {
  const PolicySpec policy = policy_of(policy_name, f.mode, mode_given);
  const ExperimentConfig cfg = experiment_of(f, seed);
  const JobSet jobs = workload_of(f, cfg.env, seed);
  const fs::path dir = f.out_dir;

  SummaryRecord summary{.policy = policy.name(), .mode = policy.allowance, .seed = seed};
  auto jobs_out = open_out(dir, "jobs.jsonl");
  auto history_out = open_out(dir, "history.jsonl");

  if (snapshot_jobs > 0) {
    auto placement = make_policy(policy.placement, seed);
    const Snapshot snap = freeze_snapshot(jobs, cfg.env, *placement, snapshot_jobs);
    const auto r = optimize_snapshot(snap, jobs, policy, cfg);
    summary.scope = "snapshot";
    summary.initial = totals_of(r.initial);
    summary.enhanced = totals_of(r.enhanced_breakdown);
    summary.evaluations = r.evaluations;
    for (const auto& v : r.initial.jobs) write_line(jobs_out, job_record("initial", summary.policy, seed, v));
    for (const auto& v : r.enhanced_breakdown.jobs)
      write_line(jobs_out, job_record("enhanced", summary.policy, seed, v));
    for (const auto& g : r.history) write_line(history_out, history_record(summary.policy, seed, g));
  } else {
    const auto c = run_with_baseline(jobs, policy, cfg);
    summary.scope = "run";
    summary.initial = totals_of(c.initial.report);
    summary.enhanced = totals_of(c.enhanced.report);
    for (const auto& o : c.initial.report.jobs) write_line(jobs_out, job_record("initial", summary.policy, seed, o));
    for (const auto& o : c.enhanced.report.jobs)
      write_line(jobs_out, job_record("enhanced", summary.policy, seed, o));
    auto epochs_out = open_out(dir, "epochs.jsonl");
    for (const auto& e : c.enhanced.epochs) write_line(epochs_out, epoch_record(summary.policy, seed, e));
    auto trace_out = open_out(dir, "trace.txt");
    write_trace(trace_out, c.enhanced.trace);
    for (const auto& msg : c.enhanced.incidents) std::cerr << "warning: " << msg << '\n';
  }

  auto summary_jsonl = open_out(dir, "summary.jsonl");
  write_line(summary_jsonl, to_json(summary));
  auto summary_tsv = open_out(dir, "summary.tsv");
  write_summary_table(summary_tsv, {summary});
  write_summary_table(std::cout, {summary});
  return 0;
}

int cmd_compare(const CommonFlags& f, const std::vector<std::string>& policy_names, bool mode_given,
                const std::string& seeds_text, unsigned threads) {
  std::vector<PolicySpec> policies;
  for (const auto& n : policy_names) policies.push_back(policy_of(n, f.mode, mode_given));
  const auto seeds = parse_seeds(seeds_text);
  const ExperimentConfig cfg = experiment_of(f, seeds.front());

  std::optional<JobSet> fixed;
  if (!f.workload.empty()) fixed = workload_of(f, cfg.env, seeds.front());
  else if (f.jobs == 0) throw UsageError("either --workload or --jobs is required");
  const auto spec = workload_spec_of(f, seeds.front());
  if (!fixed) spec.validate();

  const auto cmp = compare_policies(policies, seeds, spec, cfg, fixed ? &*fixed : nullptr, threads);

  const fs::path dir = f.out_dir;
  auto jobs_out = open_out(dir, "jobs.jsonl");
  for (const auto& run : cmp.runs)
    for (const auto& o : run.report.jobs) write_line(jobs_out, job_record("enhanced", run.policy.name(), run.seed, o));
  auto compare_jsonl = open_out(dir, "compare.jsonl");
  for (const auto& row : cmp.rows) write_line(compare_jsonl, compare_record(row));
  auto compare_tsv = open_out(dir, "compare.tsv");
  write_compare_table(compare_tsv, cmp.rows);
  write_compare_table(std::cout, cmp.rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-tier job scheduling: workload generation, simulation and GA rescheduling"};
  app.require_subcommand(1);
  CommonFlags f;
  std::uint64_t seed = 1;

  auto* gen = app.add_subcommand("generate", "write a seeded Poisson/exponential workload file");
  std::string output = "workload.txt";
  env_option(gen, "--jobs", f.jobs, "number of jobs")->required()->check(CLI::PositiveNumber);
  add_workload_flags(gen, f);
  add_environment_flags(gen, f);
  env_option(gen, "--seed", seed, "workload seed");
  gen->add_option("-o,--output", output, "output file, - for stdout")->capture_default_str();

  auto* run = app.add_subcommand("run", "simulate one policy and report initial vs enhanced violation");
  std::string policy = "ga-virtualized";
  std::size_t snapshot_jobs = 0;
  env_option(run, "--jobs", f.jobs, "number of generated jobs (ignored with --workload)");
  env_option(run, "--workload", f.workload, "workload file");
  add_workload_flags(run, f);
  add_environment_flags(run, f);
  add_ga_flags(run, f);
  env_option(run, "--seed", seed, "seed for workload generation, GA and random placement");
  env_option(run, "--policy", policy,
             "fcfs | wrr | wlc | random | ga-virtualized[-wal|-wpt] | ga-segmented[-wal|-wpt]");
  env_option(run, "--snapshot-jobs", snapshot_jobs,
             "optimize one frozen snapshot holding at least this many waiting jobs (0: full run)");

  auto* cmp = app.add_subcommand("compare", "median-of-seeds comparison of several policies");
  std::vector<std::string> policies{"wrr", "wlc", "ga-virtualized"};
  std::string seeds = "1-10";
  unsigned threads = 0;
  env_option(cmp, "--jobs", f.jobs, "number of generated jobs per seed (ignored with --workload)");
  env_option(cmp, "--workload", f.workload, "fixed workload file for every seed");
  add_workload_flags(cmp, f);
  add_environment_flags(cmp, f);
  add_ga_flags(cmp, f);
  env_option(cmp, "--policies,--policy", policies, "comma separated policy list")->delimiter(',');
  env_option(cmp, "--seeds", seeds, "seed list, e.g. 1-10 or 3,5,8");
  env_option(cmp, "--threads", threads, "worker threads (0: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const bool mode_given = app.got_subcommand(run) ? run->count("--mode") > 0 : cmp->count("--mode") > 0;
    if (app.got_subcommand(gen)) return cmd_generate(f, seed, output);
    if (app.got_subcommand(run)) return cmd_run(f, policy, mode_given, seed, snapshot_jobs);
    return cmd_compare(f, policies, mode_given, seeds, threads);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 4;
  }
}
