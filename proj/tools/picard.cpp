#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "picard/picard.hpp"

namespace {

using namespace picard;

std::size_t resolve_workers(std::size_t from_config, std::size_t from_flag) {
  if (from_flag > 0) return from_flag;
  return workers_from_env(from_config);
}

void print_rows(const ExperimentResult& res) {
  for (const auto& row : res.rows) write_report_row(std::cout, row);
  for (const auto& n : res.notes) std::cout << "  " << n << '\n';
}

int cmd_run(const std::string& path, const std::string& output, std::size_t workers_flag) {
  ExperimentConfig cfg = load_config(path);
  if (!output.empty()) cfg.output = output;
  WorkerPool pool(resolve_workers(cfg.workers, workers_flag));
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult res = run_experiment(cfg, pool);
  std::cout << kReportHeader << '\n';
  print_rows(res);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << to_string(cfg.experiment) << ": " << res.rows.size() << " rows in " << secs << " s, written to "
            << cfg.output.string() << '\n';
  const bool verification = cfg.experiment == Experiment::OracleEquivalence || cfg.experiment == Experiment::VerifyProp5;
  if (verification && !res.passed) {
    std::cerr << "verification failed\n";
    return 1;
  }
  return 0;
}

// Cheap structural checks on small Gaussian runs.
bool invariant_suite(WorkerPool& pool) {
  bool ok = true;
  auto check = [&](bool cond, const std::string& what) {
    std::cout << (cond ? "PASS " : "FAIL ") << what << '\n';
    ok = ok && cond;
  };
  const std::size_t d = 16;
  const auto target = TargetModel::make(IsotropicGaussian::standard(d));
  const StreamKey key{3, 0};
  const State x0 = draw_standard_normal(key, d);
  KernelSpec spec;
  spec.d = d;
  spec.scale = 2.38 / 4.0;

  Kernel k1(spec, key);
  const RunResult one = online_picard_run(k1, target, x0, 200, 1, PrefixPolicy::certified(), pool);
  check(one.record.J == 200 && speedup_metric(one.record) == 1.0, "K = 1 commits one step per round");

  Kernel kr(spec, key);
  const RunResult full = online_picard_run(kr, target, x0, 400, 16, PrefixPolicy::approximate(1.0), pool);
  check(speedup_metric(full.record) == 16.0, "r = 1 commits the whole window");

  Kernel ke(spec, key);
  const RunResult exact = online_picard_run(ke, target, x0, 400, 16, PrefixPolicy::certified(), pool);
  const double g = speedup_metric(exact.record);
  check(g >= 1.0 && g <= 16.0, "exact-mode G_hat lies in [1, K]");

  Kernel kc(spec, key);
  const RunResult classic = classic_picard_run(kc, target, x0, 400, 16, pool);
  check(classic.record.J >= exact.record.J, "classic Picard needs at least as many rounds as online");
  return ok;
}

int cmd_verify(const std::string& output, std::size_t workers_flag, std::size_t configs) {
  WorkerPool pool(resolve_workers(1, workers_flag));
  bool ok = true;

  ExperimentConfig oracle = preset(Experiment::OracleEquivalence);
  oracle.configs = configs;
  oracle.output = std::filesystem::path(output) / "oracle_equivalence";
  const ExperimentResult r1 = run_experiment(oracle, pool);
  std::cout << (r1.passed ? "PASS " : "FAIL ") << r1.rows.size() << " random configurations reproduce the sequential chain\n";
  ok = ok && r1.passed;

  ExperimentConfig prop5 = preset(Experiment::VerifyProp5);
  prop5.output = std::filesystem::path(output) / "verify_prop5";
  const ExperimentResult r2 = run_experiment(prop5, pool);
  std::cout << (r2.passed ? "PASS " : "FAIL ") << "Haar MwG on an isotropic Gaussian commits K steps every round\n";
  ok = ok && r2.passed;

  ok = invariant_suite(pool) && ok;
  return ok ? 0 : 1;
}

int cmd_bench(const std::vector<std::string>& presets, const std::string& output, std::size_t workers_flag,
              const std::vector<std::uint64_t>& seeds) {
  WorkerPool pool(resolve_workers(1, workers_flag));
  std::cout << kReportHeader << '\n';
  for (const auto& name : presets) {
    ExperimentConfig cfg = preset(parse_experiment(name));
    if (!seeds.empty()) cfg.seeds = seeds;
    cfg.output = std::filesystem::path(output) / name;
    print_rows(run_experiment(cfg, pool));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online Picard sampler: parallel-in-time MCMC experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "execute an experiment config file");
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", output, "output directory, overrides the config");
  run->add_option("-w,--workers", workers, "worker threads, overrides PICARD_WORKERS and the config");

  std::string verify_out = "out/verify";
  std::size_t configs = 100;
  auto* verify = app.add_subcommand("verify", "exactness, fixed-point and invariant checks");
  verify->add_option("-o,--output", verify_out, "output directory");
  verify->add_option("-w,--workers", workers, "worker threads");
  verify->add_option("--configs", configs, "random configurations for the exactness check");

  std::string bench_out = "out/bench";
  std::vector<std::string> presets{"scaling_d", "scaling_k", "tolerance_sweep"};
  std::vector<std::uint64_t> seeds;
  auto* bench = app.add_subcommand("bench", "run the scaling presets");
  bench->add_option("-o,--output", bench_out, "output directory");
  bench->add_option("-w,--workers", workers, "worker threads");
  bench->add_option("-p,--preset", presets, "presets to run");
  bench->add_option("-s,--seeds", seeds, "seeds, replacing the preset's");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, output, workers);
    if (*verify) return cmd_verify(verify_out, workers, configs);
    if (*bench) return cmd_bench(presets, bench_out, workers, seeds);
  } catch (const std::exception& e) {
    std::cerr << "picard: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
