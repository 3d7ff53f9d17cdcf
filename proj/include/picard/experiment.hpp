#ifndef PICARD_EXPERIMENT_HPP
#define PICARD_EXPERIMENT_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "picard/chain.hpp"
#include "picard/config.hpp"
#include "picard/engine.hpp"
#include "picard/io.hpp"
#include "picard/kernels.hpp"
#include "picard/metrics.hpp"
#include "picard/sequential.hpp"
#include "picard/target.hpp"
#include "picard/targets/gaussian.hpp"
#include "picard/targets/regression.hpp"
#include "picard/targets/sir.hpp"
#include "picard/worker_pool.hpp"

namespace picard {

inline constexpr std::string_view kReportVersionLine = "# picard report v1";
inline constexpr std::string_view kReportHeader = "experiment,seed,kernel,target,d,K,N,r,J,L,G_hat,M,E,acceptance";

/// One row of report.csv. Empty optionals are written as empty fields.
struct ReportRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string kernel;
  std::string target;
  std::size_t d = 0;
  std::size_t K = 0;
  std::uint64_t N = 0;
  double r = 0.0;
  std::optional<double> J;
  std::optional<double> L;
  std::optional<double> G_hat;
  std::optional<double> M;
  std::optional<double> E;
  std::optional<double> acceptance;
};

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline void write_report_row(std::ostream& out, const ReportRow& row) {
  out << row.experiment << ',' << row.seed << ',' << row.kernel << ',' << row.target << ',' << row.d << ',' << row.K
      << ',' << row.N << ',' << format_double(row.r) << ',' << format_optional(row.J) << ','
      << format_optional(row.L) << ',' << format_optional(row.G_hat) << ',' << format_optional(row.M) << ','
      << format_optional(row.E) << ',' << format_optional(row.acceptance) << '\n';
}

struct ExperimentResult {
  std::vector<ReportRow> rows;
  bool passed = true;  // verification presets only
  std::vector<std::string> notes;
};

/// A target with its start state and, when known, its true moments.
struct Problem {
  TargetModel target;
  State x0;
  std::optional<Moments> reference;
  std::string name;
  std::size_t d = 0;
  double sd_guess = 1.0;  // rough posterior scale, seeds the tuner
  std::optional<RegressionData> regression;
  std::optional<SirData> sir;
};

inline State draw_standard_normal(const StreamKey& key, std::size_t d) {
  State x(d);
  gaussian_lanes(key.with_stream(streams::init), 0, 0, x);
  return x;
}

inline RegressionModel parse_regression(const std::string& name) {
  if (name == "linear") return RegressionModel::Linear;
  if (name == "logistic") return RegressionModel::Logistic;
  if (name == "poisson") return RegressionModel::Poisson;
  throw ConfigError("not a regression target: " + name);
}

/// First epidemic from the seed's forks with at least `min_infected` cases.
inline SirData simulate_major_outbreak(std::size_t M, double beta, double gamma, std::size_t min_infected,
                                       const StreamKey& key, int max_tries = 1000) {
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    SirData data = sir_forward_simulate(M, beta, gamma, attempt == 0 ? key : key.fork(static_cast<std::uint64_t>(attempt)));
    if (data.d() >= min_infected) return data;
  }
  throw std::runtime_error("no outbreak with " + std::to_string(min_infected) + " cases in " +
                           std::to_string(max_tries) + " simulations");
}

inline Problem make_problem(const ExperimentConfig& cfg, std::size_t d, std::uint64_t seed) {
  const StreamKey key{seed, 0};
  Problem p;
  p.name = cfg.target;
  if (cfg.target == "gaussian") {
    p.target = TargetModel::make(IsotropicGaussian::standard(d));
    p.x0 = draw_standard_normal(key, d);
    p.reference = p.target.moments();
  } else if (cfg.target == "sir") {
    SirData data = simulate_major_outbreak(cfg.population, cfg.beta, cfg.gamma, cfg.min_infected, key);
    p.x0 = sir_initial_state(data, key);
    p.sir = data;
    p.target = TargetModel::make(SirPosterior(std::move(data)));
    p.sd_guess = 5.0;
  } else {
    RegressionData data = generate_regression_data(parse_regression(cfg.target), d, key);
    p.regression = data;
    p.target = TargetModel::make(RegressionPosterior(data));
    p.reference = p.target.moments();
    p.x0 = p.reference ? p.reference->mean : data.x_true;
    p.sd_guess = 0.4;
  }
  p.d = p.target.dim();
  if (p.reference) {
    double s = 0.0;
    for (double v : p.reference->sd) s += v;
    p.sd_guess = s / static_cast<double>(p.d);
  }
  return p;
}

/// Initial proposal scale before tuning.
inline double default_scale(KernelKind kind, BasisMode basis, std::size_t d, double sd) {
  if (kind == KernelKind::MwG && basis == BasisMode::Standard) return sd;
  return 2.38 / std::sqrt(static_cast<double>(d)) * sd;
}

/// Kernel for a problem: the configured scale, or one tuned from x0.
inline KernelSpec make_kernel_spec(const ExperimentConfig& cfg, const Problem& p, const StreamKey& key,
                                   double* tuned_acceptance = nullptr) {
  KernelSpec spec;
  spec.kind = cfg.kernel;
  spec.basis = cfg.basis;
  spec.d = p.d;
  spec.scale = cfg.scale.value_or(default_scale(cfg.kernel, cfg.basis, p.d, p.sd_guess));
  if (cfg.scale) return spec;
  const TuningResult t = tune_step_size(spec, p.target, p.x0, key, cfg.warmup);
  if (tuned_acceptance) *tuned_acceptance = t.acceptance;
  return t.spec;
}

/// Long sequential-run moments, cached under `dir` keyed by target, d, seed
/// and run length.
inline Moments long_run_moments(const Problem& p, const KernelSpec& spec, std::uint64_t seed, std::uint64_t n_ref,
                                const std::filesystem::path& dir) {
  const auto file = dir / ("reference_" + p.name + "_d" + std::to_string(p.d) + "_seed" + std::to_string(seed) +
                           "_n" + std::to_string(n_ref) + ".csv");
  if (std::filesystem::exists(file)) {
    const auto rows = read_numeric_csv(file);
    if (rows.size() == 2 && rows[0].size() == p.d) return {rows[0], rows[1]};
  }
  Kernel kernel(spec, StreamKey{seed, 0}.fork(0x52454655ULL));
  RunningMoments rm(p.d, n_ref / 5);
  sequential_run(kernel, p.target, p.x0, n_ref, rm.sink());
  Moments m = rm.moments();
  std::filesystem::create_directories(dir);
  std::vector<double> flat = m.mean;
  flat.insert(flat.end(), m.sd.begin(), m.sd.end());
  write_numeric_csv(file, flat, p.d);
  return m;
}

/// Writers for report.csv and rounds.csv in the output directory.
class ReportFiles {
 public:
  explicit ReportFiles(const std::filesystem::path& dir)
      : dir_(dir), report_(open_output(dir / "report.csv")), rounds_(open_output(dir / "rounds.csv")) {
    report_ << kReportVersionLine << '\n' << kReportHeader << '\n';
    rounds_ << "round,G,L,evals_cumulative\n";
  }

  void row(const ReportRow& r) { write_report_row(report_, r); }
  void rounds(const RunRecord& rec) { write_rounds_rows(rounds_, rec); }
  [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::ofstream report_;
  std::ofstream rounds_;
};

namespace detail {

inline ReportRow base_row(const ExperimentConfig& cfg, std::uint64_t seed, std::size_t d, std::size_t K) {
  ReportRow row;
  row.experiment = to_string(cfg.experiment);
  row.seed = seed;
  row.kernel = to_string(cfg.kernel);
  if (cfg.kernel == KernelKind::MwG && cfg.basis != BasisMode::Standard) row.kernel += "-" + to_string(cfg.basis);
  row.target = cfg.target;
  row.d = d;
  row.K = K;
  row.N = cfg.N;
  return row;
}

inline void fill_run(ReportRow& row, const RunRecord& rec) {
  row.J = static_cast<double>(rec.J);
  row.L = static_cast<double>(rec.L);
  row.G_hat = speedup_metric(rec);
  row.acceptance = rec.acceptance_rate();
}

/// scaling_d, scaling_k, tolerance_sweep and sir: online runs over a grid.
inline ExperimentResult run_grid(const ExperimentConfig& cfg, ReportFiles& files, WorkerPool& pool) {
  ExperimentResult res;
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t d_cfg : cfg.d) {
      const Problem p = make_problem(cfg, d_cfg, seed);
      const StreamKey key{seed, 0};
      const KernelSpec spec = make_kernel_spec(cfg, p, key);
      std::optional<Moments> reference = p.reference;
      if (!reference && cfg.reference_factor > 0) {
        const auto dir = cfg.cache_dir.empty() ? cfg.output / "cache" : cfg.cache_dir;
        reference = long_run_moments(p, spec, seed, cfg.reference_factor * cfg.N, dir);
      }
      for (const auto& krule : cfg.K) {
        const std::size_t K = krule.resolve(p.d);
        for (double r : cfg.r) {
          Kernel kernel(spec, key);
          const auto burn = static_cast<std::uint64_t>(cfg.burn_in * static_cast<double>(cfg.N));
          RunningMoments rm(p.d, burn);
          std::optional<Trajectory> traj;
          if (cfg.trajectory_every > 0) traj.emplace(p.x0);
          CommitSink sink = rm.sink();
          if (traj) sink = combine_sinks({sink, traj->sink()});
          const PrefixPolicy policy = r == 0.0 ? PrefixPolicy::certified() : PrefixPolicy::approximate(r);
          const RunResult run = online_picard_run(kernel, p.target, p.x0, cfg.N, K, policy, pool, sink);
          ReportRow row = base_row(cfg, seed, p.d, K);
          row.r = r;
          fill_run(row, run.record);
          if (reference) {
            const MomentErrors me = moment_errors(rm.moments(), *reference);
            row.M = me.M;
            row.E = me.E;
          }
          files.row(row);
          files.rounds(run.record);
          if (traj) {
            auto out = open_output(files.dir() / ("trajectory_seed" + std::to_string(seed) + "_d" +
                                                  std::to_string(p.d) + "_K" + std::to_string(K) + "_r" +
                                                  format_double(r) + ".csv"));
            write_trajectory_csv(out, *traj, cfg.trajectory_every);
          }
          res.rows.push_back(std::move(row));
        }
      }
    }
  }
  return res;
}

/// L^(1) from starts on spheres of growing radius around the posterior mode.
inline ExperimentResult run_tails(const ExperimentConfig& cfg, ReportFiles& files, WorkerPool& pool) {
  ExperimentResult res;
  auto tails = open_output(files.dir() / "tails.csv");
  tails << "seed,radius,rep,L1\n";
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t d_cfg : cfg.d) {
      Problem p = make_problem(cfg, d_cfg, seed);
      if (p.regression) p.x0 = regression_posterior_mode(*p.regression);
      const StreamKey key{seed, 0};
      const KernelSpec spec = make_kernel_spec(cfg, p, key);
      for (const auto& krule : cfg.K) {
        const std::size_t K = krule.resolve(p.d);
        for (std::size_t ri = 0; ri < cfg.radii.size(); ++ri) {
          double total = 0.0;
          for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
            const StreamKey rep_key = key.fork(1 + rep);
            const State x0 = uniform_on_sphere(p.x0, cfg.radii[ri], rep_key, 0);
            Kernel kernel(spec, rep_key);
            const std::size_t L1 = first_iterate_prefix(kernel, p.target, x0, K, pool);
            total += static_cast<double>(L1);
            tails << seed << ',' << format_double(cfg.radii[ri]) << ',' << rep << ',' << L1 << '\n';
          }
          ReportRow row = base_row(cfg, seed, p.d, K);
          row.N = K;
          row.J = 1.0;
          row.L = total / static_cast<double>(cfg.reps);
          row.G_hat = row.L;
          res.rows.push_back(row);
          res.notes.push_back("radius " + format_double(cfg.radii[ri]) + ": mean L1 " + format_double(*row.L));
          files.row(row);
        }
      }
    }
  }
  return res;
}

/// Probability of a wrong accept guess after j Picard applications.
inline ExperimentResult run_thm1(const ExperimentConfig& cfg, ReportFiles& files, WorkerPool& pool) {
  ExperimentResult res;
  auto curve_out = open_output(files.dir() / "guess_curve.csv");
  curve_out << "seed,d,j,i,p_hat,se\n";
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t d_cfg : cfg.d) {
      const Problem p = make_problem(cfg, d_cfg, seed);
      const StreamKey key{seed, 0};
      const KernelSpec spec = make_kernel_spec(cfg, p, key);
      const std::size_t j = cfg.j ? cfg.j : static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(p.d))));
      std::vector<std::size_t> is = cfg.i_values;
      if (is.empty()) is = {0, p.d / 64, p.d / 32, p.d / 16, p.d / 8, p.d / 4};
      auto start = [&](std::size_t rep) {
        return cfg.target == "gaussian" ? draw_standard_normal(key.fork(rep), p.d) : p.x0;
      };
      const auto curve = incorrect_guess_probability(spec, p.target, start, is, j, cfg.reps, key, pool);
      for (const auto& pt : curve)
        curve_out << seed << ',' << p.d << ',' << j << ',' << pt.i << ',' << format_double(pt.p_hat) << ','
                  << format_double(pt.se) << '\n';
      ReportRow row = base_row(cfg, seed, p.d, is.empty() ? 0 : *std::max_element(is.begin(), is.end()) + 1);
      row.N = row.K;
      row.J = static_cast<double>(j);
      files.row(row);
      res.rows.push_back(row);
    }
  }
  return res;
}

/// MwG on an isotropic Gaussian: every round commits the full window.
inline ExperimentResult run_prop5(const ExperimentConfig& cfg, ReportFiles& files, WorkerPool& pool) {
  ExperimentResult res;
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t d_cfg : cfg.d) {
      const Problem p = make_problem(cfg, d_cfg, seed);
      const StreamKey key{seed, 0};
      const KernelSpec spec = make_kernel_spec(cfg, p, key);
      for (const auto& krule : cfg.K) {
        const std::size_t K = krule.resolve(p.d);
        const std::uint64_t N = cfg.rounds * K;
        Kernel oracle_kernel(spec, key);
        const Trajectory truth = sequential_simulate(oracle_kernel, p.target, p.x0, N);

        Kernel kernel(spec, key);
        Trajectory committed(p.x0);
        const RunResult run =
            online_picard_run(kernel, p.target, p.x0, N, K, PrefixPolicy::oracle(truth.accept_flags), pool, committed.sink());
        bool ok = run.record.J == cfg.rounds && bit_identical(committed, truth);
        for (std::size_t jj = 0; jj < run.record.G_history.size(); ++jj) ok = ok && run.record.G_history[jj] == K;
        res.passed = res.passed && ok;
        ReportRow row = base_row(cfg, seed, p.d, K);
        row.N = N;
        fill_run(row, run.record);
        files.row(row);
        files.rounds(run.record);
        res.rows.push_back(row);

        Kernel cert_kernel(spec, key);
        const RunResult cert = online_picard_run(cert_kernel, p.target, p.x0, N, K, PrefixPolicy::certified(), pool);
        ReportRow crow = row;
        crow.experiment += "_certified";
        fill_run(crow, cert.record);
        files.row(crow);
        res.rows.push_back(crow);
      }
    }
  }
  return res;
}

/// Random small configurations; each exact online run must reproduce the
/// sequential chain bit for bit.
inline ExperimentResult run_oracle_equivalence(const ExperimentConfig& cfg, ReportFiles& files, WorkerPool& pool) {
  ExperimentResult res;
  auto detail_out = open_output(files.dir() / "oracle.csv");
  detail_out << "config,seed,kernel,target,d,K,N,match\n";
  static const char* kTargets[] = {"gaussian", "linear", "logistic"};
  for (std::uint64_t seed : cfg.seeds) {
    for (std::size_t c = 0; c < cfg.configs; ++c) {
      CounterEngine eng(StreamKey{seed, 7}, c);
      const auto d = static_cast<std::size_t>(std::uniform_int_distribution<int>(2, 32)(eng));
      const auto N = static_cast<std::uint64_t>(std::uniform_int_distribution<int>(10, 500)(eng));
      const auto K = static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 16)(eng));
      const int kernel_pick = std::uniform_int_distribution<int>(0, 2)(eng);
      const char* target = kTargets[std::uniform_int_distribution<int>(0, 2)(eng)];
      const std::uint64_t run_seed = eng();

      ExperimentConfig sub = cfg;
      sub.target = target;
      sub.kernel = kernel_pick == 0 ? KernelKind::RWM : KernelKind::MwG;
      sub.basis = kernel_pick == 2 ? BasisMode::HaarPerSweep : BasisMode::Standard;
      sub.N = N;
      const Problem p = make_problem(sub, d, run_seed);
      KernelSpec spec;
      spec.kind = sub.kernel;
      spec.basis = sub.basis;
      spec.d = d;
      spec.scale = default_scale(sub.kernel, sub.basis, d, p.sd_guess);
      const StreamKey key{run_seed, 0};

      Kernel seq_kernel(spec, key);
      const Trajectory truth = sequential_simulate(seq_kernel, p.target, p.x0, N);
      Kernel kernel(spec, key);
      auto [traj, rec] = online_picard_trajectory(kernel, p.target, p.x0, N, K, PrefixPolicy::certified(), pool);
      const bool match = bit_identical(traj, truth);
      res.passed = res.passed && match;

      ReportRow row = base_row(sub, run_seed, d, K);
      row.experiment = to_string(cfg.experiment);
      fill_run(row, rec);
      files.row(row);
      files.rounds(rec);
      res.rows.push_back(row);
      detail_out << c << ',' << run_seed << ',' << row.kernel << ',' << target << ',' << d << ',' << K << ',' << N
                 << ',' << (match ? "pass" : "FAIL") << '\n';
    }
  }
  return res;
}

}  // namespace detail

/// Runs a configured experiment and writes its files under cfg.output.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, WorkerPool& pool) {
  cfg.validate();
  ReportFiles files(cfg.output);
  switch (cfg.experiment) {
    case Experiment::ScalingD:
    case Experiment::ScalingK:
    case Experiment::ToleranceSweep:
    case Experiment::Sir: return detail::run_grid(cfg, files, pool);
    case Experiment::Tails: return detail::run_tails(cfg, files, pool);
    case Experiment::VerifyThm1: return detail::run_thm1(cfg, files, pool);
    case Experiment::VerifyProp5: return detail::run_prop5(cfg, files, pool);
    case Experiment::OracleEquivalence: return detail::run_oracle_equivalence(cfg, files, pool);
  }
  throw ConfigError("unhandled experiment");
}

}  // namespace picard

#endif  // PICARD_EXPERIMENT_HPP
