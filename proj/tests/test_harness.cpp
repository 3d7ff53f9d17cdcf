#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "picard/experiment.hpp"

using namespace picard;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("picard_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Config, ParsesFullFile) {
  const auto c = parse(
      "version = 1\n"
      "experiment = scaling_k   # window sweep\n"
      "\n"
      "kernel = mwg\n"
      "target = logistic\n"
      "d = 32, 64\n"
      "K = 2, sqrt_d, d, 2d, floor_sqrt_d\n"
      "N = 500\n"
      "r = 0, 0.1\n"
      "seeds = 1-3, 7\n"
      "workers = 4\n"
      "output = out/x\n"
      "scale = 0.25\n");
  EXPECT_EQ(c.experiment, Experiment::ScalingK);
  EXPECT_EQ(c.kernel, KernelKind::MwG);
  EXPECT_EQ(c.target, "logistic");
  EXPECT_EQ(c.d, (std::vector<std::size_t>{32, 64}));
  ASSERT_EQ(c.K.size(), 5u);
  EXPECT_EQ(c.K[0].resolve(64), 2u);
  EXPECT_EQ(c.K[1].resolve(50), 8u);
  EXPECT_EQ(c.K[2].resolve(64), 64u);
  EXPECT_EQ(c.K[3].resolve(64), 128u);
  EXPECT_EQ(c.K[4].resolve(50), 7u);
  EXPECT_EQ(c.N, 500u);
  EXPECT_EQ(c.r, (std::vector<double>{0.0, 0.1}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3, 7}));
  EXPECT_EQ(c.workers, 4u);
  EXPECT_EQ(c.output, std::filesystem::path("out/x"));
  ASSERT_TRUE(c.scale);
  EXPECT_EQ(*c.scale, 0.25);
}

TEST(Config, PresetDefaults) {
  const auto c = parse("version = 1\nexperiment = sir\n");
  EXPECT_EQ(c.target, "sir");
  EXPECT_EQ(c.N, 100000u);
  EXPECT_EQ(c.burn_in, 0.5);
  EXPECT_EQ(c.K[0].resolve(98), 9u);
  const auto p5 = preset(Experiment::VerifyProp5);
  EXPECT_EQ(p5.basis, BasisMode::HaarPerChain);
  EXPECT_EQ(p5.K[0].resolve(50), 25u);
  EXPECT_EQ(preset(Experiment::Tails).warmup, 10000u);
}

TEST(Config, Errors) {
  EXPECT_THROW(parse("experiment = scaling_d\n"), ConfigError);
  EXPECT_THROW(parse("version = 2\nexperiment = scaling_d\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nN = 10\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = nope\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = scaling_d\nN = 10\nN = 20\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = scaling_d\nfoo = 1\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = scaling_d\nr = 1.5\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = scaling_d\nK = 0\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = scaling_d\nd = 64\nK = 2d\nN = 100\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = scaling_d\ntarget = cauchy\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = scaling_d\nkernel = ula\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = scaling_d\nN = abc\n"), ConfigError);
  EXPECT_THROW(parse("version = 1\nexperiment = scaling_d\njust text\n"), ConfigError);
  try {
    parse("version = 1\nexperiment = scaling_d\n\nbogus = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(Config, ShippedSamplesParse) {
  const std::filesystem::path dir = PICARD_SOURCE_DIR "/configs";
  std::size_t n = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    if (f.path().extension() != ".conf") continue;
    EXPECT_NO_THROW(load_config(f.path())) << f.path();
    ++n;
  }
  EXPECT_GT(n, 0u);
}

TEST(Report, RowFormat) {
  ReportRow r;
  r.experiment = "scaling_d";
  r.seed = 3;
  r.kernel = "rwm";
  r.target = "linear";
  r.d = 64;
  r.K = 64;
  r.N = 2000;
  r.J = 100;
  r.L = 2010;
  r.G_hat = 20.1;
  r.acceptance = 0.25;
  std::ostringstream out;
  write_report_row(out, r);
  EXPECT_EQ(out.str(), "scaling_d,3,rwm,linear,64,64,2000,0,100,2010,20.1,,,0.25\n");
}

TEST(Harness, ScalingRunWritesReportAndRounds) {
  auto cfg = preset(Experiment::ScalingD);
  cfg.d = {16};
  cfg.N = 300;
  cfg.seeds = {1, 2};
  cfg.warmup = 500;
  cfg.output = scratch("scaling");
  WorkerPool pool(1);
  const auto res = run_experiment(cfg, pool);
  ASSERT_EQ(res.rows.size(), 2u);
  for (const auto& row : res.rows) {
    EXPECT_GE(*row.G_hat, 1.0);
    EXPECT_LE(*row.G_hat, 16.0);
    EXPECT_TRUE(row.M && row.E);
    EXPECT_GE(*row.L, 300.0);
  }
  const std::string report = slurp(cfg.output / "report.csv");
  EXPECT_EQ(report.rfind("# picard report v1\nexperiment,seed,kernel,target,d,K,N,r,J,L,G_hat,M,E,acceptance\n", 0), 0u);
  const std::string rounds = slurp(cfg.output / "rounds.csv");
  EXPECT_EQ(rounds.rfind("round,G,L,evals_cumulative\n", 0), 0u);
  std::filesystem::remove_all(cfg.output);
}

TEST(Harness, ReportsAreByteIdenticalAcrossWorkers) {
  for (auto e : {Experiment::OracleEquivalence, Experiment::VerifyProp5, Experiment::ToleranceSweep}) {
    auto cfg = preset(e);
    cfg.configs = 10;
    cfg.seeds = {1, 2};
    cfg.rounds = 5;
    if (e == Experiment::ToleranceSweep) {
      cfg.d = {20};
      cfg.N = 300;
      cfg.warmup = 500;
    }
    std::string first_report, first_rounds;
    for (std::size_t workers : {1u, 3u, 8u}) {
      cfg.output = scratch("det_" + std::to_string(workers));
      WorkerPool pool(workers);
      const auto res = run_experiment(cfg, pool);
      EXPECT_TRUE(res.passed);
      const auto report = slurp(cfg.output / "report.csv");
      const auto rounds = slurp(cfg.output / "rounds.csv");
      if (first_report.empty()) {
        first_report = report;
        first_rounds = rounds;
      } else {
        EXPECT_EQ(report, first_report) << to_string(e) << " workers " << workers;
        EXPECT_EQ(rounds, first_rounds);
      }
      std::filesystem::remove_all(cfg.output);
    }
  }
}

TEST(Harness, OracleEquivalenceListsEveryConfig) {
  auto cfg = preset(Experiment::OracleEquivalence);
  cfg.configs = 15;
  cfg.output = scratch("oracle");
  WorkerPool pool(2);
  const auto res = run_experiment(cfg, pool);
  EXPECT_TRUE(res.passed);
  EXPECT_EQ(res.rows.size(), 15u);
  const auto detail = slurp(cfg.output / "oracle.csv");
  EXPECT_EQ(std::count(detail.begin(), detail.end(), '\n'), 16);
  EXPECT_EQ(detail.find("FAIL"), std::string::npos);
  std::filesystem::remove_all(cfg.output);
}

TEST(Harness, Prop5RowsCommitFullWindows) {
  auto cfg = preset(Experiment::VerifyProp5);
  cfg.seeds = {1};
  cfg.output = scratch("prop5");
  WorkerPool pool(1);
  const auto res = run_experiment(cfg, pool);
  EXPECT_TRUE(res.passed);
  ASSERT_EQ(res.rows.size(), 2u);
  EXPECT_EQ(*res.rows[0].G_hat, 25.0);
  EXPECT_EQ(*res.rows[0].J, 20.0);
  EXPECT_EQ(res.rows[1].experiment, "verify_prop5_certified");
  std::filesystem::remove_all(cfg.output);
}

TEST(Harness, TailsAndGuessCurveFiles) {
  auto tails = preset(Experiment::Tails);
  tails.d = {10};
  tails.radii = {0.0, 100.0};
  tails.reps = 3;
  tails.warmup = 1000;
  tails.output = scratch("tails");
  WorkerPool pool(1);
  const auto t = run_experiment(tails, pool);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_LE(*t.rows[0].L, *t.rows[1].L);
  EXPECT_TRUE(std::filesystem::exists(tails.output / "tails.csv"));
  std::filesystem::remove_all(tails.output);

  auto thm = preset(Experiment::VerifyThm1);
  thm.d = {64};
  thm.reps = 100;
  thm.scale = 0.3;
  thm.output = scratch("thm1");
  run_experiment(thm, pool);
  const auto curve = slurp(thm.output / "guess_curve.csv");
  EXPECT_EQ(curve.rfind("seed,d,j,i,p_hat,se\n", 0), 0u);
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 7);
  std::filesystem::remove_all(thm.output);
}

TEST(Harness, ProblemsForEveryTarget) {
  ExperimentConfig cfg;
  for (const std::string t : {"gaussian", "linear", "logistic", "poisson"}) {
    cfg.target = t;
    const Problem p = make_problem(cfg, 6, 1);
    EXPECT_EQ(p.d, 6u);
    EXPECT_TRUE(std::isfinite(p.target.log_density(p.x0))) << t;
  }
  cfg.target = "sir";
  const Problem s = make_problem(cfg, 0, 1);
  EXPECT_GE(s.d, cfg.min_infected);
  EXPECT_TRUE(std::isfinite(s.target.log_density(s.x0)));
}

TEST(Harness, ReferenceMomentsAreCached) {
  ExperimentConfig cfg;
  cfg.target = "logistic";
  const Problem p = make_problem(cfg, 4, 2);
  KernelSpec spec;
  spec.d = 4;
  spec.scale = 0.3;
  const auto dir = scratch("cache");
  const Moments a = long_run_moments(p, spec, 2, 2000, dir);
  const Moments b = long_run_moments(p, spec, 2, 2000, dir);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.sd, b.sd);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& f : std::filesystem::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1u);
  std::filesystem::remove_all(dir);
}
