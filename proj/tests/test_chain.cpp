#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "picard/chain.hpp"
#include "picard/io.hpp"
#include "picard/kernels.hpp"
#include "picard/sequential.hpp"
#include "picard/targets/gaussian.hpp"

using namespace picard;

namespace {

KernelSpec rwm(std::size_t d, double scale) {
  KernelSpec s;
  s.d = d;
  s.scale = scale;
  return s;
}

Innovation make_w(double u, std::vector<double> z, std::uint64_t step = 0) { return {u, std::move(z), step}; }

}  // namespace

TEST(Sequential, ZeroStepsKeepsStart) {
  const IsotropicGaussian g = IsotropicGaussian::standard(3);
  const Trajectory t = sequential_simulate(rwm(3, 0.5), g, State{1, 2, 3}, 0, StreamKey{1, 0});
  ASSERT_EQ(t.states.size(), 1u);
  EXPECT_EQ(t.states[0], (State{1, 2, 3}));
  EXPECT_TRUE(t.accept_flags.empty());
}

TEST(Sequential, ZeroUniformAlwaysAccepts) {
  const IsotropicGaussian g = IsotropicGaussian::standard(1);
  Kernel k(rwm(1, 1.0), StreamKey{1, 0});
  State x{0.3};
  const StepResult s = k.step(g, x, make_w(0.0, {5.0}));
  EXPECT_TRUE(s.accepted);
  apply_step(x, s);
  EXPECT_EQ(x[0], 0.3 + 5.0);
}

TEST(Sequential, RejectsWhenRatioBelowUniform) {
  // exp(-1/2) = 0.6065 < 0.7
  const IsotropicGaussian g = IsotropicGaussian::standard(1);
  Kernel k(rwm(1, 1.0), StreamKey{1, 0});
  State x{0.0};
  const StepResult s = k.step(g, x, make_w(0.7, {1.0}));
  EXPECT_FALSE(s.accepted);
  apply_step(x, s);
  EXPECT_EQ(x[0], 0.0);
  EXPECT_TRUE(k.step(g, State{0.0}, make_w(0.6, {1.0})).accepted);
}

TEST(Sequential, IncrementsMatchFlags) {
  const IsotropicGaussian g = IsotropicGaussian::standard(4);
  Kernel k(rwm(4, 0.8), StreamKey{2, 0});
  const Trajectory t = sequential_simulate(k, g, State(4, 0.5), 300);
  ASSERT_EQ(t.states.size(), 301u);
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < t.steps(); ++i) {
    const bool moved = t.states[i + 1] != t.states[i];
    EXPECT_EQ(moved, static_cast<bool>(t.accept_flags[i])) << "step " << i;
    if (t.accept_flags[i]) {
      ++accepted;
      const auto z = k.innovation(i).z;
      for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(t.states[i + 1][c], t.states[i][c] + z[c]);
    }
  }
  EXPECT_GT(accepted, 0u);
  EXPECT_LT(accepted, t.steps());
}

TEST(Sequential, Deterministic) {
  const IsotropicGaussian g = IsotropicGaussian::standard(6);
  const Trajectory a = sequential_simulate(rwm(6, 0.7), g, State(6, 0.1), 500, StreamKey{3, 0});
  const Trajectory b = sequential_simulate(rwm(6, 0.7), g, State(6, 0.1), 500, StreamKey{3, 0});
  EXPECT_TRUE(bit_identical(a, b));
  const Trajectory c = sequential_simulate(rwm(6, 0.7), g, State(6, 0.1), 500, StreamKey{4, 0});
  EXPECT_FALSE(bit_identical(a, c));
}

TEST(Sequential, ReplayReconstructsFromFlags) {
  const IsotropicGaussian g = IsotropicGaussian::standard(5);
  for (auto kind : {KernelKind::RWM, KernelKind::MwG}) {
    for (auto basis : {BasisMode::Standard, BasisMode::HaarPerSweep}) {
      if (kind == KernelKind::RWM && basis != BasisMode::Standard) continue;
      KernelSpec s = rwm(5, 0.9);
      s.kind = kind;
      s.basis = basis;
      Kernel k(s, StreamKey{5, 0});
      const Trajectory t = sequential_simulate(k, g, State(5, -0.4), 400);
      Kernel k2(s, StreamKey{5, 0});
      EXPECT_TRUE(bit_identical(replay_trajectory(k2, State(5, -0.4), t.accept_flags), t));
    }
  }
}

TEST(Sequential, SinkStreamsEveryTransition) {
  const IsotropicGaussian g = IsotropicGaussian::standard(2);
  Kernel k(rwm(2, 1.0), StreamKey{6, 0});
  std::vector<std::uint64_t> steps;
  const auto res = sequential_run(k, g, State(2, 0.0), 50,
                                  [&](std::uint64_t i, const State&, bool) { steps.push_back(i); });
  ASSERT_EQ(steps.size(), 50u);
  for (std::size_t i = 0; i < steps.size(); ++i) EXPECT_EQ(steps[i], i);
  EXPECT_EQ(res.evaluations, 51u);
}

TEST(Sequential, RejectsStartOutsideSupport) {
  struct HalfLine {
    std::size_t dim() const { return 1; }
    double log_density(std::span<const double> x) const { return x[0] > 0 ? -x[0] : kNegInf; }
  };
  Kernel k(rwm(1, 1.0), StreamKey{1, 0});
  EXPECT_THROW(sequential_simulate(k, HalfLine{}, State{-1.0}, 5), std::invalid_argument);
}

TEST(Sequential, StandardGaussianMoments) {
  const IsotropicGaussian g = IsotropicGaussian::standard(1);
  const TuningResult t = tune_step_size(rwm(1, 1.0), g, State{0.0}, StreamKey{7, 0}, 5000);
  Kernel k(t.spec, StreamKey{7, 0});
  RunningMoments rm(1, 10000);
  sequential_run(k, g, State{0.0}, 110000, rm.sink());
  EXPECT_EQ(rm.count(), 100000u);
  EXPECT_NEAR(rm.mean()[0], 0.0, 0.05);
  EXPECT_NEAR(rm.sd()[0] * rm.sd()[0], 1.0, 0.05);
}

TEST(RunningMoments, MatchesTwoPassFormula) {
  const std::vector<std::vector<double>> xs{{1, 10}, {2, 20}, {4, 0}, {8, -5}, {3, 3}};
  RunningMoments rm(2, 1);  // skips indices 0 and 1
  for (std::size_t i = 0; i < xs.size(); ++i) rm.observe(i, xs[i]);
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0;
    for (std::size_t i = 2; i < xs.size(); ++i) m += xs[i][c];
    m /= 3;
    double v = 0;
    for (std::size_t i = 2; i < xs.size(); ++i) v += (xs[i][c] - m) * (xs[i][c] - m);
    v /= 2;
    EXPECT_NEAR(rm.mean()[c], m, 1e-12);
    EXPECT_NEAR(rm.sd()[c], std::sqrt(v), 1e-12);
  }
}

TEST(Trajectory, BitIdenticalSeesSignedZero) {
  Trajectory a(State{0.0}), b(State{-0.0});
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(bit_identical(a, b));
}

TEST(Trajectory, CsvLayout) {
  Trajectory t(State{0.0, 1.0});
  t.append(State{0.5, 1.0}, true);
  t.append(State{0.5, 1.0}, false);
  std::ostringstream out;
  write_trajectory_csv(out, t);
  EXPECT_EQ(out.str(), "step,accepted,x_0,x_1\n0,0,0,1\n1,1,0.5,1\n2,0,0.5,1\n");
  std::ostringstream sub;
  write_trajectory_csv(sub, t, 2);
  EXPECT_EQ(sub.str(), "step,accepted,x_0,x_1\n0,0,0,1\n2,0,0.5,1\n");
}

TEST(Io, DoubleRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(parse_double(" 2.5\r"), 2.5);
  EXPECT_THROW(parse_double("2.5x"), std::invalid_argument);
  EXPECT_THROW(parse_double(""), std::invalid_argument);
}

TEST(Io, NumericCsvRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "picard_io_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "m.csv";
  write_numeric_csv(file, {1, 2, 3, 4.5, 5, 6}, 3);
  const auto rows = read_numeric_csv(file);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1], (std::vector<double>{4.5, 5, 6}));
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "1,2\n3\n";
  }
  EXPECT_THROW(read_numeric_csv(dir / "bad.csv"), std::runtime_error);
  std::filesystem::remove_all(dir);
}
