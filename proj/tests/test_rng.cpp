#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "picard/rng.hpp"

using namespace picard;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Kolmogorov-Smirnov distance of a sample from Uniform(0, 1).
double ks_uniform(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    dmax = std::max(dmax, static_cast<double>(i + 1) / n - v[i]);
    dmax = std::max(dmax, v[i] - static_cast<double>(i) / n);
  }
  return dmax;
}

}  // namespace

// Known-answer vectors published with Random123 for Philox4x32-10.
TEST(Philox, MatchesReferenceVectors) {
  auto b = philox_block(StreamKey{0, 0}, 0, 0);
  EXPECT_EQ(b[0], 0xe169c58d6627e8d5ULL);
  EXPECT_EQ(b[1], 0x9b00dbd8bc57ac4cULL);
  b = philox_block(StreamKey{~0ULL, 0xffffffffu}, ~0ULL, 0xffffffffu);
  EXPECT_EQ(b[0], 0x41c83b0e408f276dULL);
  EXPECT_EQ(b[1], 0x6d5451fda20bc7c6ULL);
  b = philox_block(StreamKey{0x299f31d0a4093822ULL, 0x03707344u}, 0x85a308d3243f6a88ULL, 0x13198a2eu);
  EXPECT_EQ(b[0], 0x94fdccebd16cfe09ULL);
  EXPECT_EQ(b[1], 0x24126ea15001e420ULL);
}

TEST(Uniforms, EndpointsAndRange) {
  EXPECT_EQ(unit_closed_open(0), 0.0);
  EXPECT_LT(unit_closed_open(~0ULL), 1.0);
  EXPECT_GT(unit_open_closed(0), 0.0);
  EXPECT_EQ(unit_open_closed(~0ULL), 1.0);
}

TEST(Innovation, SameIndexSameBits) {
  const StreamKey k{42, streams::innovation};
  const auto a = innovation_at(k, InnovationLaw::GaussianVector, 3, 0.5, 7);
  const auto b = innovation_at(k, InnovationLaw::GaussianVector, 3, 0.5, 7);
  EXPECT_EQ(std::memcmp(&a.u, &b.u, sizeof(double)), 0);
  EXPECT_TRUE(same_bits(a.z, b.z));
  EXPECT_EQ(a.step_index, 7u);
}

TEST(Innovation, NeighbouringIndicesDiffer) {
  const StreamKey k{42, streams::innovation};
  const auto a = innovation_at(k, InnovationLaw::GaussianVector, 3, 0.5, 7);
  const auto b = innovation_at(k, InnovationLaw::GaussianVector, 3, 0.5, 8);
  EXPECT_NE(a.u, b.u);
  EXPECT_FALSE(same_bits(a.z, b.z));
}

TEST(Innovation, StreamsAndSeedsAreSeparate) {
  const StreamKey k{42, streams::innovation};
  const auto base = innovation_at(k, InnovationLaw::GaussianVector, 4, 1.0, 3);
  EXPECT_FALSE(same_bits(base.z, innovation_at(k.with_stream(streams::tuning), InnovationLaw::GaussianVector, 4, 1.0, 3).z));
  EXPECT_FALSE(same_bits(base.z, innovation_at(StreamKey{43, 0}, InnovationLaw::GaussianVector, 4, 1.0, 3).z));
  EXPECT_FALSE(same_bits(base.z, innovation_at(k.fork(1), InnovationLaw::GaussianVector, 4, 1.0, 3).z));
  EXPECT_NE(k.fork(1), k.fork(2));
}

TEST(Innovation, OrderIndependent) {
  const StreamKey k{9, 0};
  std::vector<std::uint64_t> idx(200);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::vector<double>> forward(idx.size());
  for (auto i : idx) forward[i] = innovation_at(k, InnovationLaw::GaussianVector, 5, 1.0, i).z;
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(3));
  for (auto i : idx) EXPECT_TRUE(same_bits(forward[i], innovation_at(k, InnovationLaw::GaussianVector, 5, 1.0, i).z));
}

TEST(Innovation, UniformMeanAndSpread) {
  const StreamKey k{5, 0};
  const int n = 100000;
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) u[i] = innovation_at(k, InnovationLaw::GaussianScalar, 1, 1.0, i).u;
  const double mean = std::accumulate(u.begin(), u.end(), 0.0) / n;
  EXPECT_NEAR(mean, 0.5, 0.01);
  // 1% critical value of the one-sample KS statistic
  EXPECT_LT(ks_uniform(u), 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST(Innovation, GaussianVectorVariance) {
  const StreamKey k{6, 0};
  const std::size_t d = 4;
  const double scale = 0.3;
  const int n = 100000;
  std::vector<double> s1(d, 0.0), s2(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto w = innovation_at(k, InnovationLaw::GaussianVector, d, scale, i);
    for (std::size_t c = 0; c < d; ++c) {
      s1[c] += w.z[c];
      s2[c] += w.z[c] * w.z[c];
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    const double mean = s1[c] / n;
    const double var = s2[c] / n - mean * mean;
    EXPECT_NEAR(var / (scale * scale), 1.0, 0.02) << "coordinate " << c;
    EXPECT_NEAR(mean / scale, 0.0, 0.02);
  }
}

TEST(Innovation, SignedChiMagnitudeAndSign) {
  const StreamKey k{7, 0};
  const std::size_t d = 10;
  const double scale = 0.2;
  const int n = 100000;
  double sum_abs = 0.0;
  int positive = 0;
  for (int i = 0; i < n; ++i) {
    const auto w = innovation_at(k, InnovationLaw::SignedChi, d, scale, i);
    ASSERT_EQ(w.z.size(), 1u);
    sum_abs += std::abs(w.z[0]) / scale;
    positive += w.z[0] > 0 ? 1 : 0;
  }
  const double chi_mean = std::sqrt(2.0) * std::exp(std::lgamma((d + 1) / 2.0) - std::lgamma(d / 2.0));
  EXPECT_NEAR(sum_abs / n / chi_mean, 1.0, 0.02);
  EXPECT_NEAR(static_cast<double>(positive) / n, 0.5, 0.01);
}

TEST(GaussianLanes, MomentsOfStandardNormal) {
  const StreamKey k{8, streams::init};
  const int n = 50000;
  std::vector<double> buf(3);
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    gaussian_lanes(k, i, 0, buf);
    for (double v : buf) {
      s1 += v;
      s2 += v * v;
      s4 += v * v * v * v;
    }
  }
  const double m = 3.0 * n;
  EXPECT_NEAR(s1 / m, 0.0, 0.015);
  EXPECT_NEAR(s2 / m, 1.0, 0.02);
  EXPECT_NEAR(s4 / m, 3.0, 0.1);
}

TEST(CounterEngine, DrivesStandardDistributions) {
  CounterEngine a(StreamKey{1, 1}, 4), b(StreamKey{1, 1}, 4);
  std::gamma_distribution<double> ga(2.0, 1.0), gb(2.0, 1.0);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(ga(a), gb(b));
  CounterEngine c(StreamKey{1, 1}, 5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(c());
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(HaarBasis, OneDimensionIsSign) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Basis b = haar_basis(StreamKey{2, streams::basis}, s, 1);
    EXPECT_EQ(std::abs(b.rows[0]), 1.0);
  }
}

TEST(HaarBasis, Orthonormal) {
  for (std::size_t d : {2u, 5u, 17u, 64u}) {
    const Basis b = haar_basis(StreamKey{11, streams::basis}, 3, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += b.row(i)[k] * b.row(j)[k];
        EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-10) << "d=" << d << " i=" << i << " j=" << j;
      }
  }
}

TEST(HaarBasis, Reproducible) {
  const Basis a = haar_basis(StreamKey{11, streams::basis}, 9, 6);
  const Basis b = haar_basis(StreamKey{11, streams::basis}, 9, 6);
  EXPECT_TRUE(same_bits(a.rows, b.rows));
  EXPECT_FALSE(same_bits(a.rows, haar_basis(StreamKey{11, streams::basis}, 10, 6).rows));
}

TEST(HaarBasis, FirstVectorAngleUniformInTwoDimensions) {
  const int n = 10000;
  std::vector<double> t(n);
  for (int s = 0; s < n; ++s) {
    const Basis b = haar_basis(StreamKey{13, streams::basis}, s, 2);
    t[s] = (std::atan2(b.rows[1], b.rows[0]) + std::numbers::pi) / (2.0 * std::numbers::pi);
  }
  EXPECT_LT(ks_uniform(t), 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST(HaarBasis, SecondVectorBothOrientations) {
  // Haar on O(2) includes reflections: the second vector is +/- the rotation
  // of the first with equal frequency.
  const int n = 4000;
  int det_positive = 0;
  for (int s = 0; s < n; ++s) {
    const Basis b = haar_basis(StreamKey{14, streams::basis}, s, 2);
    const double det = b.rows[0] * b.rows[3] - b.rows[1] * b.rows[2];
    det_positive += det > 0 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(det_positive) / n, 0.5, 0.03);
}
