#ifndef PICARD_TARGETS_REGRESSION_HPP
#define PICARD_TARGETS_REGRESSION_HPP

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "picard/rng.hpp"
#include "picard/target.hpp"

namespace picard {

enum class RegressionModel { Linear, Logistic, Poisson };

inline std::string to_string(RegressionModel m) {
  switch (m) {
    case RegressionModel::Linear: return "linear";
    case RegressionModel::Logistic: return "logistic";
    case RegressionModel::Poisson: return "poisson";
  }
  return "?";
}

/// Covariates (row-major n x d), responses, and the parameter that generated them.
struct RegressionData {
  RegressionModel model = RegressionModel::Linear;
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> A;
  std::vector<double> y;
  std::vector<double> x_true;
  double sigma2 = 1.0;

  [[nodiscard]] std::span<const double> row(std::size_t i) const { return {A.data() + i * d, d}; }
};

/// Rows per parameter: 5 for linear, 10 for logistic and Poisson.
inline std::size_t rows_per_dim(RegressionModel m) { return m == RegressionModel::Linear ? 5 : 10; }

/// log(1 + e^t) without overflow.
inline double log1p_exp(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

/// Simulated data set: A_i ~ N(0, I/d), x ~ N(0, I), y from the model's likelihood.
inline RegressionData generate_regression_data(RegressionModel model, std::size_t d, const StreamKey& key) {
  if (d == 0) throw std::invalid_argument("generate_regression_data: d must be positive");
  const StreamKey k = key.with_stream(streams::data);
  RegressionData data;
  data.model = model;
  data.d = d;
  data.n = rows_per_dim(model) * d;
  data.x_true.resize(d);
  gaussian_lanes(k, 0, 0, data.x_true);
  data.A.resize(data.n * d);
  data.y.resize(data.n);
  const double row_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < data.n; ++i) {
    std::span<double> a(data.A.data() + i * d, d);
    gaussian_lanes(k, 1 + i, 0, a);
    for (double& v : a) v *= row_scale;
    double eta = 0.0;
    for (std::size_t j = 0; j < d; ++j) eta += a[j] * data.x_true[j];
    const std::uint64_t cell = 1 + data.n + i;
    switch (model) {
      case RegressionModel::Linear: {
        double noise = 0.0;
        gaussian_lanes(k, cell, 0, std::span<double>(&noise, 1));
        data.y[i] = eta + std::sqrt(data.sigma2) * noise;
        break;
      }
      case RegressionModel::Logistic: {
        const double u = unit_closed_open(philox_block(k, cell, 0)[0]);
        data.y[i] = u < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
        break;
      }
      case RegressionModel::Poisson: {
        CounterEngine eng(k, cell);
        std::poisson_distribution<long> pois(std::exp(eta));
        data.y[i] = static_cast<double>(pois(eng));
        break;
      }
    }
  }
  return data;
}

/// Log-likelihood plus standard Gaussian log-prior, constants dropped.
/// Straightforward O(n d) evaluation; RegressionPosterior is the fast path.
inline double regression_log_posterior(const RegressionData& data, std::span<const double> x) {
  double lp = 0.0;
  for (double v : x) lp -= 0.5 * v * v;
  for (std::size_t i = 0; i < data.n; ++i) {
    const auto a = data.row(i);
    double eta = 0.0;
    for (std::size_t j = 0; j < data.d; ++j) eta += a[j] * x[j];
    const double yi = data.y[i];
    switch (data.model) {
      case RegressionModel::Linear: lp -= 0.5 * (yi - eta) * (yi - eta) / data.sigma2; break;
      case RegressionModel::Logistic: lp += yi * eta - log1p_exp(eta); break;
      case RegressionModel::Poisson: lp += yi * eta - std::exp(eta); break;
    }
  }
  return lp;
}

/// Posterior target for E1-E3. The linear model is evaluated through the
/// Gram matrix, costing O(d^2) instead of O(n d).
class RegressionPosterior final : public TargetImpl {
 public:
  explicit RegressionPosterior(RegressionData data) : data_(std::move(data)) {
    if (data_.model == RegressionModel::Linear) {
      const std::size_t d = data_.d;
      gram_.assign(d * d, 0.0);
      aty_.assign(d, 0.0);
      for (std::size_t i = 0; i < data_.n; ++i) {
        const auto a = data_.row(i);
        for (std::size_t p = 0; p < d; ++p) {
          aty_[p] += a[p] * data_.y[i];
          for (std::size_t q = 0; q < d; ++q) gram_[p * d + q] += a[p] * a[q];
        }
        yty_ += data_.y[i] * data_.y[i];
      }
    }
  }

  [[nodiscard]] std::size_t dim() const override { return data_.d; }

  [[nodiscard]] double log_density(std::span<const double> x) const override {
    if (data_.model != RegressionModel::Linear) return regression_log_posterior(data_, x);
    const std::size_t d = data_.d;
    double quad = 0.0;
    double lin = 0.0;
    double prior = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
      const double* g = gram_.data() + p * d;
      double gx = 0.0;
      for (std::size_t q = 0; q < d; ++q) gx += g[q] * x[q];
      quad += x[p] * gx;
      lin += x[p] * aty_[p];
      prior += x[p] * x[p];
    }
    return -0.5 * (yty_ - 2.0 * lin + quad) / data_.sigma2 - 0.5 * prior;
  }

  [[nodiscard]] bool has_gradient() const override { return true; }

  void grad_log_density(std::span<const double> x, std::span<double> out) const override {
    for (std::size_t j = 0; j < data_.d; ++j) out[j] = -x[j];
    for (std::size_t i = 0; i < data_.n; ++i) {
      const auto a = data_.row(i);
      double eta = 0.0;
      for (std::size_t j = 0; j < data_.d; ++j) eta += a[j] * x[j];
      double resid = 0.0;
      switch (data_.model) {
        case RegressionModel::Linear: resid = (data_.y[i] - eta) / data_.sigma2; break;
        case RegressionModel::Logistic: resid = data_.y[i] - 1.0 / (1.0 + std::exp(-eta)); break;
        case RegressionModel::Poisson: resid = data_.y[i] - std::exp(eta); break;
      }
      for (std::size_t j = 0; j < data_.d; ++j) out[j] += resid * a[j];
    }
  }

  [[nodiscard]] std::optional<Moments> moments() const override;

  [[nodiscard]] std::string name() const override { return to_string(data_.model); }
  [[nodiscard]] const RegressionData& data() const { return data_; }

 private:
  RegressionData data_;
  std::vector<double> gram_;
  std::vector<double> aty_;
  double yty_ = 0.0;
};

/// Exact posterior moments of the conjugate linear model:
/// precision A'A/sigma2 + I, mean precision^{-1} A'y / sigma2.
inline Moments linear_posterior_moments(const RegressionData& data) {
  if (data.model != RegressionModel::Linear) throw std::invalid_argument("linear_posterior_moments: model is not linear");
  for (double v : data.A)
    if (!std::isfinite(v)) throw std::invalid_argument("linear_posterior_moments: non-finite covariate");
  for (double v : data.y)
    if (!std::isfinite(v)) throw std::invalid_argument("linear_posterior_moments: non-finite response");
  const auto d = static_cast<Eigen::Index>(data.d);
  const auto n = static_cast<Eigen::Index>(data.n);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(data.A.data(), n, d);
  Eigen::Map<const Eigen::VectorXd> y(data.y.data(), n);
  Eigen::MatrixXd precision = A.transpose() * A / data.sigma2;
  precision.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw std::runtime_error("linear_posterior_moments: factorization failed");
  const Eigen::VectorXd mean = llt.solve(A.transpose() * y / data.sigma2);
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
  Moments m;
  m.mean.assign(mean.data(), mean.data() + d);
  m.sd.resize(data.d);
  for (Eigen::Index j = 0; j < d; ++j) m.sd[static_cast<std::size_t>(j)] = std::sqrt(cov(j, j));
  return m;
}

inline std::optional<Moments> RegressionPosterior::moments() const {
  if (data_.model == RegressionModel::Linear) return linear_posterior_moments(data_);
  return std::nullopt;
}

/// Posterior mode by damped Newton iterations. The posterior is strictly
/// log-concave for all three models, so this converges from zero.
inline std::vector<double> regression_posterior_mode(const RegressionData& data, int max_iter = 100) {
  const auto d = static_cast<Eigen::Index>(data.d);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd grad = -x;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(d, d);
    for (std::size_t i = 0; i < data.n; ++i) {
      Eigen::Map<const Eigen::VectorXd> a(data.A.data() + i * data.d, d);
      const double eta = a.dot(x);
      double resid = 0.0;
      double w = 0.0;
      switch (data.model) {
        case RegressionModel::Linear:
          resid = (data.y[i] - eta) / data.sigma2;
          w = 1.0 / data.sigma2;
          break;
        case RegressionModel::Logistic: {
          const double p = 1.0 / (1.0 + std::exp(-eta));
          resid = data.y[i] - p;
          w = p * (1.0 - p);
          break;
        }
        case RegressionModel::Poisson: {
          const double mu = std::exp(eta);
          resid = data.y[i] - mu;
          w = mu;
          break;
        }
      }
      grad += resid * a;
      hess.noalias() += w * a * a.transpose();
    }
    const Eigen::VectorXd step = hess.llt().solve(grad);
    double t = 1.0;
    const std::vector<double> cur(x.data(), x.data() + d);
    const double f0 = regression_log_posterior(data, cur);
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::VectorXd cand = x + t * step;
      const std::vector<double> cv(cand.data(), cand.data() + d);
      if (regression_log_posterior(data, cv) >= f0) break;
      t *= 0.5;
    }
    x += t * step;
    if (step.norm() * t < 1e-12) break;
  }
  return {x.data(), x.data() + d};
}

}  // namespace picard

#endif  // PICARD_TARGETS_REGRESSION_HPP
