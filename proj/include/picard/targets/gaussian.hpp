#ifndef PICARD_TARGETS_GAUSSIAN_HPP
#define PICARD_TARGETS_GAUSSIAN_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "picard/target.hpp"

namespace picard {

/// log N(x; mu, sigma2 I) without the normalizing constant.
inline double gaussian_log_density(std::span<const double> mu, double sigma2, std::span<const double> x) {
  double sq = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = x[k] - mu[k];
    sq += r * r;
  }
  return -sq / (2.0 * sigma2);
}

/// Isotropic Gaussian, V(x) = |x - mu|^2 / (2 sigma2).
class IsotropicGaussian final : public TargetImpl {
 public:
  IsotropicGaussian(std::vector<double> mu, double sigma2) : mu_(std::move(mu)), sigma2_(sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("IsotropicGaussian: sigma2 must be positive");
  }

  static IsotropicGaussian standard(std::size_t d) { return {std::vector<double>(d, 0.0), 1.0}; }

  [[nodiscard]] std::size_t dim() const override { return mu_.size(); }
  [[nodiscard]] double log_density(std::span<const double> x) const override {
    return gaussian_log_density(mu_, sigma2_, x);
  }
  [[nodiscard]] bool has_gradient() const override { return true; }
  void grad_log_density(std::span<const double> x, std::span<double> out) const override {
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = -(x[k] - mu_[k]) / sigma2_;
  }
  [[nodiscard]] std::optional<Moments> moments() const override {
    return Moments{mu_, std::vector<double>(mu_.size(), std::sqrt(sigma2_))};
  }
  [[nodiscard]] std::string name() const override { return "gaussian"; }

  [[nodiscard]] const std::vector<double>& mu() const { return mu_; }
  [[nodiscard]] double sigma2() const { return sigma2_; }

 private:
  std::vector<double> mu_;
  double sigma2_;
};

}  // namespace picard

#endif  // PICARD_TARGETS_GAUSSIAN_HPP
