#ifndef PICARD_TARGETS_SIR_HPP
#define PICARD_TARGETS_SIR_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "picard/rng.hpp"
#include "picard/target.hpp"

namespace picard {

/// Gamma(shape nu, rate lambda) priors on beta and gamma.
struct SirPriors {
  double nu_beta = 1.0;
  double lambda_beta = 0.001;
  double nu_gamma = 1.0;
  double lambda_gamma = 0.001;
};

/// A completed epidemic: per ever-infected individual, the latent infection
/// time and the observed removal time.
struct SirData {
  std::size_t M = 0;
  std::vector<double> removal;    // x°
  std::vector<double> infection;  // true latent x (may be empty for external data)
  double beta0 = 0.0;
  double gamma0 = 0.0;
  SirPriors priors;

  [[nodiscard]] std::size_t d() const { return removal.size(); }
};

/// Event-driven simulation of the Markov SIR model from a single infected
/// individual at time 0 until no one is infected.
inline SirData sir_forward_simulate(std::size_t M, double beta0, double gamma0, const StreamKey& key) {
  if (M < 2) throw std::invalid_argument("sir_forward_simulate: M must be at least 2");
  if (beta0 < 0.0 || !(gamma0 > 0.0)) throw std::invalid_argument("sir_forward_simulate: invalid rates");
  CounterEngine eng(key.with_stream(streams::data), 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SirData data;
  data.M = M;
  data.beta0 = beta0;
  data.gamma0 = gamma0;
  data.infection.push_back(0.0);
  data.removal.push_back(0.0);
  std::vector<std::size_t> infected{0};
  std::size_t susceptible = M - 1;
  double t = 0.0;
  while (!infected.empty()) {
    const double infect_rate = beta0 * static_cast<double>(susceptible) * static_cast<double>(infected.size());
    const double remove_rate = gamma0 * static_cast<double>(infected.size());
    const double total = infect_rate + remove_rate;
    t += std::exponential_distribution<double>(total)(eng);
    if (unif(eng) * total < infect_rate) {
      infected.push_back(data.infection.size());
      data.infection.push_back(t);
      data.removal.push_back(0.0);
      --susceptible;
    } else {
      const auto pick = std::min(infected.size() - 1, static_cast<std::size_t>(unif(eng) * static_cast<double>(infected.size())));
      data.removal[infected[pick]] = t;
      infected.erase(infected.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  return data;
}

/// Infectious pressure A(x, x°) from the double sum, O(d^2).
inline double sir_pressure_naive(std::span<const double> x, std::span<const double> xo, std::size_t M) {
  const std::size_t d = x.size();
  for (std::size_t i = 0; i < d; ++i)
    if (x[i] > xo[i]) return kNegInf;
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double inner = static_cast<double>(M - d) * (xo[j] - x[j]);
    for (std::size_t i = 0; i < d; ++i) inner += std::min(xo[j], x[i]) - std::min(x[j], x[i]);
    total += inner;
  }
  return total;
}

namespace detail {

/// sum_j sum_i min(a_j, b_i) with b sorted and prefix-summed.
inline double sum_of_mins(std::span<const double> a, const std::vector<double>& b_sorted,
                          const std::vector<double>& b_prefix) {
  double total = 0.0;
  const auto n = b_sorted.size();
  for (double aj : a) {
    const auto below = static_cast<std::size_t>(std::lower_bound(b_sorted.begin(), b_sorted.end(), aj) - b_sorted.begin());
    total += b_prefix[below] + aj * static_cast<double>(n - below);
  }
  return total;
}

}  // namespace detail

/// Infectious pressure A(x, x°) by sorting, O(d log d). Returns -inf when
/// some x_i > x°_i.
inline double sir_pressure(std::span<const double> x, std::span<const double> xo, std::size_t M) {
  const std::size_t d = x.size();
  double duration = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    if (x[i] > xo[i]) return kNegInf;
    duration += xo[i] - x[i];
  }
  std::vector<double> xs(x.begin(), x.end());
  std::sort(xs.begin(), xs.end());
  std::vector<double> prefix(d + 1, 0.0);
  for (std::size_t i = 0; i < d; ++i) prefix[i + 1] = prefix[i] + xs[i];
  return static_cast<double>(M - d) * duration + detail::sum_of_mins(xo, xs, prefix) -
         detail::sum_of_mins(x, xs, prefix);
}

/// Number infected just before each infection time, I_{x_i-}:
/// #{j : x_j < x_i < x°_j}. A removal tied with an infection counts as
/// happening first.
inline std::vector<std::size_t> sir_infectious_before(std::span<const double> x, std::span<const double> xo) {
  const std::size_t d = x.size();
  std::vector<double> xs(x.begin(), x.end());
  std::vector<double> rs(xo.begin(), xo.end());
  std::sort(xs.begin(), xs.end());
  std::sort(rs.begin(), rs.end());
  std::vector<std::size_t> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double t = x[i];
    const auto infected_before = std::lower_bound(xs.begin(), xs.end(), t) - xs.begin();
    const auto removed_by = std::upper_bound(rs.begin(), rs.end(), t) - rs.begin();
    // {x°_j <= t} also contains j with x_j = x°_j = t, which were never in {x_j < t}
    std::ptrdiff_t zero_length_at_t = 0;
    if (std::binary_search(xs.begin(), xs.end(), t))
      for (std::size_t j = 0; j < d; ++j) zero_length_at_t += (x[j] == t && xo[j] == t) ? 1 : 0;
    out[i] = static_cast<std::size_t>(infected_before - removed_by + zero_length_at_t);
  }
  return out;
}

/// Log of the marginal posterior of the infection times, beta and gamma
/// integrated out. -inf off the support.
inline double sir_log_posterior(std::span<const double> x, const SirData& data) {
  const std::size_t d = x.size();
  const auto& xo = data.removal;
  double duration = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    if (!(x[i] <= xo[i])) return kNegInf;
    duration += xo[i] - x[i];
  }
  const auto first = static_cast<std::size_t>(std::min_element(x.begin(), x.end()) - x.begin());
  const auto infectious = sir_infectious_before(x, xo);
  double lp = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    if (i == first) continue;
    if (infectious[i] == 0) return kNegInf;
    lp += std::log(static_cast<double>(infectious[i]));
  }
  const double pressure = sir_pressure(x, xo, data.M);
  const auto& p = data.priors;
  const double dd = static_cast<double>(d);
  lp -= (dd + p.nu_beta - 1.0) * std::log(p.lambda_beta + pressure);
  lp -= (dd + p.nu_gamma) * std::log(p.lambda_gamma + duration);
  return lp;
}

class SirPosterior final : public TargetImpl {
 public:
  explicit SirPosterior(SirData data) : data_(std::move(data)) {}
  [[nodiscard]] std::size_t dim() const override { return data_.d(); }
  [[nodiscard]] double log_density(std::span<const double> x) const override { return sir_log_posterior(x, data_); }
  [[nodiscard]] std::string name() const override { return "sir"; }
  [[nodiscard]] const SirData& data() const { return data_; }

 private:
  SirData data_;
};

struct SirRates {
  double gamma = 0.0;
  double beta = 0.0;
};

/// Draws (gamma, beta) from their Gamma full conditionals given x.
inline SirRates sir_conditional_sample(std::span<const double> x, const SirData& data, const StreamKey& key,
                                       std::uint64_t index) {
  double duration = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) duration += data.removal[i] - x[i];
  const double pressure = sir_pressure(x, data.removal, data.M);
  const auto& p = data.priors;
  const double dd = static_cast<double>(x.size());
  const double shape_gamma = dd + p.nu_gamma;
  const double shape_beta = dd + p.nu_beta - 1.0;
  const double rate_gamma = p.lambda_gamma + duration;
  const double rate_beta = p.lambda_beta + pressure;
  if (!(shape_gamma > 0.0 && shape_beta > 0.0 && rate_gamma > 0.0 && rate_beta > 0.0))
    throw std::domain_error("sir_conditional_sample: invalid Gamma parameters");
  CounterEngine eng(key.with_stream(streams::conditional), index);
  SirRates r;
  r.gamma = std::gamma_distribution<double>(shape_gamma, 1.0 / rate_gamma)(eng);
  r.beta = std::gamma_distribution<double>(shape_beta, 1.0 / rate_beta)(eng);
  return r;
}

/// Start state x_i = x°_i - Exp(rate), redrawn until the posterior is positive.
inline std::vector<double> sir_initial_state(const SirData& data, const StreamKey& key, double rate = 0.05,
                                             int max_tries = 10000) {
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    CounterEngine eng(key.with_stream(streams::init), static_cast<std::uint64_t>(attempt));
    std::exponential_distribution<double> ex(rate);
    std::vector<double> x(data.d());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = data.removal[i] - ex(eng);
    if (std::isfinite(sir_log_posterior(x, data))) return x;
  }
  throw std::runtime_error("sir_initial_state: no admissible start found");
}

}  // namespace picard

#endif  // PICARD_TARGETS_SIR_HPP
