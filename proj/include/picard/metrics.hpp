#ifndef PICARD_METRICS_HPP
#define PICARD_METRICS_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "picard/chain.hpp"
#include "picard/engine.hpp"
#include "picard/kernels.hpp"
#include "picard/sequential.hpp"
#include "picard/target.hpp"
#include "picard/worker_pool.hpp"

namespace picard {

/// G_hat = L / J, steps committed per parallel round.
inline double speedup_metric(const RunRecord& rec) {
  if (rec.J == 0) throw std::invalid_argument("speedup_metric: no rounds recorded");
  return static_cast<double>(rec.L) / static_cast<double>(rec.J);
}

struct MomentErrors {
  double M = 0.0;  // standardized error of the means
  double E = 0.0;  // relative error of the standard deviations
};

inline MomentErrors moment_errors(const Moments& sample, const Moments& reference) {
  const std::size_t d = reference.mean.size();
  if (sample.mean.size() != d || sample.sd.size() != d || reference.sd.size() != d)
    throw std::invalid_argument("moment_errors: dimension mismatch");
  double m = 0.0;
  double e = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double s = reference.sd[i];
    if (!(s > 0.0)) throw std::invalid_argument("moment_errors: reference sd must be positive");
    const double dm = (sample.mean[i] - reference.mean[i]) / s;
    const double ds = (sample.sd[i] - s) / s;
    m += dm * dm;
    e += ds * ds;
  }
  return {std::sqrt(m / static_cast<double>(d)), std::sqrt(e / static_cast<double>(d))};
}

/// Moments of the states X_i, i > burn_in, of a stored trajectory.
inline MomentErrors moment_errors(const Trajectory& traj, std::uint64_t burn_in, const Moments& reference) {
  if (traj.states.size() <= burn_in + 1) throw std::invalid_argument("moment_errors: trajectory shorter than burn-in");
  RunningMoments rm(traj.d, burn_in);
  for (std::size_t i = 0; i < traj.states.size(); ++i) rm.observe(i, traj.states[i]);
  return moment_errors(rm.moments(), reference);
}

struct GuessPoint {
  std::size_t i = 0;
  double p_hat = 0.0;
  double se = 0.0;  // binomial standard error
};

/// Empirical probability that the j-th Picard iterate from a constant start
/// guesses the accept decision of step i wrongly:
/// P(f(X^(j)_i, W_i) != f(X_i, W_i)). `start(rep)` supplies X_0 for each
/// replication; replication rep uses the innovations of key.fork(rep).
template <LogDensity T>
std::vector<GuessPoint> incorrect_guess_probability(const KernelSpec& spec, const T& target,
                                                    const std::function<State(std::size_t)>& start,
                                                    const std::vector<std::size_t>& i_values, std::size_t j,
                                                    std::size_t reps, const StreamKey& key, WorkerPool& pool) {
  if (i_values.empty()) throw std::invalid_argument("incorrect_guess_probability: no positions");
  std::size_t K = 0;
  for (auto i : i_values) K = std::max(K, i + 1);
  std::vector<std::size_t> wrong(i_values.size(), 0);
  for (std::size_t rep = 0; rep < reps; ++rep) {
    Kernel kernel(spec, key.fork(rep));
    const State x0 = start(rep);
    const Trajectory truth = sequential_simulate(kernel, target, x0, K);
    kernel.prepare(0, K - 1);
    std::vector<Innovation> w;
    w.reserve(K);
    for (std::size_t s = 0; s < K; ++s) w.push_back(kernel.innovation(s));
    std::vector<State> x(K + 1, x0);
    MapResult m;
    // X^(j) after j applications; one more application exposes f(X^(j)_i, W_i)
    for (std::size_t it = 0; it <= j; ++it) {
      m = picard_map(x, w, kernel, target, pool);
      if (it < j) x = m.new_states;
    }
    for (std::size_t q = 0; q < i_values.size(); ++q)
      wrong[q] += m.new_flags[i_values[q]] != truth.accept_flags[i_values[q]] ? 1 : 0;
  }
  std::vector<GuessPoint> curve;
  for (std::size_t q = 0; q < i_values.size(); ++q) {
    const double p = static_cast<double>(wrong[q]) / static_cast<double>(reps);
    curve.push_back({i_values[q], p, std::sqrt(p * (1.0 - p) / static_cast<double>(reps))});
  }
  return curve;
}

/// L^(1): number of leading steps whose accept decision, evaluated at the
/// constant start x0, matches the sequential chain.
template <LogDensity T>
std::size_t first_iterate_prefix(Kernel& kernel, const T& target, const State& x0, std::size_t K, WorkerPool& pool) {
  const Trajectory truth = sequential_simulate(kernel, target, x0, K);
  kernel.prepare(0, K - 1);
  std::vector<Innovation> w;
  w.reserve(K);
  for (std::size_t s = 0; s < K; ++s) w.push_back(kernel.innovation(s));
  const MapResult m = picard_map(std::vector<State>(K + 1, x0), w, kernel, target, pool);
  return agreement_prefix(truth.accept_flags, m.new_flags);
}

/// Uniform point on the sphere of radius s around `center`.
inline State uniform_on_sphere(const State& center, double s, const StreamKey& key, std::uint64_t index) {
  State dir(center.size());
  gaussian_lanes(key.with_stream(streams::init), index, 0, dir);
  double norm = 0.0;
  for (double v : dir) norm += v * v;
  norm = std::sqrt(norm);
  State x(center.size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = center[k] + s * dir[k] / norm;
  return x;
}

}  // namespace picard

#endif  // PICARD_METRICS_HPP
