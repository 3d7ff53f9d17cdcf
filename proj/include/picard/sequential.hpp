#ifndef PICARD_SEQUENTIAL_HPP
#define PICARD_SEQUENTIAL_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "picard/chain.hpp"
#include "picard/kernels.hpp"
#include "picard/target.hpp"

namespace picard {

struct SequentialResult {
  State x_final;
  std::uint64_t steps = 0;
  std::uint64_t accepted = 0;
  std::uint64_t evaluations = 0;  // target evaluations, including the one at x0
};

/// Runs the chain X_{i+1} = X_i + f(X_i, W_i) for N steps, streaming each
/// transition to `sink`. One fresh target evaluation per step (a gradient
/// for ULA, which ignores the cached log-density).
template <LogDensity T>
SequentialResult sequential_run(Kernel& kernel, const T& target, State x0, std::uint64_t N,
                                const CommitSink& sink = {}) {
  if (x0.size() != kernel.spec().d || target.dim() != x0.size())
    throw std::invalid_argument("sequential_run: dimension mismatch");
  double lp = target.log_density(x0);
  if (!(lp > kNegInf)) throw std::invalid_argument("sequential_run: initial state has zero posterior density");
  SequentialResult res;
  res.evaluations = 1;
  for (std::uint64_t i = 0; i < N; ++i) {
    kernel.prepare(i, i);
    const Innovation w = kernel.innovation(i);
    const StepResult s = kernel.step(target, x0, w, lp);
    ++res.evaluations;
    if (s.accepted) lp = s.log_density_proposal;
    apply_step(x0, s);
    res.accepted += s.accepted ? 1 : 0;
    if (sink) sink(i, x0, s.accepted);
  }
  res.steps = N;
  res.x_final = std::move(x0);
  return res;
}

/// Full trajectory of the sequential chain: the reference every parallel run
/// is compared against.
template <LogDensity T>
Trajectory sequential_simulate(Kernel& kernel, const T& target, const State& x0, std::uint64_t N) {
  Trajectory traj(x0);
  traj.states.reserve(N + 1);
  traj.accept_flags.reserve(N);
  sequential_run(kernel, target, x0, N, traj.sink());
  return traj;
}

template <LogDensity T>
Trajectory sequential_simulate(const KernelSpec& spec, const T& target, const State& x0, std::uint64_t N,
                               const StreamKey& key) {
  Kernel kernel(spec, key);
  return sequential_simulate(kernel, target, x0, N);
}

/// Rebuilds a trajectory from x0 and its accept flags alone, without any
/// target evaluation.
inline Trajectory replay_trajectory(Kernel& kernel, const State& x0, const std::vector<bool>& flags) {
  Trajectory traj(x0);
  State x = x0;
  for (std::uint64_t i = 0; i < flags.size(); ++i) {
    StepResult s;
    s.accepted = flags[i];
    if (s.accepted) {
      kernel.prepare(i, i);
      s.increment = kernel.proposal_increment(kernel.innovation(i));
    }
    apply_step(x, s);
    traj.append(x, flags[i]);
  }
  return traj;
}

}  // namespace picard

#endif  // PICARD_SEQUENTIAL_HPP
