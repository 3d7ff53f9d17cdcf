#ifndef PICARD_ENGINE_HPP
#define PICARD_ENGINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "picard/chain.hpp"
#include "picard/kernels.hpp"
#include "picard/target.hpp"
#include "picard/worker_pool.hpp"

namespace picard {

/// Longest prefix on which the two flag vectors agree.
inline std::size_t agreement_prefix(const std::vector<bool>& old_flags, const std::vector<bool>& new_flags) {
  if (old_flags.size() != new_flags.size()) throw std::invalid_argument("agreement_prefix: length mismatch");
  std::size_t g = 0;
  while (g < old_flags.size() && old_flags[g] == new_flags[g]) ++g;
  return g;
}

/// Running mistake fractions A_l = #{s < l : flags differ} / l, l = 1..K.
inline std::vector<double> mistake_fractions(const std::vector<bool>& old_flags, const std::vector<bool>& new_flags) {
  if (old_flags.size() != new_flags.size()) throw std::invalid_argument("mistake_fractions: length mismatch");
  std::vector<double> a(old_flags.size());
  std::size_t wrong = 0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    wrong += old_flags[s] != new_flags[s] ? 1 : 0;
    a[s] = static_cast<double>(wrong) / static_cast<double>(s + 1);
  }
  return a;
}

/// Largest i in [1, K] with A_l <= r for every l <= i; 0 if there is none.
inline std::size_t approximate_prefix(const std::vector<bool>& old_flags, const std::vector<bool>& new_flags,
                                      double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("approximate_prefix: r must lie in [0, 1]");
  const auto a = mistake_fractions(old_flags, new_flags);
  std::size_t g = 0;
  while (g < a.size() && a[g] <= r) ++g;
  return g;
}

/// Steps of a round known to match the sequential chain. States 0..g agree
/// with the previous round, g = agreement_prefix, so they are fixed points;
/// step g was then evaluated at a fixed point too and is final as well.
inline std::size_t certified_prefix(const std::vector<bool>& old_flags, const std::vector<bool>& new_flags) {
  return std::min(old_flags.size(), agreement_prefix(old_flags, new_flags) + 1);
}

/// How a round decides how many steps to commit.
///  - Certified: flags agree with the previous round (exact, implementable).
///  - Approximate: running mistake fraction stays within r (never less than
///    the certified prefix).
///  - Reference: flags agree with a known sequential run. Needs the answer in
///    advance; used to measure the exact prefix L^(j) of each iterate.
struct PrefixPolicy {
  enum class Rule { Certified, Approximate, Reference };
  Rule rule = Rule::Certified;
  double r = 0.0;
  const std::vector<bool>* reference = nullptr;

  static PrefixPolicy certified() { return {}; }
  static PrefixPolicy approximate(double r) { return {Rule::Approximate, r, nullptr}; }
  static PrefixPolicy oracle(const std::vector<bool>& reference_flags) { return {Rule::Reference, 0.0, &reference_flags}; }

  [[nodiscard]] bool exact() const { return rule != Rule::Approximate || r == 0.0; }
};

/// Window of the online algorithm: K+1 states and the K innovations that
/// follow x_bar[0], which sits at global step L.
struct PicardBlockState {
  std::vector<State> x_bar;
  std::vector<Innovation> w_bar;
  std::vector<bool> flags_prev;
  std::vector<double> log_density;  // cache per x_bar entry, NaN if unknown
  std::uint64_t L = 0;
  std::uint64_t J = 0;
  std::uint64_t global_index = 0;

  [[nodiscard]] std::size_t K() const { return w_bar.size(); }
};

/// Constant window at x0 with innovations L..L+K-1.
inline PicardBlockState make_block_state(const Kernel& kernel, const State& x0, double lp_x0, std::size_t K,
                                         std::uint64_t L = 0) {
  if (K == 0) throw std::invalid_argument("make_block_state: K must be positive");
  PicardBlockState s;
  s.x_bar.assign(K + 1, x0);
  s.w_bar.reserve(K);
  for (std::size_t i = 0; i < K; ++i) s.w_bar.push_back(kernel.innovation(L + i));
  s.flags_prev.assign(K, false);
  s.log_density.assign(K + 1, lp_x0);
  s.L = L;
  s.global_index = L;
  return s;
}

struct MapResult {
  std::vector<State> new_states;  // K+1
  std::vector<bool> new_flags;    // K
  std::vector<double> log_density;  // cache for new_states, NaN if unknown
};

namespace detail {

inline bool same_bits(const State& a, const State& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace detail

/// One application of the Picard map: K independent evaluations of f on the
/// pool, then left-to-right prefix sums from x_bar[0].
template <LogDensity T>
MapResult picard_map(const std::vector<State>& x_bar, const std::vector<Innovation>& w_bar, const Kernel& kernel,
                     const T& target, WorkerPool& pool, const std::vector<double>* log_density = nullptr) {
  const std::size_t K = w_bar.size();
  if (K == 0 || x_bar.size() != K + 1) throw std::invalid_argument("picard_map: window needs K+1 states, K >= 1");
  std::vector<StepResult> steps(K);
  pool.parallel_for(K, [&](std::size_t i) {
    const double lp = log_density ? (*log_density)[i] : detail::kUnknown;
    steps[i] = kernel.step(target, x_bar[i], w_bar[i], lp);
  });

  MapResult out;
  out.new_states.resize(K + 1);
  out.new_flags.resize(K);
  out.log_density.assign(K + 1, detail::kUnknown);
  out.new_states[0] = x_bar[0];
  out.log_density[0] = steps[0].log_density_current;
  bool head_same = true;  // new_states[i] == x_bar[i]
  for (std::size_t i = 0; i < K; ++i) {
    out.new_states[i + 1] = out.new_states[i];
    apply_step(out.new_states[i + 1], steps[i]);
    out.new_flags[i] = steps[i].accepted;
    double lp = steps[i].accepted ? (head_same ? steps[i].log_density_proposal : detail::kUnknown)
                                  : out.log_density[i];
    head_same = detail::same_bits(out.new_states[i + 1], x_bar[i + 1]);
    if (head_same) {
      if (i + 1 < K) {
        lp = steps[i + 1].log_density_current;
      } else if (log_density) {
        lp = (*log_density)[K];
      }
    }
    out.log_density[i + 1] = lp;
  }
  return out;
}

struct RoundOutcome {
  std::size_t G = 0;
  std::vector<bool> new_flags;
};

/// One round of the online algorithm: map, choose G, commit new_states[0..G]
/// (transitions with global index < commit_limit go to the sink), shift the
/// window left by G and extend it with the last computed state.
template <LogDensity T>
RoundOutcome online_picard_step(PicardBlockState& state, Kernel& kernel, const T& target, const PrefixPolicy& policy,
                                WorkerPool& pool, std::uint64_t commit_limit = std::numeric_limits<std::uint64_t>::max(),
                                const CommitSink& sink = {}, MapResult* map_out = nullptr) {
  const std::size_t K = state.K();
  kernel.prepare(state.L, state.L + K - 1);
  MapResult m = picard_map(state.x_bar, state.w_bar, kernel, target, pool, &state.log_density);

  std::size_t G = 0;
  switch (policy.rule) {
    case PrefixPolicy::Rule::Certified: G = certified_prefix(state.flags_prev, m.new_flags); break;
    case PrefixPolicy::Rule::Approximate:
      G = std::max(certified_prefix(state.flags_prev, m.new_flags),
                   approximate_prefix(state.flags_prev, m.new_flags, policy.r));
      break;
    case PrefixPolicy::Rule::Reference: {
      const auto& ref = *policy.reference;
      while (G < K && (state.L + G >= ref.size() || ref[state.L + G] == m.new_flags[G])) ++G;
      break;
    }
  }

  if (sink)
    for (std::size_t i = 0; i < G && state.L + i < commit_limit; ++i) sink(state.L + i, m.new_states[i + 1], m.new_flags[i]);

  const std::size_t keep = K - G;
  for (std::size_t i = 0; i <= K; ++i) {
    const std::size_t src = std::min(G + i, K);
    state.x_bar[i] = m.new_states[src];
    state.log_density[i] = m.log_density[src];
  }
  std::rotate(state.w_bar.begin(), state.w_bar.begin() + static_cast<std::ptrdiff_t>(G), state.w_bar.end());
  for (std::size_t i = 0; i < K; ++i) state.flags_prev[i] = i < keep ? m.new_flags[G + i] : false;
  state.L += G;
  state.J += 1;
  state.global_index = state.L;
  for (std::size_t i = keep; i < K; ++i) state.w_bar[i] = kernel.innovation(state.L + i);

  RoundOutcome out{G, std::move(m.new_flags)};
  if (map_out) *map_out = std::move(m);
  return out;
}

/// Per-run accounting.
struct RunRecord {
  std::uint64_t N = 0;
  std::size_t K = 0;
  std::uint64_t J = 0;
  std::uint64_t L = 0;
  std::vector<std::size_t> G_history;
  std::uint64_t evaluations = 0;  // J * K calls of f
  std::uint64_t accepted = 0;     // among the first N committed transitions

  [[nodiscard]] double acceptance_rate() const { return N ? static_cast<double>(accepted) / static_cast<double>(N) : 0.0; }
};

struct RunResult {
  State x_final;
  RunRecord record;
};

/// Online Picard: rounds until L >= N. Returns X_N; committed transitions
/// 0..N-1 are streamed to `sink`.
template <LogDensity T>
RunResult online_picard_run(Kernel& kernel, const T& target, const State& x0, std::uint64_t N, std::size_t K,
                            const PrefixPolicy& policy, WorkerPool& pool, const CommitSink& sink = {}) {
  if (K == 0 || N == 0) throw std::invalid_argument("online_picard_run: K and N must be positive");
  if (x0.size() != kernel.spec().d || target.dim() != x0.size())
    throw std::invalid_argument("online_picard_run: dimension mismatch");
  if (!kernel.spec().is_metropolis()) throw std::invalid_argument("online_picard_run: needs a Metropolis kernel");
  if (policy.rule == PrefixPolicy::Rule::Reference && policy.reference == nullptr)
    throw std::invalid_argument("online_picard_run: reference flags missing");
  const double lp0 = target.log_density(x0);
  if (!(lp0 > kNegInf)) throw std::invalid_argument("online_picard_run: initial state has zero posterior density");

  PicardBlockState state = make_block_state(kernel, x0, lp0, K);
  RunResult res;
  res.record.N = N;
  res.record.K = K;
  const CommitSink counting = [&](std::uint64_t step, const State& next, bool accepted) {
    res.record.accepted += accepted ? 1 : 0;
    if (sink) sink(step, next, accepted);
  };
  MapResult last;
  std::uint64_t L_before = 0;
  while (state.L < N) {
    L_before = state.L;
    const RoundOutcome r = online_picard_step(state, kernel, target, policy, pool, N, counting, &last);
    res.record.G_history.push_back(r.G);
  }
  res.x_final = last.new_states[N - L_before];
  res.record.J = state.J;
  res.record.L = state.L;
  res.record.evaluations = state.J * K;
  return res;
}

/// Block-sequential Picard: iterate the map on a window of K steps until the
/// whole window is at its fixed point, then move to the next block.
template <LogDensity T>
RunResult classic_picard_run(Kernel& kernel, const T& target, const State& x0, std::uint64_t N, std::size_t K,
                             WorkerPool& pool, const CommitSink& sink = {}) {
  if (K == 0 || N == 0) throw std::invalid_argument("classic_picard_run: K and N must be positive");
  if (x0.size() != kernel.spec().d || target.dim() != x0.size())
    throw std::invalid_argument("classic_picard_run: dimension mismatch");
  if (!kernel.spec().is_metropolis()) throw std::invalid_argument("classic_picard_run: needs a Metropolis kernel");
  const double lp0 = target.log_density(x0);
  if (!(lp0 > kNegInf)) throw std::invalid_argument("classic_picard_run: initial state has zero posterior density");

  RunResult res;
  res.record.N = N;
  res.record.K = K;
  PicardBlockState state = make_block_state(kernel, x0, lp0, K);
  while (state.L < N) {
    kernel.prepare(state.L, state.L + K - 1);
    MapResult m = picard_map(state.x_bar, state.w_bar, kernel, target, pool, &state.log_density);
    ++state.J;
    const std::size_t g = certified_prefix(state.flags_prev, m.new_flags);
    if (g < K) {
      state.x_bar = std::move(m.new_states);
      state.log_density = std::move(m.log_density);
      state.flags_prev = std::move(m.new_flags);
      res.record.G_history.push_back(0);
      continue;
    }
    for (std::size_t i = 0; i < K && state.L + i < N; ++i) {
      res.record.accepted += m.new_flags[i] ? 1 : 0;
      if (sink) sink(state.L + i, m.new_states[i + 1], m.new_flags[i]);
    }
    if (state.L + K >= N) res.x_final = m.new_states[N - state.L];
    res.record.G_history.push_back(K);
    state = make_block_state(kernel, m.new_states[K], m.log_density[K], K, state.L + K);
    state.J = res.record.G_history.size();
    if (std::isnan(state.log_density[0])) state.log_density.assign(K + 1, target.log_density(state.x_bar[0]));
  }
  res.record.J = state.J;
  res.record.L = state.L;
  res.record.evaluations = state.J * K;
  return res;
}

/// Runs the online algorithm and keeps the committed trajectory X_0..X_N.
template <LogDensity T>
std::pair<Trajectory, RunRecord> online_picard_trajectory(Kernel& kernel, const T& target, const State& x0,
                                                          std::uint64_t N, std::size_t K, const PrefixPolicy& policy,
                                                          WorkerPool& pool) {
  Trajectory traj(x0);
  traj.states.reserve(N + 1);
  auto res = online_picard_run(kernel, target, x0, N, K, policy, pool, traj.sink());
  return {std::move(traj), std::move(res.record)};
}

/// rounds.csv rows for one run: `round,G,L,evals_cumulative`.
inline void write_rounds_rows(std::ostream& out, const RunRecord& rec) {
  std::uint64_t L = 0;
  for (std::size_t j = 0; j < rec.G_history.size(); ++j) {
    L += rec.G_history[j];
    out << (j + 1) << ',' << rec.G_history[j] << ',' << L << ',' << (j + 1) * rec.K << '\n';
  }
}

}  // namespace picard

#endif  // PICARD_ENGINE_HPP
