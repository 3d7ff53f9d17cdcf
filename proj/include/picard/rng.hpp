#ifndef PICARD_RNG_HPP
#define PICARD_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace picard {

/// Identifies an independent random stream. Draws are addressed by
/// (seed, stream_id, index, lane) and never depend on call order.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t stream_id = 0;

  /// Same seed, different stream.
  [[nodiscard]] constexpr StreamKey with_stream(std::uint32_t id) const noexcept { return {seed, id}; }

  /// Derives an unrelated key, e.g. one per replication.
  [[nodiscard]] StreamKey fork(std::uint64_t salt) const noexcept;

  friend constexpr bool operator==(const StreamKey&, const StreamKey&) = default;
};

namespace streams {
inline constexpr std::uint32_t innovation = 0;
inline constexpr std::uint32_t data = 1;
inline constexpr std::uint32_t basis = 2;
inline constexpr std::uint32_t tuning = 3;
inline constexpr std::uint32_t init = 4;
inline constexpr std::uint32_t conditional = 5;
}  // namespace streams

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline StreamKey StreamKey::fork(std::uint64_t salt) const noexcept {
  return {splitmix64(seed ^ splitmix64(salt + 0x632BE59BD9B4E019ULL)), stream_id};
}

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

inline constexpr void philox_round(std::array<std::uint32_t, 4>& ctr, const std::array<std::uint32_t, 2>& key) noexcept {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace detail

/// Philox4x32-10 evaluated at counter (index, lane, stream_id) under the seed.
/// Returns 128 bits as two 64-bit words.
inline constexpr std::array<std::uint64_t, 2> philox_block(const StreamKey& key, std::uint64_t index,
                                                           std::uint32_t lane) noexcept {
  std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), lane,
                                   key.stream_id};
  std::array<std::uint32_t, 2> k{static_cast<std::uint32_t>(key.seed), static_cast<std::uint32_t>(key.seed >> 32)};
  for (int round = 0; round < 10; ++round) {
    detail::philox_round(ctr, k);
    k[0] += detail::kPhiloxW0;
    k[1] += detail::kPhiloxW1;
  }
  return {(static_cast<std::uint64_t>(ctr[1]) << 32) | ctr[0], (static_cast<std::uint64_t>(ctr[3]) << 32) | ctr[2]};
}

/// Uniform on [0, 1) with 53 random bits.
inline constexpr double unit_closed_open(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1] with 53 random bits; safe to take the log of.
inline constexpr double unit_open_closed(std::uint64_t bits) noexcept {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

/// Standard normals for the given (key, index), starting at `first_lane`.
/// Lane `first_lane + p` holds normals 2p and 2p+1 (Box-Muller).
inline void gaussian_lanes(const StreamKey& key, std::uint64_t index, std::uint32_t first_lane, std::span<double> out) {
  const std::size_t n = out.size();
  for (std::size_t p = 0; 2 * p < n; ++p) {
    const auto bits = philox_block(key, index, first_lane + static_cast<std::uint32_t>(p));
    const double radius = std::sqrt(-2.0 * std::log(unit_open_closed(bits[0])));
    const double angle = 2.0 * std::numbers::pi * unit_closed_open(bits[1]);
    out[2 * p] = radius * std::cos(angle);
    if (2 * p + 1 < n) out[2 * p + 1] = radius * std::sin(angle);
  }
}

/// A UniformRandomBitGenerator over one (key, index) cell. Lets the standard
/// distributions (gamma, poisson, ...) be driven by counter-based bits.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  CounterEngine(StreamKey key, std::uint64_t index) noexcept : key_(key), index_(index) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (word_ == 2) {
      block_ = philox_block(key_, index_, lane_++);
      word_ = 0;
    }
    return block_[word_++];
  }

 private:
  StreamKey key_;
  std::uint64_t index_;
  std::uint32_t lane_ = 0;
  std::array<std::uint64_t, 2> block_{};
  int word_ = 2;
};

/// Distribution of the proposal innovation Z.
enum class InnovationLaw {
  GaussianVector,  // Z ~ N(0, scale^2 I_d)  (RWM, ULA)
  GaussianScalar,  // Z ~ N(0, scale^2)      (MwG, experiment default)
  SignedChi,       // Z = scale * (2P - 1) * S, P ~ Ber(1/2), S ~ chi(d)  (MwG, Haar analysis)
};

/// One W_i = (U_i, Z_i).
struct Innovation {
  double u = 0.0;
  std::vector<double> z;
  std::uint64_t step_index = 0;
};

/// The i-th innovation of a stream: a pure function of its arguments.
/// Lane 0 feeds U and the sign bit; lanes 1.. feed the Gaussians.
inline Innovation innovation_at(const StreamKey& key, InnovationLaw law, std::size_t d, double scale,
                                std::uint64_t index) {
  Innovation w;
  w.step_index = index;
  const auto head = philox_block(key, index, 0);
  w.u = unit_closed_open(head[0]);
  switch (law) {
    case InnovationLaw::GaussianVector: {
      w.z.resize(d);
      gaussian_lanes(key, index, 1, w.z);
      for (double& v : w.z) v *= scale;
      break;
    }
    case InnovationLaw::GaussianScalar: {
      w.z.resize(1);
      gaussian_lanes(key, index, 1, w.z);
      w.z[0] *= scale;
      break;
    }
    case InnovationLaw::SignedChi: {
      std::vector<double> g(d);
      gaussian_lanes(key, index, 1, g);
      double sq = 0.0;
      for (double v : g) sq += v * v;
      const double sign = (head[1] >> 63) != 0 ? 1.0 : -1.0;
      w.z = {scale * sign * std::sqrt(sq)};
      break;
    }
  }
  return w;
}

/// Orthonormal basis, row i is o_i.
struct Basis {
  std::size_t d = 0;
  std::vector<double> rows;

  [[nodiscard]] std::span<const double> row(std::size_t i) const { return {rows.data() + i * d, d}; }
};

/// Haar-distributed orthonormal basis for one sweep: Gram-Schmidt on a
/// Gaussian matrix. Normalizing by the positive norm fixes diag(R) > 0, which
/// is what makes the result Haar rather than orientation-biased.
inline Basis haar_basis(const StreamKey& key, std::uint64_t sweep_index, std::size_t d) {
  Basis b{d, std::vector<double>(d * d)};
  for (std::size_t i = 0; i < d; ++i) {
    std::span<double> v(b.rows.data() + i * d, d);
    gaussian_lanes(key, sweep_index, static_cast<std::uint32_t>(i * ((d + 1) / 2)), v);
    // two passes of modified Gram-Schmidt
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto o = b.row(j);
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += v[k] * o[k];
        for (std::size_t k = 0; k < d; ++k) v[k] -= dot * o[k];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return b;
}

}  // namespace picard

#endif  // PICARD_RNG_HPP
