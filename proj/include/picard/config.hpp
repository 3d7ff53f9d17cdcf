#ifndef PICARD_CONFIG_HPP
#define PICARD_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "picard/io.hpp"
#include "picard/kernels.hpp"

namespace picard {

enum class Experiment { ScalingD, ScalingK, ToleranceSweep, Tails, Sir, VerifyThm1, VerifyProp5, OracleEquivalence };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::ScalingD: return "scaling_d";
    case Experiment::ScalingK: return "scaling_k";
    case Experiment::ToleranceSweep: return "tolerance_sweep";
    case Experiment::Tails: return "tails";
    case Experiment::Sir: return "sir";
    case Experiment::VerifyThm1: return "verify_thm1";
    case Experiment::VerifyProp5: return "verify_prop5";
    case Experiment::OracleEquivalence: return "oracle_equivalence";
  }
  return "?";
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Window size, either fixed or relative to the dimension.
struct KRule {
  enum class Kind { Fixed, TimesD, SqrtD, FloorSqrtD } kind = Kind::Fixed;
  double factor = 1.0;
  std::size_t fixed = 1;

  [[nodiscard]] std::size_t resolve(std::size_t d) const {
    switch (kind) {
      case Kind::Fixed: return fixed;
      case Kind::TimesD: return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(factor * static_cast<double>(d))));
      case Kind::SqrtD: return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
      case Kind::FloorSqrtD: return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d)))));
    }
    return fixed;
  }

  /// Accepts `12`, `d`, `2d`, `0.5d`, `sqrt_d` (ceiling) and `floor_sqrt_d`.
  static KRule parse(std::string_view s) {
    KRule k;
    if (s == "sqrt_d") {
      k.kind = Kind::SqrtD;
    } else if (s == "floor_sqrt_d") {
      k.kind = Kind::FloorSqrtD;
    } else if (!s.empty() && s.back() == 'd') {
      k.kind = Kind::TimesD;
      s.remove_suffix(1);
      k.factor = s.empty() ? 1.0 : parse_double(s);
      if (!(k.factor > 0.0)) throw ConfigError("K factor must be positive");
    } else {
      const double v = parse_double(s);
      if (v < 1.0 || v != std::floor(v)) throw ConfigError("K must be a positive integer");
      k.fixed = static_cast<std::size_t>(v);
    }
    return k;
  }
};

struct ExperimentConfig {
  Experiment experiment = Experiment::ScalingD;
  KernelKind kernel = KernelKind::RWM;
  BasisMode basis = BasisMode::Standard;
  std::string target = "linear";  // gaussian | linear | logistic | poisson | sir
  std::vector<std::size_t> d{64};
  std::vector<KRule> K{KRule{KRule::Kind::TimesD, 1.0, 1}};
  std::uint64_t N = 2000;
  std::vector<double> r{0.0};
  std::vector<std::uint64_t> seeds{1};
  std::size_t workers = 1;
  std::filesystem::path output = "out";
  std::optional<double> scale;  // fixed proposal scale, skips tuning
  std::uint64_t warmup = 2000;
  double burn_in = 0.2;  // fraction of N
  std::size_t reference_factor = 0;  // long-run reference length / N; 0 disables
  std::filesystem::path cache_dir;   // defaults to output/cache
  // tails
  std::vector<double> radii{0.0, 50.0, 200.0, 800.0};
  std::size_t reps = 10;
  // verify_thm1
  std::size_t j = 0;  // 0 means ceil(log d)
  std::vector<std::size_t> i_values;
  // verify_prop5
  std::size_t rounds = 20;
  // sir
  std::size_t population = 200;
  double beta = 0.001;
  double gamma = 0.15;
  std::size_t min_infected = 50;
  // oracle_equivalence
  std::size_t configs = 100;
  std::size_t trajectory_every = 0;  // >0 writes trajectory CSVs, subsampled

  void validate() const {
    if (d.empty() || K.empty() || r.empty() || seeds.empty()) throw ConfigError("d, K, r and seeds must be non-empty");
    for (auto v : d)
      if (v == 0) throw ConfigError("d must be positive");
    for (double v : r)
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("r must lie in [0, 1]");
    if (N == 0) throw ConfigError("N must be positive");
    if (workers == 0) throw ConfigError("workers must be positive");
    if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ConfigError("burn_in must lie in [0, 1)");
    if (scale && !(*scale > 0.0)) throw ConfigError("scale must be positive");
    if (warmup < 100) throw ConfigError("warmup must be at least 100");
    static const std::set<std::string> targets{"gaussian", "linear", "logistic", "poisson", "sir"};
    if (!targets.contains(target)) throw ConfigError("unknown target '" + target + "'");
    if (kernel == KernelKind::ULA) throw ConfigError("ULA cannot drive the Picard engine");
    for (std::size_t dd : d)
      for (const auto& k : K)
        if (k.resolve(dd) > N && experiment != Experiment::Tails && experiment != Experiment::VerifyThm1)
          throw ConfigError("K exceeds N");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (auto part : split_csv_line(s)) {
    auto t = trim(part);
    if (!t.empty()) out.push_back(t);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

inline std::uint64_t parse_uint(std::string_view s) {
  const double v = parse_double(s);
  if (v < 0.0 || v != std::floor(v) || v > 1.8e19) throw ConfigError("expected a non-negative integer, got '" + std::string(s) + "'");
  return static_cast<std::uint64_t>(v);
}

/// `1,2,5` or `1-5`.
inline std::vector<std::uint64_t> parse_uint_list(std::string_view s) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) {
    const auto dash = item.find('-', 1);
    if (dash != std::string::npos) {
      const auto lo = parse_uint(item.substr(0, dash));
      const auto hi = parse_uint(item.substr(dash + 1));
      if (hi < lo) throw ConfigError("bad range '" + item + "'");
      for (auto v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse_uint(item));
    }
  }
  return out;
}

inline bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("expected a boolean, got '" + std::string(s) + "'");
}

}  // namespace detail

inline Experiment parse_experiment(std::string_view s) {
  for (auto e : {Experiment::ScalingD, Experiment::ScalingK, Experiment::ToleranceSweep, Experiment::Tails,
                 Experiment::Sir, Experiment::VerifyThm1, Experiment::VerifyProp5, Experiment::OracleEquivalence})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

inline KernelKind parse_kernel(std::string_view s) {
  for (auto k : {KernelKind::RWM, KernelKind::MwG, KernelKind::ULA})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown kernel '" + std::string(s) + "'");
}

inline BasisMode parse_basis(std::string_view s) {
  for (auto b : {BasisMode::Standard, BasisMode::HaarPerSweep, BasisMode::HaarPerChain})
    if (to_string(b) == s) return b;
  throw ConfigError("unknown basis '" + std::string(s) + "'");
}

inline constexpr int kConfigVersion = 1;

/// Defaults that depend on the experiment, applied before the file's keys.
inline ExperimentConfig preset(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::ScalingD:
      c.d = {64, 256};
      c.seeds = {1, 2, 3, 4, 5};
      break;
    case Experiment::ScalingK:
      c.d = {128};
      c.K = {KRule::parse("2"), KRule::parse("sqrt_d"), KRule::parse("d"), KRule::parse("2d")};
      break;
    case Experiment::ToleranceSweep:
      c.d = {200};
      c.r = {0.0, 0.05, 0.1, 0.2, 1.0};
      break;
    case Experiment::Tails:
      c.target = "logistic";
      c.d = {50};
      c.warmup = 10000;
      break;
    case Experiment::Sir:
      c.target = "sir";
      c.K = {KRule::parse("floor_sqrt_d")};
      c.N = 100000;
      c.burn_in = 0.5;
      c.warmup = 5000;
      break;
    case Experiment::VerifyThm1:
      c.target = "gaussian";
      c.d = {400};
      c.reps = 1000;
      break;
    case Experiment::VerifyProp5:
      c.target = "gaussian";
      c.kernel = KernelKind::MwG;
      c.basis = BasisMode::HaarPerChain;
      c.d = {50};
      c.K = {KRule::parse("25")};
      c.seeds = {1, 2, 3, 4, 5};
      c.scale = 0.3;
      break;
    case Experiment::OracleEquivalence: break;
  }
  return c;
}

/// Parses the flat `key = value` format. The first setting must be
/// `version = 1` and `experiment` must precede the other keys.
inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  bool have_version = false;
  bool have_experiment = false;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = detail::trim(std::string_view(text).substr(0, eq));
    const auto value = detail::trim(std::string_view(text).substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      if (key == "version") {
        if (detail::parse_uint(value) != kConfigVersion) throw ConfigError("unsupported config version " + value);
        have_version = true;
        continue;
      }
      if (!have_version) throw ConfigError("'version = 1' must come first");
      if (key == "experiment") {
        c = preset(parse_experiment(value));
        have_experiment = true;
        continue;
      }
      if (!have_experiment) throw ConfigError("'experiment' must precede '" + key + "'");
      if (key == "kernel") c.kernel = parse_kernel(value);
      else if (key == "basis") c.basis = parse_basis(value);
      else if (key == "target") c.target = value;
      else if (key == "d") { c.d.clear(); for (auto v : detail::parse_uint_list(value)) c.d.push_back(v); }
      else if (key == "K") { c.K.clear(); for (const auto& v : detail::split_list(value)) c.K.push_back(KRule::parse(v)); }
      else if (key == "N") c.N = detail::parse_uint(value);
      else if (key == "r") { c.r.clear(); for (const auto& v : detail::split_list(value)) c.r.push_back(parse_double(v)); }
      else if (key == "seeds") c.seeds = detail::parse_uint_list(value);
      else if (key == "workers") c.workers = detail::parse_uint(value);
      else if (key == "output") c.output = value;
      else if (key == "scale") c.scale = value == "tuned" ? std::nullopt : std::optional<double>(parse_double(value));
      else if (key == "warmup") c.warmup = detail::parse_uint(value);
      else if (key == "burn_in") c.burn_in = parse_double(value);
      else if (key == "reference_factor") c.reference_factor = detail::parse_uint(value);
      else if (key == "cache_dir") c.cache_dir = value;
      else if (key == "radii") { c.radii.clear(); for (const auto& v : detail::split_list(value)) c.radii.push_back(parse_double(v)); }
      else if (key == "reps") c.reps = detail::parse_uint(value);
      else if (key == "j") c.j = detail::parse_uint(value);
      else if (key == "i_values") { c.i_values.clear(); for (auto v : detail::parse_uint_list(value)) c.i_values.push_back(v); }
      else if (key == "rounds") c.rounds = detail::parse_uint(value);
      else if (key == "population") c.population = detail::parse_uint(value);
      else if (key == "beta") c.beta = parse_double(value);
      else if (key == "gamma") c.gamma = parse_double(value);
      else if (key == "min_infected") c.min_infected = detail::parse_uint(value);
      else if (key == "configs") c.configs = detail::parse_uint(value);
      else if (key == "trajectory_every") c.trajectory_every = detail::parse_uint(value);
      else throw ConfigError("unknown key '" + key + "'");
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_version) throw ConfigError("missing 'version = 1'");
  if (!have_experiment) throw ConfigError("missing 'experiment'");
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

}  // namespace picard

#endif  // PICARD_CONFIG_HPP
