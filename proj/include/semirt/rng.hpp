#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

namespace semirt {

// splitmix64 finalizer; used to derive independent sub-stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the named sub-stream `name` under a master seed. Streams with
/// different names are statistically independent.
inline std::uint64_t substream_seed(std::uint64_t master, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix_seed(mix_seed(master) ^ h);
}

/// Random stream owned by one chain or simulation. Distribution objects are
/// built per call so the stream state is the engine alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(mix_seed(seed)) {}

  static Rng substream(std::uint64_t master, std::string_view name) {
    Rng r;
    r.engine_.seed(substream_seed(master, name));
    return r;
  }

  std::mt19937_64& engine() { return engine_; }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma with the given shape and rate (mean shape / rate).
  double gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0)) throw std::invalid_argument("gamma: shape and rate must be positive");
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }

  /// Inverse-gamma with the given shape and scale (mean scale / (shape - 1)).
  double inv_gamma(double shape, double scale) { return 1.0 / gamma(shape, scale); }

  double beta(double a, double b) {
    // Small shapes underflow the direct ratio; go through log-gammas via
    // the a < 1 boost identity G(a) = G(a + 1) U^{1/a}.
    const double lx = log_gamma_variate(a);
    const double ly = log_gamma_variate(b);
    const double m = std::max(lx, ly);
    const double x = std::exp(lx - m);
    const double y = std::exp(ly - m);
    return x / (x + y);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn proportionally to nonnegative weights.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0) || !std::isfinite(total)) throw std::invalid_argument("categorical: weights must have positive finite sum");
    double u = uniform() * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      u -= weights[k];
      if (u < 0.0) return k;
    }
    // rounding: return the last positive weight
    for (std::size_t k = weights.size(); k-- > 0;) {
      if (weights[k] > 0.0) return k;
    }
    return weights.size() - 1;
  }

 private:
  double log_gamma_variate(double shape) {
    if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape, 1.0)(engine_));
    const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(engine_);
    return std::log(g) + std::log(uniform()) / shape;
  }

  std::mt19937_64 engine_;
};

}  // namespace semirt
