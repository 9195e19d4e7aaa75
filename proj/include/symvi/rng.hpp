#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace symvi {

// splitmix64 finalizer. Used to mix seeds and derive independent streams,
// so that (seed, stream id) -> engine state is reproducible and documented.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(seed ^ 0x6a09e667f3bcc909ULL) + mix64(a) + 0x9e3779b97f4a7c15ULL * b);
}

// All variate transforms live here rather than in <random> distributions,
// which keeps sequences identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() { return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller with a cached spare deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double exponential() { return -std::log(uniform_pos()); }

  // Standard Laplace: density exp(-|x|)/2, by inverse CDF.
  double laplace() {
    const double u = uniform_pos();
    if (u <= 0.5) return std::log(2.0 * u);
    const double t = 2.0 * (1.0 - u);
    // t == 0 can occur at the 53-bit edge u == 1; clamp to the smallest normal.
    return -std::log(t > 0.0 ? t : 2.3e-308);
  }

  // Marsaglia-Tsang for shape >= 1, with the power-of-uniform boost below 1.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform_pos();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  double chi_square(double df) { return 2.0 * gamma(0.5 * df); }

  // Standard Student-t with df degrees of freedom.
  double student_t(double df) { return normal() / std::sqrt(chi_square(df) / df); }

  double cauchy() {
    // tan of a uniform angle; excludes the exact half-integer pole.
    const double u = uniform_pos();
    return std::tan(3.141592653589793238462643383280 * (u - 0.5));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace symvi
