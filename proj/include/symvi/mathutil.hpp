#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "symvi/errors.hpp"

namespace symvi {

inline constexpr double kPi = 3.141592653589793238462643383280;
inline constexpr double kLogTwoPi = 1.837877066409345483560659472811;
inline constexpr double kLogTwo = 0.693147180559945309417232121458;

inline double log_sum_exp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -INFINITY;
  for (double x : xs) m = std::max(m, x);
  if (m == -INFINITY) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) {
  if (x > 35.0) return x + std::exp(-x);
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// log of the logistic sigmoid.
inline double log_sigmoid(double x) { return -log1p_exp(-x); }

inline double log_normal_pdf(double x) { return -0.5 * x * x - 0.5 * kLogTwoPi; }

// log Phi(x). erfc covers the bulk; far left tail switches to the
// asymptotic series because erfc underflows near x = -38.
inline double log_normal_cdf(double x) {
  if (x > -20.0) {
    return std::log(0.5 * std::erfc(-x * 0.7071067811865475244008443621049));
  }
  // Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - 15/x^6), x -> -inf.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - 0.5 * kLogTwoPi - std::log(-x) + std::log(series);
}

// Nearest-rank quantile on a copy of the data: the ceil(q*n)-th smallest value.
inline double quantile_nearest_rank(std::vector<double> xs, double q) {
  if (xs.empty()) throw TooFewValidSamples("quantile of an empty sample");
  if (q <= 0.0 || q > 1.0) throw InvalidParameter("quantile level must be in (0, 1]");
  const std::size_t n = xs.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  if (k == 0) k = 1;
  if (k > n) k = n;
  std::nth_element(xs.begin(), xs.begin() + (k - 1), xs.end());
  return xs[k - 1];
}

// log of the surface area of the unit sphere in R^d: log(2 pi^{d/2} / Gamma(d/2)).
inline double log_sphere_surface(int d) {
  return kLogTwo + 0.5 * d * std::log(kPi) - std::lgamma(0.5 * d);
}

inline double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace symvi
