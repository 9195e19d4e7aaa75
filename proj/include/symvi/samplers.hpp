#pragma once

#include <cmath>
#include <cstdint>

#include "symvi/linalg.hpp"
#include "symvi/rng.hpp"
#include "symvi/targets.hpp"

namespace symvi {

// Exact iid samplers for the synthetic targets, one draw per row. These are
// the reference generators: tests compare density-derived quantities against
// moments of these draws.

inline Matrix sample_iid_mvn(const Vector& mean, const PosDefMatrix& cov, int n,
                             std::uint64_t seed) {
  const Matrix l = cholesky(cov).matrix();
  Rng rng(derive_seed(seed, 0x11));
  Matrix out(n, mean.size());
  Vector u(mean.size());
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < u.size(); ++j) u(j) = rng.normal();
    out.row(i) = (mean + l * u).transpose();
  }
  return out;
}

inline Matrix sample_iid_student(const Vector& mean, const PosDefMatrix& scale, double df, int n,
                                 std::uint64_t seed) {
  if (!(df > 0.0)) throw InvalidParameter("student sampler: df must be positive");
  const Matrix l = cholesky(scale).matrix();
  Rng rng(derive_seed(seed, 0x12));
  Matrix out(n, mean.size());
  Vector u(mean.size());
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < u.size(); ++j) u(j) = rng.normal();
    const double w = std::sqrt(rng.chi_square(df) / df);
    out.row(i) = (mean + l * (u / w)).transpose();
  }
  return out;
}

inline Matrix sample_iid_mixture_1d(double m, int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x13));
  Matrix out(n, 1);
  for (int i = 0; i < n; ++i) {
    const double centre = rng.bernoulli(0.5) ? m : -m;
    out(i, 0) = centre + rng.normal();
  }
  return out;
}

inline Matrix sample_iid_mixture_2d(int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x14));
  Matrix out(n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 2; ++j) {
      out(i, j) = rng.bernoulli(0.5) ? -1.0 + 2.0 * rng.normal()
                                     : 3.0 + rng.normal();
    }
  }
  return out;
}

inline Matrix sample_iid_crescent(int n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x15));
  Matrix out(n, 2);
  for (int i = 0; i < n; ++i) {
    const double z1 = 10.0 * rng.normal();
    out(i, 0) = z1;
    out(i, 1) = 0.03 * (z1 - 100.0) * (z1 - 100.0) + rng.normal();
  }
  return out;
}

inline Matrix sample_iid_univariate(UnivariateKind kind, const UnivariateParams& p, int n,
                                    std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x16));
  Matrix out(n, 1);
  for (int i = 0; i < n; ++i) {
    double u = 0.0;
    switch (kind) {
      case UnivariateKind::laplace: u = rng.laplace(); break;
      case UnivariateKind::student_t: u = rng.student_t(p.df); break;
      case UnivariateKind::cauchy: u = rng.cauchy(); break;
      case UnivariateKind::skew_normal: {
        // z = delta |u0| + sqrt(1 - delta^2) u1 is standard skew-normal.
        const double delta = p.alpha / std::sqrt(1.0 + p.alpha * p.alpha);
        const double u0 = rng.normal();
        const double u1 = rng.normal();
        u = delta * std::abs(u0) + std::sqrt(1.0 - delta * delta) * u1;
        break;
      }
    }
    out(i, 0) = p.loc + p.scale * u;
  }
  return out;
}

}  // namespace symvi
