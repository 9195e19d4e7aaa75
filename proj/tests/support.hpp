#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "symvi/bayes_targets.hpp"
#include "symvi/dataset.hpp"
#include "symvi/linalg.hpp"
#include "symvi/rng.hpp"
#include "symvi/targets.hpp"

namespace symvi::test {

// Worst relative error between the analytic gradient and a central finite
// difference, over random points in a box. Points near a non-smooth set are
// skipped. Relative to max(1, |gradient component|).
inline double max_grad_fd_rel_err(const TargetDensity& t, int n_points, std::uint64_t seed,
                                  double lo = -2.0, double hi = 2.0) {
  Rng rng(derive_seed(seed, 0xfd));
  double worst = 0.0;
  int checked = 0;
  while (checked < n_points) {
    Vector z(t.dim);
    for (int i = 0; i < t.dim; ++i) z(i) = rng.uniform(lo, hi);
    if (t.near_nonsmooth && t.near_nonsmooth(z)) continue;
    ++checked;
    const Vector g = t.grad_log_density(z);
    for (int i = 0; i < t.dim; ++i) {
      const double h = 1e-5 * (1.0 + std::abs(z(i)));
      Vector zp = z, zm = z;
      zp(i) += h;
      zm(i) -= h;
      if (t.near_nonsmooth && (t.near_nonsmooth(zp) || t.near_nonsmooth(zm))) continue;
      const double fd = (t.log_density(zp) - t.log_density(zm)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g(i)) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

// Random symmetric positive definite matrix: B B^T plus a diagonal bump.
inline Matrix random_spd(int d, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5bd));
  Matrix b(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
  }
  Matrix a = b * b.transpose();
  a.diagonal().array() += 0.2 + 0.05 * d;
  return a;
}

// Equicorrelation scale matrix: unit diagonal, rho elsewhere.
inline Matrix equicorrelation(int d, double rho) {
  Matrix m = Matrix::Constant(d, d, rho);
  m.diagonal().setOnes();
  return m;
}

// One instance of every target kind, data-driven ones on synthetic fixtures
// with pinned seeds. Used by the gradient-contract sweeps.
inline std::vector<TargetDensity> all_targets() {
  std::vector<TargetDensity> ts;
  Vector mu2(2);
  mu2 << 0.3, -0.7;
  ts.push_back(make_mvn(mu2, PosDefMatrix(equicorrelation(2, 0.5))));
  ts.push_back(make_multi_student_t(Vector::Zero(2), PosDefMatrix(equicorrelation(2, 0.9)), 10.0));
  ts.push_back(make_multi_student_t(Vector::Zero(3), PosDefMatrix(equicorrelation(3, 0.4)), 3.0));
  ts.push_back(make_univariate(UnivariateKind::laplace));
  ts.push_back(make_univariate(UnivariateKind::student_t, {.df = 10.0}));
  ts.push_back(make_univariate(UnivariateKind::cauchy));
  ts.push_back(make_univariate(UnivariateKind::skew_normal, {.alpha = 3.0}));
  ts.push_back(make_univariate(UnivariateKind::skew_normal, {.alpha = 10.0}));
  ts.push_back(make_gaussian_mixture_1d(1.0));
  ts.push_back(make_gaussian_mixture_1d(10.0));
  ts.push_back(make_gaussian_mixture_2d());
  ts.push_back(make_crescent());
  ts.push_back(make_logistic_regression(make_logistic_fixture(128, 11)));
  ts.push_back(make_logistic_regression(make_logistic_fixture(0, 11)));
  ts.push_back(make_eight_schools(make_eight_schools_fixture(853), true));
  ts.push_back(make_eight_schools(make_eight_schools_fixture(853), false));
  ts.push_back(make_binomial_glm(make_glm_fixture(40, 17)));
  return ts;
}

}  // namespace symvi::test
