#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "symvi/errors.hpp"
#include "symvi/linalg.hpp"
#include "symvi/mathutil.hpp"

namespace symvi {

// Moments a target knows in closed form. Absent entries mean "not defined or
// not known", e.g. a Cauchy target carries no mean.
struct KnownMoments {
  std::optional<Vector> mean;
  std::optional<Matrix> covariance;
  std::optional<Matrix> correlation;
  std::optional<Matrix> scale_matrix;
  std::optional<Vector> symmetry_point;
};

// A (possibly unnormalized) posterior or synthetic density on R^dim.
// Synthetic targets in this header include their normalizing constants;
// data-driven posteriors drop additive terms that do not involve the latents.
struct TargetDensity {
  std::string name;
  int dim = 0;
  std::function<double(const Vector&)> log_density;
  std::function<Vector(const Vector&)> grad_log_density;
  KnownMoments known_moments;

  bool log_concave = false;
  bool even_symmetric = false;
  bool elliptical = false;

  // For elliptical targets only: derivative f'(r) of the whitened radial
  // log profile f(r) = log p0(zeta) with z = mu + M^{1/2} zeta, r = |zeta|.
  std::function<double(double)> radial_log_profile_deriv;

  // True near points where the gradient is not defined; finite-difference
  // checks skip such points (e.g. the Laplace kink).
  std::function<bool(const Vector&)> near_nonsmooth;
};

inline void check_dim(const TargetDensity& t, const Vector& z) {
  if (z.size() != t.dim) {
    throw DimensionMismatch(t.name + ": point has length " + std::to_string(z.size()) +
                            ", expected " + std::to_string(t.dim));
  }
}

// ---------------------------------------------------------------------------
// Multivariate normal, fully normalized.

inline TargetDensity make_mvn(const Vector& mean, const PosDefMatrix& cov) {
  const int d = static_cast<int>(mean.size());
  if (cov.dim() != d) throw DimensionMismatch("mvn: mean/covariance dimensions differ");
  const auto l = cholesky(cov);
  const double half_log_det = 0.5 * log_det(l);
  const double norm_const = -0.5 * d * kLogTwoPi - half_log_det;

  TargetDensity t;
  t.name = "mvn";
  t.dim = d;
  t.log_density = [mean, l, norm_const](const Vector& z) {
    const Vector w = tri_solve(l, z - mean);
    return norm_const - 0.5 * w.squaredNorm();
  };
  t.grad_log_density = [mean, l](const Vector& z) {
    const Vector w = tri_solve(l, z - mean);
    return Vector(-tri_solve_transposed(l, w));
  };
  t.known_moments.mean = mean;
  t.known_moments.covariance = cov.matrix();
  t.known_moments.correlation = correlation_from_scale(cov.matrix());
  t.known_moments.scale_matrix = cov.matrix();
  t.known_moments.symmetry_point = mean;
  t.log_concave = true;
  t.even_symmetric = true;
  t.elliptical = true;
  t.radial_log_profile_deriv = [](double r) { return -r; };
  return t;
}

// ---------------------------------------------------------------------------
// Multivariate Student-t with scale matrix m and df degrees of freedom.
// Mean exists for df > 1, covariance df/(df-2) * m for df > 2; the
// correlation implied by m is reported for every df.

inline TargetDensity make_multi_student_t(const Vector& mean, const PosDefMatrix& m, double df) {
  const int d = static_cast<int>(mean.size());
  if (m.dim() != d) throw DimensionMismatch("student: mean/scale dimensions differ");
  if (!(df > 0.0)) throw InvalidParameter("student: df must be positive");
  const auto l = cholesky(m);
  const double norm_const = std::lgamma(0.5 * (df + d)) - std::lgamma(0.5 * df) -
                            0.5 * d * std::log(df * kPi) - 0.5 * log_det(l);

  TargetDensity t;
  t.name = "student";
  t.dim = d;
  t.log_density = [mean, l, df, d, norm_const](const Vector& z) {
    const Vector w = tri_solve(l, z - mean);
    return norm_const - 0.5 * (df + d) * std::log1p(w.squaredNorm() / df);
  };
  t.grad_log_density = [mean, l, df, d](const Vector& z) {
    const Vector w = tri_solve(l, z - mean);
    const double q = w.squaredNorm();
    return Vector(-((df + d) / (df + q)) * tri_solve_transposed(l, w));
  };
  if (df > 1.0) t.known_moments.mean = mean;
  if (df > 2.0) t.known_moments.covariance = (df / (df - 2.0)) * m.matrix();
  t.known_moments.correlation = correlation_from_scale(m.matrix());
  t.known_moments.scale_matrix = m.matrix();
  t.known_moments.symmetry_point = mean;
  t.log_concave = false;
  t.even_symmetric = true;
  t.elliptical = true;
  t.radial_log_profile_deriv = [df, d](double r) { return -(df + d) * r / (df + r * r); };
  return t;
}

// ---------------------------------------------------------------------------
// Univariate families.

enum class UnivariateKind { laplace, student_t, cauchy, skew_normal };

struct UnivariateParams {
  double loc = 0.0;
  double scale = 1.0;
  double df = 10.0;    // student_t only
  double alpha = 0.0;  // skew_normal only
};

inline TargetDensity make_univariate(UnivariateKind kind, const UnivariateParams& p = {}) {
  if (!(p.scale > 0.0)) throw InvalidParameter("univariate: scale must be positive");
  TargetDensity t;
  t.dim = 1;
  const double loc = p.loc;
  const double s = p.scale;

  switch (kind) {
    case UnivariateKind::laplace: {
      t.name = "laplace";
      t.log_density = [loc, s](const Vector& z) {
        return -std::abs(z(0) - loc) / s - std::log(2.0 * s);
      };
      t.grad_log_density = [loc, s](const Vector& z) {
        Vector g(1);
        g(0) = -sign(z(0) - loc) / s;
        return g;
      };
      t.near_nonsmooth = [loc](const Vector& z) { return std::abs(z(0) - loc) < 1e-6; };
      t.known_moments.mean = Vector::Constant(1, loc);
      t.known_moments.covariance = Matrix::Constant(1, 1, 2.0 * s * s);
      t.known_moments.symmetry_point = Vector::Constant(1, loc);
      t.log_concave = true;
      t.even_symmetric = true;
      break;
    }
    case UnivariateKind::student_t: {
      if (!(p.df > 0.0)) throw InvalidParameter("univariate student: df must be positive");
      const double df = p.df;
      const double norm_const = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                                0.5 * std::log(df * kPi) - std::log(s);
      t.name = "student_t_1d";
      t.log_density = [loc, s, df, norm_const](const Vector& z) {
        const double w = (z(0) - loc) / s;
        return norm_const - 0.5 * (df + 1.0) * std::log1p(w * w / df);
      };
      t.grad_log_density = [loc, s, df](const Vector& z) {
        const double w = (z(0) - loc) / s;
        Vector g(1);
        g(0) = -(df + 1.0) * w / (df + w * w) / s;
        return g;
      };
      if (df > 1.0) t.known_moments.mean = Vector::Constant(1, loc);
      if (df > 2.0) t.known_moments.covariance = Matrix::Constant(1, 1, s * s * df / (df - 2.0));
      t.known_moments.symmetry_point = Vector::Constant(1, loc);
      t.log_concave = false;
      t.even_symmetric = true;
      t.elliptical = true;
      t.known_moments.scale_matrix = Matrix::Constant(1, 1, s * s);
      t.radial_log_profile_deriv = [df](double r) { return -(df + 1.0) * r / (df + r * r); };
      break;
    }
    case UnivariateKind::cauchy: {
      const double norm_const = -std::log(kPi * s);
      t.name = "cauchy";
      t.log_density = [loc, s, norm_const](const Vector& z) {
        const double w = (z(0) - loc) / s;
        return norm_const - std::log1p(w * w);
      };
      t.grad_log_density = [loc, s](const Vector& z) {
        const double w = (z(0) - loc) / s;
        Vector g(1);
        g(0) = -2.0 * w / (1.0 + w * w) / s;
        return g;
      };
      // No mean or covariance: they do not exist for Cauchy.
      t.known_moments.symmetry_point = Vector::Constant(1, loc);
      t.log_concave = false;
      t.even_symmetric = true;
      t.elliptical = true;
      t.known_moments.scale_matrix = Matrix::Constant(1, 1, s * s);
      t.radial_log_profile_deriv = [](double r) { return -2.0 * r / (1.0 + r * r); };
      break;
    }
    case UnivariateKind::skew_normal: {
      const double alpha = p.alpha;
      t.name = "skew_normal";
      t.log_density = [loc, s, alpha](const Vector& z) {
        const double w = (z(0) - loc) / s;
        return kLogTwo + log_normal_pdf(w) + log_normal_cdf(alpha * w) - std::log(s);
      };
      t.grad_log_density = [loc, s, alpha](const Vector& z) {
        const double w = (z(0) - loc) / s;
        // phi/Phi evaluated in logs stays finite far into the left tail.
        const double mills = std::exp(log_normal_pdf(alpha * w) - log_normal_cdf(alpha * w));
        Vector g(1);
        g(0) = (-w + alpha * mills) / s;
        return g;
      };
      const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
      const double mean = loc + s * delta * std::sqrt(2.0 / kPi);
      t.known_moments.mean = Vector::Constant(1, mean);
      t.known_moments.covariance =
          Matrix::Constant(1, 1, s * s * (1.0 - 2.0 * delta * delta / kPi));
      if (alpha == 0.0) {
        t.known_moments.symmetry_point = Vector::Constant(1, loc);
        t.even_symmetric = true;
      }
      t.log_concave = true;
      break;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Equal-weight mixture of N(-m, 1) and N(+m, 1). At m = 0 this is exactly
// N(0, 1); the density is log-concave iff m <= 1.

inline TargetDensity make_gaussian_mixture_1d(double m) {
  if (!(m >= 0.0)) throw InvalidParameter("mixture1d: m must be nonnegative");
  TargetDensity t;
  t.name = "mixture1d";
  t.dim = 1;
  t.log_density = [m](const Vector& z) {
    const double l1 = log_normal_pdf(z(0) + m);
    const double l2 = log_normal_pdf(z(0) - m);
    return -kLogTwo + log_sum_exp(l1, l2);
  };
  t.grad_log_density = [m](const Vector& z) {
    const double l1 = log_normal_pdf(z(0) + m);
    const double l2 = log_normal_pdf(z(0) - m);
    const double r1 = 1.0 / (1.0 + std::exp(l2 - l1));
    Vector g(1);
    g(0) = r1 * (-(z(0) + m)) + (1.0 - r1) * (-(z(0) - m));
    return g;
  };
  t.known_moments.mean = Vector::Zero(1);
  t.known_moments.covariance = Matrix::Constant(1, 1, 1.0 + m * m);
  t.known_moments.symmetry_point = Vector::Zero(1);
  t.log_concave = m <= 1.0;
  t.even_symmetric = true;
  return t;
}

// ---------------------------------------------------------------------------
// Two-dimensional product mixture: each coordinate iid from the equal-weight
// mixture of N(-1, 2) and N(3, 1), second parameters being variances.

inline TargetDensity make_gaussian_mixture_2d() {
  constexpr double mu1 = -1.0, var1 = 4.0;  // sd 2
  constexpr double mu2 = 3.0, var2 = 1.0;
  const auto coord_log_density = [](double z) {
    const double l1 = -0.5 * (z - mu1) * (z - mu1) / var1 - 0.5 * std::log(var1) - 0.5 * kLogTwoPi;
    const double l2 = -0.5 * (z - mu2) * (z - mu2) / var2 - 0.5 * std::log(var2) - 0.5 * kLogTwoPi;
    return -kLogTwo + log_sum_exp(l1, l2);
  };
  const auto coord_grad = [](double z) {
    const double l1 = -0.5 * (z - mu1) * (z - mu1) / var1 - 0.5 * std::log(var1);
    const double l2 = -0.5 * (z - mu2) * (z - mu2) / var2 - 0.5 * std::log(var2);
    const double r1 = 1.0 / (1.0 + std::exp(l2 - l1));
    return r1 * (-(z - mu1) / var1) + (1.0 - r1) * (-(z - mu2) / var2);
  };

  TargetDensity t;
  t.name = "mixture2d";
  t.dim = 2;
  t.log_density = [coord_log_density](const Vector& z) {
    return coord_log_density(z(0)) + coord_log_density(z(1));
  };
  t.grad_log_density = [coord_grad](const Vector& z) {
    Vector g(2);
    g(0) = coord_grad(z(0));
    g(1) = coord_grad(z(1));
    return g;
  };
  // Per coordinate: mean 1; E[z^2] = (4 + 1)/2 + (1 + 9)/2 = 7.5, so var 6.5.
  t.known_moments.mean = Vector::Constant(2, 1.0);
  t.known_moments.covariance = 6.5 * Matrix::Identity(2, 2);
  t.known_moments.correlation = Matrix::Identity(2, 2);
  t.log_concave = false;
  t.even_symmetric = false;
  return t;
}

// ---------------------------------------------------------------------------
// Crescent: z1 ~ N(0, 10^2), z2 | z1 ~ N(0.03 (z1 - 100)^2, 1).

inline TargetDensity make_crescent() {
  const auto ridge = [](double z1) { return 0.03 * (z1 - 100.0) * (z1 - 100.0); };

  TargetDensity t;
  t.name = "crescent";
  t.dim = 2;
  // Additive constants are dropped, matching the sampling-statement
  // convention of common PPLs. The symmetry statistic's denominator is
  // sensitive to this choice; moments, gradients, and KL shape are not.
  t.log_density = [ridge](const Vector& z) {
    const double r = z(1) - ridge(z(0));
    return -z(0) * z(0) / 200.0 - 0.5 * r * r;
  };
  t.grad_log_density = [ridge](const Vector& z) {
    const double r = z(1) - ridge(z(0));
    Vector g(2);
    g(0) = -z(0) / 100.0 + r * 0.06 * (z(0) - 100.0);
    g(1) = -r;
    return g;
  };
  // E[z2] = 0.03 (Var[z1] + 100^2); cross and marginal moments follow from
  // normal moment identities for (z1 - 100)^2.
  Vector mean(2);
  mean << 0.0, 303.0;
  Matrix cov(2, 2);
  cov << 100.0, -600.0, -600.0, 3619.0;
  t.known_moments.mean = mean;
  t.known_moments.covariance = cov;
  t.known_moments.correlation = correlation_from_scale(cov);
  t.log_concave = false;
  t.even_symmetric = false;
  return t;
}

}  // namespace symvi
