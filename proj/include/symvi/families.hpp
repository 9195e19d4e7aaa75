#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "symvi/errors.hpp"
#include "symvi/linalg.hpp"
#include "symvi/mathutil.hpp"
#include "symvi/rng.hpp"

namespace symvi {

// Base densities are standardized iid products. Only the Gaussian base is
// spherically symmetric; all three are even-symmetric about the origin.
enum class BaseKind { gaussian, laplace_iid, student_t_iid };

struct BaseDensity {
  BaseKind kind = BaseKind::gaussian;
  int dim = 0;
  double df = 10.0;  // student_t_iid only
};

inline BaseDensity make_base(BaseKind kind, int dim, double df = 10.0) {
  if (dim <= 0) throw InvalidParameter("base: dimension must be positive");
  if (kind == BaseKind::student_t_iid && !(df > 2.0)) {
    throw InvalidParameter("base: student df must exceed 2 so the scale is finite");
  }
  return BaseDensity{kind, dim, df};
}

inline bool base_is_spherical(const BaseDensity& b) { return b.kind == BaseKind::gaussian; }

inline const char* base_name(BaseKind k) {
  switch (k) {
    case BaseKind::gaussian: return "gaussian";
    case BaseKind::laplace_iid: return "laplace_iid";
    case BaseKind::student_t_iid: return "student_t_iid";
  }
  return "?";
}

inline double base_coord_log_density(const BaseDensity& b, double u) {
  switch (b.kind) {
    case BaseKind::gaussian:
      return log_normal_pdf(u);
    case BaseKind::laplace_iid:
      return -std::abs(u) - kLogTwo;
    case BaseKind::student_t_iid: {
      const double df = b.df;
      return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * kPi) -
             0.5 * (df + 1.0) * std::log1p(u * u / df);
    }
  }
  return 0.0;
}

inline double base_log_density(const BaseDensity& b, const Vector& zeta) {
  if (zeta.size() != b.dim) throw DimensionMismatch("base: point dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < zeta.size(); ++i) s += base_coord_log_density(b, zeta(i));
  return s;
}

inline double base_coord_draw(const BaseDensity& b, Rng& rng) {
  switch (b.kind) {
    case BaseKind::gaussian: return rng.normal();
    case BaseKind::laplace_iid: return rng.laplace();
    case BaseKind::student_t_iid: return rng.student_t(b.df);
  }
  return 0.0;
}

// Entropy of the standardized base when a closed form exists.
inline std::optional<double> base_entropy_closed(const BaseDensity& b) {
  switch (b.kind) {
    case BaseKind::gaussian:
      return 0.5 * b.dim * (1.0 + kLogTwoPi);
    case BaseKind::laplace_iid:
      return b.dim * (1.0 + kLogTwo);
    case BaseKind::student_t_iid:
      return std::nullopt;
  }
  return std::nullopt;
}

// Half-width of an interval holding all but ~1e-12 of one coordinate's mass.
// Used as the default truncation radius for deterministic quadrature.
inline double base_coord_support_radius(const BaseDensity& b) {
  switch (b.kind) {
    case BaseKind::gaussian: return 9.0;
    case BaseKind::laplace_iid: return 30.0;
    case BaseKind::student_t_iid:
      return std::min(1e5, 50.0 * std::pow(1e12, 1.0 / b.df));
  }
  return 9.0;
}

enum class ScaleMode { mean_field, full_rank, location_only };

inline const char* mode_name(ScaleMode m) {
  switch (m) {
    case ScaleMode::mean_field: return "mean_field";
    case ScaleMode::full_rank: return "full_rank";
    case ScaleMode::location_only: return "location_only";
  }
  return "?";
}

// Location-scale approximation q(z) = q0(L^{-1}(z - nu)) |S|^{-1/2} with
// S = L L^T. The factor is stored in unconstrained form: the log of the
// diagonal plus the strict lower triangle in row-major order, which makes
// pack/unpack a verbatim copy and therefore exactly invertible.
struct LocationScaleApprox {
  BaseDensity base;
  ScaleMode mode = ScaleMode::full_rank;
  Vector nu;
  Vector log_diag;      // length dim
  Vector strict_lower;  // length dim*(dim-1)/2, row-major (i > j)

  int dim() const { return base.dim; }

  double half_log_det() const { return log_diag.sum(); }

  LowerTriangularFactor factor() const {
    const int d = dim();
    Matrix l = Matrix::Zero(d, d);
    int k = 0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < i; ++j) l(i, j) = strict_lower(k++);
      l(i, i) = std::exp(log_diag(i));
    }
    return LowerTriangularFactor(std::move(l));
  }

  Matrix scale_matrix() const {
    const Matrix l = factor().matrix();
    return l * l.transpose();
  }
};

inline int packed_size(const LocationScaleApprox& q) {
  const int d = q.dim();
  switch (q.mode) {
    case ScaleMode::location_only: return d;
    case ScaleMode::mean_field: return 2 * d;
    case ScaleMode::full_rank: return 2 * d + d * (d - 1) / 2;
  }
  return 0;
}

inline void validate(const LocationScaleApprox& q) {
  const int d = q.dim();
  if (q.nu.size() != d || q.log_diag.size() != d ||
      q.strict_lower.size() != static_cast<Eigen::Index>(d) * (d - 1) / 2) {
    throw DimensionMismatch("approximation: parameter block sizes inconsistent with dim");
  }
  if (q.mode == ScaleMode::mean_field && q.strict_lower.size() > 0 &&
      q.strict_lower.cwiseAbs().maxCoeff() != 0.0) {
    throw InvalidParameter("mean_field approximation must have a diagonal factor");
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!std::isfinite(q.nu(i)) || !std::isfinite(q.log_diag(i))) {
      throw InvalidParameter("approximation: non-finite parameter");
    }
  }
}

inline LocationScaleApprox make_approx(const BaseDensity& base, ScaleMode mode) {
  LocationScaleApprox q;
  q.base = base;
  q.mode = mode;
  q.nu = Vector::Zero(base.dim);
  q.log_diag = Vector::Zero(base.dim);
  q.strict_lower = Vector::Zero(static_cast<Eigen::Index>(base.dim) * (base.dim - 1) / 2);
  return q;
}

inline LocationScaleApprox make_approx(const BaseDensity& base, ScaleMode mode, const Vector& nu,
                                       const LowerTriangularFactor& l) {
  LocationScaleApprox q = make_approx(base, mode);
  if (nu.size() != base.dim || l.dim() != base.dim) {
    throw DimensionMismatch("approximation: nu or factor dimension mismatch");
  }
  q.nu = nu;
  int k = 0;
  for (int i = 0; i < base.dim; ++i) {
    q.log_diag(i) = std::log(l(i, i));
    for (int j = 0; j < i; ++j) q.strict_lower(k++) = l(i, j);
  }
  validate(q);
  return q;
}

// Standardized noise, one draw per row. Coordinates are drawn row by row in
// index order from a single stream, so a (base, n, seed) triple pins every bit.
inline Matrix sample_base_noise(const BaseDensity& base, int n, std::uint64_t seed) {
  if (n <= 0) throw InvalidParameter("sample: need at least one draw");
  Rng rng(derive_seed(seed, 0x5a6d));
  Matrix zeta(n, base.dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < base.dim; ++j) zeta(i, j) = base_coord_draw(base, rng);
  }
  return zeta;
}

inline Matrix transform_noise(const LocationScaleApprox& q, const Matrix& zeta) {
  const Matrix l = q.factor().matrix();
  Matrix z = zeta * l.transpose();
  z.rowwise() += q.nu.transpose();
  return z;
}

// Draws from q: z = nu + L * zeta. Affine equivariance is exact because this
// is literally how the draws are produced.
inline Matrix sample(const LocationScaleApprox& q, int n, std::uint64_t seed) {
  return transform_noise(q, sample_base_noise(q.base, n, seed));
}

inline double log_density(const LocationScaleApprox& q, const Vector& z) {
  if (z.size() != q.dim()) throw DimensionMismatch("log_density: point dimension mismatch");
  const Vector zeta = tri_solve(q.factor(), z - q.nu);
  return base_log_density(q.base, zeta) - q.half_log_det();
}

struct EntropyEstimate {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = false;
};

// H(q) = H(q0) + (1/2) log |S|. Monte Carlo covers bases without a closed
// form; the estimate is deterministic in (n, seed).
inline EntropyEstimate entropy(const LocationScaleApprox& q, int n = 100000,
                               std::uint64_t seed = 0x9e1fu) {
  EntropyEstimate e;
  if (auto h0 = base_entropy_closed(q.base)) {
    e.value = *h0 + q.half_log_det();
    e.exact = true;
    return e;
  }
  const Matrix zeta = sample_base_noise(q.base, n, seed);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = -base_log_density(q.base, zeta.row(i).transpose());
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
  e.value = mean + q.half_log_det();
  e.std_error = std::sqrt(var / n);
  return e;
}

// Flat parameter order: nu, then log-diagonal, then strict lower triangle
// (row-major). location_only packs nu alone; mean_field stops at the
// diagonal. Values are copied verbatim, so round trips are bit-exact.
inline Vector pack(const LocationScaleApprox& q) {
  validate(q);
  const int d = q.dim();
  Vector v(packed_size(q));
  v.head(d) = q.nu;
  if (q.mode != ScaleMode::location_only) v.segment(d, d) = q.log_diag;
  if (q.mode == ScaleMode::full_rank) v.tail(d * (d - 1) / 2) = q.strict_lower;
  return v;
}

inline LocationScaleApprox unpack(const Vector& v, const LocationScaleApprox& like) {
  if (v.size() != packed_size(like)) {
    throw DimensionMismatch("unpack: packed length " + std::to_string(v.size()) +
                            ", expected " + std::to_string(packed_size(like)));
  }
  LocationScaleApprox q = like;
  const int d = like.dim();
  q.nu = v.head(d);
  if (q.mode != ScaleMode::location_only) q.log_diag = v.segment(d, d);
  if (q.mode == ScaleMode::full_rank) q.strict_lower = v.tail(d * (d - 1) / 2);
  return q;
}

}  // namespace symvi
