#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "symvi/errors.hpp"

namespace symvi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace detail {

// Left-looking Cholesky. Throws with the failing pivot index so callers can
// report which coordinate broke definiteness.
inline Matrix chol_lower(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NotPositiveDefinite("non-positive pivot " + std::to_string(d) + " at index " +
                                std::to_string(j));
    }
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace detail

// Lower-triangular matrix with strictly positive diagonal, hence det > 0.
class LowerTriangularFactor {
 public:
  explicit LowerTriangularFactor(Matrix l) : l_(std::move(l)) {
    if (l_.rows() != l_.cols()) throw DimensionMismatch("factor must be square");
    for (Eigen::Index i = 0; i < l_.rows(); ++i) {
      if (!(l_(i, i) > 0.0) || !std::isfinite(l_(i, i))) {
        throw InvalidParameter("factor diagonal must be positive and finite at index " +
                               std::to_string(i));
      }
      for (Eigen::Index j = i + 1; j < l_.cols(); ++j) l_(i, j) = 0.0;
    }
  }

  Eigen::Index dim() const { return l_.rows(); }
  const Matrix& matrix() const { return l_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return l_(i, j); }

 private:
  Matrix l_;
};

// Symmetric positive definite matrix. Construction enforces symmetry to
// 1e-12 relative tolerance, averages the residual asymmetry away, and
// verifies all Cholesky pivots are positive.
class PosDefMatrix {
 public:
  explicit PosDefMatrix(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("matrix must be square");
    const double scale = std::max(1.0, detail::max_abs(a));
    const double asym = detail::max_abs(a - a.transpose());
    if (asym > 1e-12 * scale) {
      throw InvalidParameter("matrix asymmetry " + std::to_string(asym) +
                             " exceeds tolerance; refusing to symmetrize");
    }
    m_ = 0.5 * (a + a.transpose());
    chol_ = detail::chol_lower(m_);
  }

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  friend LowerTriangularFactor cholesky(const PosDefMatrix& a);

 private:
  Matrix m_;
  Matrix chol_;
};

inline LowerTriangularFactor cholesky(const PosDefMatrix& a) {
  return LowerTriangularFactor(a.chol_);
}

// log det(L L^T) = 2 sum_i log L_ii.
inline double log_det(const LowerTriangularFactor& l) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.dim(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

inline double log_det(const PosDefMatrix& a) { return log_det(cholesky(a)); }

// Solves L x = b by forward substitution.
inline Vector tri_solve(const LowerTriangularFactor& l, const Vector& b) {
  if (b.size() != l.dim()) {
    throw DimensionMismatch("tri_solve: rhs length " + std::to_string(b.size()) +
                            " does not match dimension " + std::to_string(l.dim()));
  }
  Vector x(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    double s = b(i);
    for (Eigen::Index k = 0; k < i; ++k) s -= l(i, k) * x(k);
    x(i) = s / l(i, i);
  }
  return x;
}

// Solves L^T x = b by back substitution.
inline Vector tri_solve_transposed(const LowerTriangularFactor& l, const Vector& b) {
  if (b.size() != l.dim()) {
    throw DimensionMismatch("tri_solve_transposed: rhs length " + std::to_string(b.size()) +
                            " does not match dimension " + std::to_string(l.dim()));
  }
  Vector x(b.size());
  for (Eigen::Index i = b.size() - 1; i >= 0; --i) {
    double s = b(i);
    for (Eigen::Index k = i + 1; k < b.size(); ++k) s -= l(k, i) * x(k);
    x(i) = s / l(i, i);
  }
  return x;
}

// Solves A x = b through the stored factor: A = L L^T.
inline Vector posdef_solve(const PosDefMatrix& a, const Vector& b) {
  const LowerTriangularFactor l = cholesky(a);
  return tri_solve_transposed(l, tri_solve(l, b));
}

inline Matrix posdef_inverse(const PosDefMatrix& a) {
  const Eigen::Index n = a.dim();
  Matrix inv(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    inv.col(j) = posdef_solve(a, Vector::Unit(n, j));
  }
  // Symmetrize roundoff so the result passes strict symmetry checks.
  return 0.5 * (inv + inv.transpose());
}

// Correlation matrix implied by a positive definite scale or covariance.
inline Matrix correlation_from_scale(const Matrix& s) {
  const Eigen::Index n = s.rows();
  Matrix c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      c(i, j) = s(i, j) / std::sqrt(s(i, i) * s(j, j));
    }
  }
  return c;
}

}  // namespace symvi
