#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"
#include "symvi/linalg.hpp"

using namespace symvi;

TEST_CASE("cholesky of the identity is the identity") {
  const PosDefMatrix a(Matrix::Identity(4, 4));
  const auto l = cholesky(a);
  REQUIRE((l.matrix() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cholesky of a diagonal matrix takes square roots") {
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 4.0, 9.0, 0.25;
  const auto l = cholesky(PosDefMatrix(d));
  REQUIRE(l(0, 0) == Catch::Approx(2.0));
  REQUIRE(l(1, 1) == Catch::Approx(3.0));
  REQUIRE(l(2, 2) == Catch::Approx(0.5));
  REQUIRE(l(1, 0) == 0.0);
}

TEST_CASE("factor reproduces a correlated two by two matrix") {
  Matrix a(2, 2);
  a << 1.0, 0.9, 0.9, 1.0;
  const auto l = cholesky(PosDefMatrix(a));
  const Matrix r = l.matrix() * l.matrix().transpose();
  REQUIRE((r - a).norm() / a.norm() <= 1e-14);
  REQUIRE(l(1, 0) == Catch::Approx(0.9));
  REQUIRE(l(1, 1) == Catch::Approx(std::sqrt(1.0 - 0.81)));
}

TEST_CASE("reconstruction error stays small over random spd matrices") {
  for (int d : {1, 2, 5, 20, 50}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Matrix a = test::random_spd(d, seed * 100 + d);
      const auto l = cholesky(PosDefMatrix(a));
      const Matrix r = l.matrix() * l.matrix().transpose();
      REQUIRE((r - a).norm() / a.norm() <= 1e-10);
      // Positive diagonal implies a positive determinant.
      for (int i = 0; i < d; ++i) REQUIRE(l(i, i) > 0.0);
    }
  }
}

TEST_CASE("log determinant matches cofactor expansions") {
  Matrix a(2, 2);
  a << 3.0, 1.0, 1.0, 2.0;  // det 5
  REQUIRE(log_det(PosDefMatrix(a)) == Catch::Approx(std::log(5.0)).epsilon(1e-12));

  Matrix b(3, 3);
  b << 4.0, 1.0, 0.5, 1.0, 3.0, 0.25, 0.5, 0.25, 2.0;
  // Cofactor expansion: 4*(6 - 0.0625) - 1*(2 - 0.125) + 0.5*(0.25 - 1.5).
  const double det = 4.0 * (3.0 * 2.0 - 0.0625) - 1.0 * (2.0 - 0.125) + 0.5 * (0.25 - 1.5);
  REQUIRE(log_det(PosDefMatrix(b)) == Catch::Approx(std::log(det)).epsilon(1e-12));
}

TEST_CASE("indefinite and asymmetric inputs are rejected") {
  Matrix neg(2, 2);
  neg << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  REQUIRE_THROWS_AS(PosDefMatrix(neg), NotPositiveDefinite);

  Matrix zero_pivot = Matrix::Identity(3, 3);
  zero_pivot(2, 2) = 0.0;
  REQUIRE_THROWS_AS(PosDefMatrix(zero_pivot), NotPositiveDefinite);

  Matrix asym(2, 2);
  asym << 1.0, 0.3, 0.300001, 1.0;
  REQUIRE_THROWS_AS(PosDefMatrix(asym), InvalidParameter);

  // Asymmetry at roundoff level is averaged away instead.
  Matrix tiny(2, 2);
  tiny << 1.0, 0.3, 0.3 + 1e-14, 1.0;
  const PosDefMatrix fixed(tiny);
  REQUIRE(fixed(0, 1) == fixed(1, 0));
}

TEST_CASE("triangular solves invert the factor") {
  const Matrix a = test::random_spd(6, 99);
  const auto l = cholesky(PosDefMatrix(a));
  Rng rng(7);
  Vector b(6);
  for (int i = 0; i < 6; ++i) b(i) = rng.normal();

  const Vector x = tri_solve(l, b);
  REQUIRE((l.matrix() * x - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());

  const Vector y = tri_solve_transposed(l, b);
  REQUIRE((l.matrix().transpose() * y - b).cwiseAbs().maxCoeff() <=
          1e-12 * b.cwiseAbs().maxCoeff());

  const Vector s = posdef_solve(PosDefMatrix(a), b);
  REQUIRE((a * s - b).cwiseAbs().maxCoeff() <= 1e-9 * b.cwiseAbs().maxCoeff());

  const Matrix inv = posdef_inverse(PosDefMatrix(a));
  REQUIRE((a * inv - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("dimension mismatches throw") {
  const auto l = cholesky(PosDefMatrix(Matrix::Identity(3, 3)));
  REQUIRE_THROWS_AS(tri_solve(l, Vector::Ones(2)), DimensionMismatch);
  REQUIRE_THROWS_AS(tri_solve_transposed(l, Vector::Ones(4)), DimensionMismatch);
}

TEST_CASE("factor construction rejects nonpositive diagonals") {
  Matrix l = Matrix::Identity(2, 2);
  l(1, 1) = -1.0;
  REQUIRE_THROWS_AS(LowerTriangularFactor(l), InvalidParameter);
}
