#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <sstream>

#include "support.hpp"
#include "symvi/diagnostics.hpp"
#include "symvi/samplers.hpp"
#include "symvi/targets.hpp"

using namespace symvi;

namespace {

MomentSummary summary_2d(double m0, double m1, double v00, double v11, double v01,
                         double corr_offdiag) {
  MomentSummary s;
  s.mean = Vector(2);
  s.mean << m0, m1;
  s.covariance = Matrix(2, 2);
  s.covariance << v00, v01, v01, v11;
  s.correlation = Matrix(2, 2);
  s.correlation << 1.0, corr_offdiag, corr_offdiag, 1.0;
  s.mc_se_mean = Vector::Zero(2);
  s.n = 1000;
  return s;
}

}  // namespace

TEST_CASE("reflection violation at a hand computed point") {
  const auto t = make_mvn(Vector::Constant(1, 1.0), PosDefMatrix(Matrix::Identity(1, 1)));
  Vector z(1), mu(1);
  z << 3.0;
  mu << 0.0;
  // log p(3) = -log sqrt(2 pi) - 2, log p(-3) = -log sqrt(2 pi) - 8.
  REQUIRE(t.log_density(z) == Catch::Approx(-2.9189385332046727).epsilon(1e-14));
  REQUIRE(symmetry_violation(t, z, mu) ==
          Catch::Approx(6.0 / 2.9189385332046727).epsilon(1e-12));

  Vector bad_mu(2);
  REQUIRE_THROWS_AS(symmetry_violation(t, z, bad_mu), DimensionMismatch);
}

TEST_CASE("even targets score an exact zero when probed about their center") {
  Vector mu(2);
  mu << 0.3, -0.7;
  const auto mvn = make_mvn(mu, PosDefMatrix(test::equicorrelation(2, 0.5)));
  const auto rep = epsilon_90(mvn, sample_iid_mvn(mu, PosDefMatrix(test::equicorrelation(2, 0.5)),
                                                  500, 3),
                              mu);
  REQUIRE(rep.epsilon_90 <= 1e-9);
  REQUIRE(rep.n_samples == 500);
  REQUIRE(rep.n_degenerate == 0);
  REQUIRE(rep.mu_used == mu);
  REQUIRE_FALSE(rep.normalization.empty());

  const auto st =
      make_multi_student_t(Vector::Zero(2), PosDefMatrix(test::equicorrelation(2, 0.9)), 10.0);
  const auto rep2 = epsilon_90(
      st, sample_iid_student(Vector::Zero(2), PosDefMatrix(test::equicorrelation(2, 0.9)), 10.0,
                             500, 4),
      Vector::Zero(2));
  REQUIRE(rep2.epsilon_90 <= 1e-9);
}

TEST_CASE("mixture asymmetry about its mean lands in the published band") {
  const auto t = make_gaussian_mixture_2d();
  const Matrix draws = sample_iid_mixture_2d(4000, 7);
  const auto rep = epsilon_90(t, draws, Vector::Constant(2, 1.0));
  REQUIRE(rep.epsilon_90 >= 0.27);
  REQUIRE(rep.epsilon_90 <= 0.81);
  for (double e : rep.epsilon_values) REQUIRE(e > 0.0);
}

TEST_CASE("crescent asymmetry about its mean is far past the gate") {
  const auto t = make_crescent();
  const Matrix draws = sample_iid_crescent(4000, 9);
  const auto mom = estimate_moments(draws);
  const auto rep = epsilon_90(t, draws, mom.mean);
  REQUIRE(rep.epsilon_90 > 10.0);
}

TEST_CASE("degenerate probes are excluded and counted") {
  // Variance 1/(2 pi) makes the normalized log density exactly zero at the
  // center, tripping the denominator guard there and only there.
  const auto t =
      make_mvn(Vector::Zero(1), PosDefMatrix(Matrix::Constant(1, 1, 1.0 / (2.0 * kPi))));
  REQUIRE_THROWS_AS(symmetry_violation(t, Vector::Zero(1), Vector::Zero(1)),
                    DegenerateDenominator);

  Matrix draws = Matrix::Constant(150, 1, 0.5);
  draws.topRows(30).setZero();
  const auto rep = epsilon_90(t, draws, Vector::Zero(1));
  REQUIRE(rep.n_degenerate == 30);
  REQUIRE(rep.epsilon_values.size() == 120);
  REQUIRE(rep.epsilon_90 == 0.0);

  Matrix thin = Matrix::Constant(120, 1, 0.5);
  thin.topRows(30).setZero();
  REQUIRE_THROWS_AS(epsilon_90(t, thin, Vector::Zero(1)), TooFewValidSamples);
  REQUIRE_THROWS_AS(epsilon_90(t, Matrix::Constant(99, 1, 0.5), Vector::Zero(1)),
                    TooFewValidSamples);
}

TEST_CASE("moment estimates recover a correlated gaussian") {
  Vector mu(2);
  mu << 2.0, -1.0;
  const PosDefMatrix cov(test::equicorrelation(2, 0.9));
  const auto s = estimate_moments(sample_iid_mvn(mu, cov, 1000000, 5));
  REQUIRE(s.correlation(0, 1) == Catch::Approx(0.9).margin(0.003));
  REQUIRE(s.correlation(0, 0) == 1.0);
  REQUIRE(s.mean(0) == Catch::Approx(2.0).margin(4.0 * s.mc_se_mean(0)));
  REQUIRE(s.covariance(0, 0) == Catch::Approx(1.0).epsilon(0.01));
  REQUIRE(s.mc_se_mean(0) == Catch::Approx(0.001).epsilon(0.05));
  REQUIRE(s.covariance(0, 1) == s.covariance(1, 0));
  REQUIRE(s.n == 1000000);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(s.covariance);
  REQUIRE(eig.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("constant draws give zero spread and a unit correlation diagonal") {
  Matrix draws = Matrix::Zero(50, 2);
  draws.col(0).setConstant(3.0);
  draws.col(1).setConstant(-1.0);
  const auto s = estimate_moments(draws);
  REQUIRE(s.covariance.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(s.correlation(0, 0) == 1.0);
  REQUIRE(s.correlation(0, 1) == 0.0);
  REQUIRE(s.mc_se_mean(0) == 0.0);
  REQUIRE_THROWS_AS(estimate_moments(Matrix::Zero(1, 2)), TooFewValidSamples);
}

TEST_CASE("mean error uses the larger of spread and magnitude as its scale") {
  const auto p1 = summary_2d(0.0, 10.0, 1.0, 1.0, 0.0, 0.0);
  const auto q1 = summary_2d(0.1, 9.0, 1.0, 1.0, 0.0, 0.0);
  const Vector d = delta_mean(p1, q1);
  REQUIRE(d(0) == Catch::Approx(0.1).epsilon(1e-14));  // scale max(1, 0) = 1
  REQUIRE(d(1) == Catch::Approx(0.1).epsilon(1e-14));  // scale max(1, 10) = 10

  REQUIRE(delta_mean(p1, p1).cwiseAbs().maxCoeff() == 0.0);

  auto zero = summary_2d(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
  REQUIRE_THROWS_AS(delta_mean(zero, q1), ZeroScale);
}

TEST_CASE("correlation error is absolute and covariance error is relative") {
  const auto p = summary_2d(0.0, 0.0, 2.0, 1.0, 0.9, 0.9);
  const auto q = summary_2d(0.0, 0.0, 1.0, 1.0, 0.88, 0.88);
  REQUIRE(delta_corr(p, q)(0, 1) == Catch::Approx(0.02).epsilon(1e-10));
  REQUIRE(delta_cov(p, q)(0, 0) == Catch::Approx(0.5).epsilon(1e-14));

  // A zero reference entry cannot anchor a relative error.
  const auto flat = summary_2d(0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
  Matrix unstable;
  const Matrix dc = delta_cov(flat, q, &unstable);
  REQUIRE(std::isnan(dc(0, 1)));
  REQUIRE(unstable(0, 1) == 1.0);
  REQUIRE(unstable(0, 0) == 0.0);
}

TEST_CASE("error metrics ignore the units and origin they should ignore") {
  Rng rng(88);
  Matrix a(400, 2), b(400, 2);
  for (int i = 0; i < 400; ++i) {
    a(i, 0) = rng.normal() + 0.4;
    a(i, 1) = 0.5 * rng.normal();
    b(i, 0) = 1.2 * rng.normal();
    b(i, 1) = rng.normal() - 0.2;
  }
  const auto mp = estimate_moments(a);
  const auto mq = estimate_moments(b);

  // Pure rescaling of both samples: the mean error is unchanged.
  const auto mps = estimate_moments(Matrix(3.7 * a));
  const auto mqs = estimate_moments(Matrix(3.7 * b));
  REQUIRE((delta_mean(mps, mqs) - delta_mean(mp, mq)).cwiseAbs().maxCoeff() <= 1e-12);

  // Per-coordinate affine map: correlation and covariance errors survive.
  auto affine = [](const Matrix& m) {
    Matrix out = m;
    out.col(0) = 2.0 * m.col(0).array() + 5.0;
    out.col(1) = 0.5 * m.col(1).array() - 3.0;
    return out;
  };
  const auto mpa = estimate_moments(affine(a));
  const auto mqa = estimate_moments(affine(b));
  REQUIRE((delta_corr(mpa, mqa) - delta_corr(mp, mq)).cwiseAbs().maxCoeff() <= 1e-12);
  REQUIRE((delta_cov(mpa, mqa) - delta_cov(mp, mq)).cwiseAbs().maxCoeff() <= 1e-10);

  // Translation alone: covariance error is unchanged.
  auto shift = [](const Matrix& m) {
    Matrix out = m;
    out.array() += 7.0;
    return out;
  };
  REQUIRE((delta_cov(estimate_moments(shift(a)), estimate_moments(shift(b))) - delta_cov(mp, mq))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
}

TEST_CASE("error table aggregates skip unstable entries and serialize stably") {
  auto p = summary_2d(2.0, 4.0, 1.0, 4.0, 0.0, 0.0);
  auto q = summary_2d(3.0, 3.0, 4.0, 1.0, 1.0, 0.5);
  const auto t = make_error_table(p, q, 0.625);

  REQUIRE(t.per_coord_delta_mean(0) == 0.5);
  REQUIRE(t.per_coord_delta_mean(1) == 0.25);
  REQUIRE(t.mean_delta_mean == 0.375);
  REQUIRE(t.mean_delta_corr == 0.5);
  REQUIRE(t.mean_delta_cov == 1.875);  // stable entries: 3 and 0.75
  REQUIRE(t.unstable(0, 1) == 1.0);
  REQUIRE(std::isnan(t.pair_delta_cov(0, 1)));

  std::ostringstream os;
  write_errors_csv(t, os);
  const std::string expected =
      "coord,delta_mean,pair_i,pair_j,delta_corr,delta_cov,epsilon_90\n"
      "0,0.5,,,,,\n"
      "1,0.25,,,,,\n"
      ",,0,0,,3,\n"
      ",,0,1,0.5,,\n"
      ",,1,1,,0.75,\n"
      ",,,,,,0.625\n";
  REQUIRE(os.str() == expected);
}

TEST_CASE("empty error table writes its header only") {
  ErrorTable t;
  t.per_coord_delta_mean = Vector(0);
  t.pair_delta_corr = Matrix(0, 0);
  t.pair_delta_cov = Matrix(0, 0);
  t.unstable = Matrix(0, 0);
  std::ostringstream os;
  write_errors_csv(t, os);
  REQUIRE(os.str() == "coord,delta_mean,pair_i,pair_j,delta_corr,delta_cov,epsilon_90\n");
}

TEST_CASE("gaussian radial profile pins the scale multiplier at one") {
  const auto base = make_base(BaseKind::gaussian, 1);
  for (int d : {1, 2, 5, 10}) {
    const auto sol = solve_gamma([](double r) { return -r; }, d, base);
    INFO("dimension " << d);
    REQUIRE(sol.gamma == Catch::Approx(1.0).margin(1e-8));
    REQUIRE(sol.rel_residual <= 1e-8);
    REQUIRE(sol.bracket_lo < sol.gamma);
    REQUIRE(sol.bracket_hi > sol.gamma);
    REQUIRE(sol.n_evals > 0);
  }
}

TEST_CASE("heavier tails inflate the fitted scale, vanishing with the tail") {
  const int d = 10;
  const auto base = make_base(BaseKind::gaussian, 1);
  auto student_profile = [d](double df) {
    return [df, d](double r) { return -(df + d) * r / (df + r * r); };
  };
  const double g3 = solve_gamma(student_profile(3.0), d, base).gamma;
  const double g10 = solve_gamma(student_profile(10.0), d, base).gamma;
  const double g20 = solve_gamma(student_profile(20.0), d, base).gamma;
  const double g200 = solve_gamma(student_profile(200.0), d, base).gamma;
  REQUIRE(g3 > g10);
  REQUIRE(g10 > g20);
  REQUIRE(g20 > 1.0);
  REQUIRE(g200 > 1.0);
  REQUIRE(g200 - 1.0 < 0.05);

  // Independent route: the fixed point equates d / gamma with the mean of
  // -f'(gamma R) R over the base's radius distribution.
  Rng rng(61);
  for (double df : {3.0, 10.0}) {
    const double gamma = solve_gamma(student_profile(df), d, base).gamma;
    const int n = 400000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = std::sqrt(rng.chi_square(d));
      const double v = (df + d) * gamma * r / (df + gamma * gamma * r * r) * r;
      s += v;
      s2 += v * v;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    INFO("df " << df);
    REQUIRE(d / gamma == Catch::Approx(mean).margin(4.0 * se));
  }
}

TEST_CASE("scale solver rejects unusable inputs") {
  const auto gaussian_profile = [](double r) { return -r; };
  REQUIRE_THROWS_AS(solve_gamma(gaussian_profile, 2, make_base(BaseKind::laplace_iid, 1)),
                    InvalidParameter);
  REQUIRE_THROWS_AS(solve_gamma(gaussian_profile, 0, make_base(BaseKind::gaussian, 1)),
                    InvalidParameter);
  REQUIRE_THROWS_AS(solve_gamma(nullptr, 2, make_base(BaseKind::gaussian, 1)), InvalidParameter);

  for (double gamma : {0.5, 1.0, 2.0}) {
    const double rhs = gamma_equation_rhs([](double r) { return -r; }, 3, gamma);
    REQUIRE(rhs == Catch::Approx(3.0 * gamma).epsilon(1e-9));
  }
}

TEST_CASE("a fitted scale proportional to the reference is flagged as exact") {
  const PosDefMatrix m(test::equicorrelation(10, 0.9));
  const auto r = scale_recovery_check(Matrix(4.0 * m.matrix()), m);
  REQUIRE(r.gamma_hat == Catch::Approx(2.0).epsilon(1e-12));
  REQUIRE(r.max_abs_deviation <= 1e-12);

  const PosDefMatrix eye(Matrix::Identity(2, 2));
  Matrix s(2, 2);
  s << 1.2, 0.0, 0.0, 0.8;
  const auto r2 = scale_recovery_check(s, eye);
  REQUIRE(r2.gamma_hat == Catch::Approx(1.0).epsilon(1e-14));
  REQUIRE(r2.max_abs_deviation == Catch::Approx(0.2).epsilon(1e-12));

  REQUIRE_THROWS_AS(scale_recovery_check(Matrix::Identity(3, 3), eye), DimensionMismatch);
  REQUIRE_THROWS_AS(scale_recovery_check(Matrix(-Matrix::Identity(2, 2)), eye), InvalidParameter);
}

TEST_CASE("divergence along a location segment bends the right way") {
  auto q1 = make_approx(make_base(BaseKind::gaussian, 1), ScaleMode::mean_field);

  const auto gaussian = make_mvn(Vector::Zero(1), PosDefMatrix(Matrix::Identity(1, 1)));
  const auto flat = kl_convexity_probe(gaussian, q1, Vector::Constant(1, -2.0),
                                       Vector::Constant(1, 2.0), 9);
  REQUIRE(flat.convex);
  REQUIRE(flat.ts.front() == 0.0);
  REQUIRE(flat.ts.back() == 1.0);
  REQUIRE(flat.kl.size() == 9);

  const auto near = kl_convexity_probe(make_gaussian_mixture_1d(1.0), q1,
                                       Vector::Constant(1, -3.0), Vector::Constant(1, 3.0), 13);
  REQUIRE(near.convex);

  const auto far = kl_convexity_probe(make_gaussian_mixture_1d(10.0), q1,
                                      Vector::Constant(1, -10.0), Vector::Constant(1, 10.0), 21);
  REQUIRE_FALSE(far.convex);
  REQUIRE(far.min_second_difference < 0.0);

  auto q2 = make_approx(make_base(BaseKind::gaussian, 2), ScaleMode::mean_field);
  Vector a2(2), b2(2);
  a2 << -1.5, -1.0;
  b2 << 1.5, 1.0;
  const auto planar =
      kl_convexity_probe(make_mvn(Vector::Zero(2), PosDefMatrix(test::equicorrelation(2, 0.5))),
                         q2, a2, b2, 7);
  REQUIRE(planar.convex);

  auto q3 = make_approx(make_base(BaseKind::gaussian, 3), ScaleMode::mean_field);
  const auto spatial = kl_convexity_probe(
      make_mvn(Vector::Zero(3), PosDefMatrix(test::random_spd(3, 2))), q3,
      Vector::Constant(3, -1.0), Vector::Constant(3, 1.0), 9);
  REQUIRE(spatial.convex);

  REQUIRE_THROWS_AS(kl_convexity_probe(gaussian, q1, Vector::Zero(1), Vector::Ones(1), 2),
                    InvalidParameter);
  REQUIRE_THROWS_AS(kl_convexity_probe(gaussian, q1, Vector::Zero(2), Vector::Ones(1), 5),
                    DimensionMismatch);
}
