#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "symvi/dataset.hpp"
#include "symvi/mathutil.hpp"
#include "symvi/targets.hpp"

namespace symvi {

// Data-driven posteriors. Convention: additive terms that do not involve the
// latent variables (normalizing constants of fixed-scale likelihood factors,
// binomial coefficients) are dropped, matching what probabilistic-programming
// log-density accumulators report. Terms involving any latent are kept.

// Bayesian logistic regression on (1, x1, x2) with iid Laplace(0, 1/2)
// coefficient priors. With no rows the target is the bare prior, which is
// even-symmetric about the origin.
inline TargetDensity make_logistic_regression(const DatasetFixture& data) {
  data.validate();
  const std::vector<double> x1 = data.column("x1");
  const std::vector<double> x2 = data.column("x2");
  const std::vector<double> y = data.column("y");
  const std::size_t n = y.size();
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw InvalidParameter("logistic: outcomes must be 0 or 1");
  }

  TargetDensity t;
  t.name = "logistic";
  t.dim = 3;
  t.log_density = [x1, x2, y, n](const Vector& beta) {
    // Laplace(0, 1/2) prior: log density -2|b| - log(1) per coordinate.
    double lp = -2.0 * beta.cwiseAbs().sum();
    for (std::size_t i = 0; i < n; ++i) {
      const double eta = beta(0) + beta(1) * x1[i] + beta(2) * x2[i];
      lp += y[i] == 1.0 ? log_sigmoid(eta) : log_sigmoid(-eta);
    }
    return lp;
  };
  t.grad_log_density = [x1, x2, y, n](const Vector& beta) {
    Vector g(3);
    for (int j = 0; j < 3; ++j) g(j) = -2.0 * sign(beta(j));
    for (std::size_t i = 0; i < n; ++i) {
      const double eta = beta(0) + beta(1) * x1[i] + beta(2) * x2[i];
      const double resid = y[i] - 1.0 / (1.0 + std::exp(-eta));
      g(0) += resid;
      g(1) += resid * x1[i];
      g(2) += resid * x2[i];
    }
    return g;
  };
  t.near_nonsmooth = [](const Vector& beta) { return beta.cwiseAbs().minCoeff() < 1e-6; };
  t.log_concave = true;
  if (n == 0) {
    t.known_moments.mean = Vector::Zero(3);
    t.known_moments.covariance = 0.5 * Matrix::Identity(3, 3);
    t.known_moments.symmetry_point = Vector::Zero(3);
    t.even_symmetric = true;
  }
  return t;
}

// Hierarchical school-effects posterior over z = (mu, log tau, theta_1..J)
// when centered, or z = (mu, log tau, eps_1..J) with theta_i = mu + tau eps_i
// when not. Priors: mu ~ N(5, 3^2), tau ~ N+(0, 5^2). The log-tau transform
// contributes its Jacobian term + log tau.
inline TargetDensity make_eight_schools(const DatasetFixture& data, bool centered) {
  data.validate();
  const std::vector<double> y = data.column("y");
  const std::vector<double> sigma = data.column("sigma");
  const int j_schools = static_cast<int>(y.size());
  if (j_schools == 0) throw InvalidParameter("eight schools: need at least one school");
  for (double s : sigma) {
    if (!(s > 0.0)) throw InvalidParameter("eight schools: sigma must be positive");
  }

  TargetDensity t;
  t.name = centered ? "eight_schools" : "eight_schools_nc";
  t.dim = j_schools + 2;
  if (centered) {
    t.log_density = [y, sigma, j_schools](const Vector& z) {
      const double mu = z(0), log_tau = z(1), tau = std::exp(log_tau);
      double lp = -(mu - 5.0) * (mu - 5.0) / 18.0 - tau * tau / 50.0 + log_tau;
      for (int i = 0; i < j_schools; ++i) {
        const double theta = z(2 + i);
        lp += -log_tau - 0.5 * (theta - mu) * (theta - mu) / (tau * tau);
        lp += -0.5 * (y[i] - theta) * (y[i] - theta) / (sigma[i] * sigma[i]);
      }
      return lp;
    };
    t.grad_log_density = [y, sigma, j_schools](const Vector& z) {
      const double mu = z(0), log_tau = z(1), tau = std::exp(log_tau);
      Vector g = Vector::Zero(j_schools + 2);
      g(0) = -(mu - 5.0) / 9.0;
      g(1) = -tau * tau / 25.0 - j_schools + 1.0;
      for (int i = 0; i < j_schools; ++i) {
        const double theta = z(2 + i);
        const double dev = theta - mu;
        g(0) += dev / (tau * tau);
        g(1) += dev * dev / (tau * tau);
        g(2 + i) = -dev / (tau * tau) + (y[i] - theta) / (sigma[i] * sigma[i]);
      }
      return g;
    };
  } else {
    t.log_density = [y, sigma, j_schools](const Vector& z) {
      const double mu = z(0), log_tau = z(1), tau = std::exp(log_tau);
      double lp = -(mu - 5.0) * (mu - 5.0) / 18.0 - tau * tau / 50.0 + log_tau;
      for (int i = 0; i < j_schools; ++i) {
        const double eps = z(2 + i);
        const double resid = y[i] - mu - tau * eps;
        lp += -0.5 * eps * eps - 0.5 * resid * resid / (sigma[i] * sigma[i]);
      }
      return lp;
    };
    t.grad_log_density = [y, sigma, j_schools](const Vector& z) {
      const double mu = z(0), log_tau = z(1), tau = std::exp(log_tau);
      Vector g = Vector::Zero(j_schools + 2);
      g(0) = -(mu - 5.0) / 9.0;
      g(1) = -tau * tau / 25.0 + 1.0;
      for (int i = 0; i < j_schools; ++i) {
        const double eps = z(2 + i);
        const double resid = (y[i] - mu - tau * eps) / (sigma[i] * sigma[i]);
        g(0) += resid;
        g(1) += resid * eps * tau;
        g(2 + i) = -eps + resid * tau;
      }
      return g;
    };
  }
  t.log_concave = false;
  t.even_symmetric = false;
  return t;
}

// Binomial regression with a quadratic predictor in the covariate and wide
// independent N(0, 100^2) priors on (alpha, b1, b2).
inline TargetDensity make_binomial_glm(const DatasetFixture& data) {
  data.validate();
  const std::vector<double> ye = data.column("ye");
  const std::vector<double> trials = data.column("N");
  const std::vector<double> counts = data.column("C");
  const std::size_t n = ye.size();
  if (n == 0) throw InvalidParameter("glm: need at least one row");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(trials[i] >= 0.0) || counts[i] < 0.0 || counts[i] > trials[i]) {
      throw InvalidParameter("glm: counts must satisfy 0 <= C <= N");
    }
  }

  TargetDensity t;
  t.name = "glm";
  t.dim = 3;
  t.log_density = [ye, trials, counts, n](const Vector& z) {
    double lp = -z.squaredNorm() / (2.0 * 1e4);
    for (std::size_t i = 0; i < n; ++i) {
      const double eta = z(0) + z(1) * ye[i] + z(2) * ye[i] * ye[i];
      lp += counts[i] * eta - trials[i] * log1p_exp(eta);
    }
    return lp;
  };
  t.grad_log_density = [ye, trials, counts, n](const Vector& z) {
    Vector g = -z / 1e4;
    for (std::size_t i = 0; i < n; ++i) {
      const double eta = z(0) + z(1) * ye[i] + z(2) * ye[i] * ye[i];
      const double resid = counts[i] - trials[i] / (1.0 + std::exp(-eta));
      g(0) += resid;
      g(1) += resid * ye[i];
      g(2) += resid * ye[i] * ye[i];
    }
    return g;
  };
  t.log_concave = true;
  t.even_symmetric = false;
  return t;
}

}  // namespace symvi
