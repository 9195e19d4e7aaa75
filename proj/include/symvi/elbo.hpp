#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "symvi/errors.hpp"
#include "symvi/families.hpp"
#include "symvi/quadrature.hpp"
#include "symvi/targets.hpp"

namespace symvi {

// Monte Carlo evidence lower bound. value is always the mean of per_draw,
// where per_draw[i] = log p~(z_i) - log q(z_i).
struct ElboEstimate {
  double value = 0.0;
  std::vector<double> per_draw;
  int n_draws = 0;
  std::uint64_t seed = 0;
  double std_error = 0.0;
};

// Draws with a non-finite target log density are dropped, up to
// max_rejections of them; one more throws NonFiniteDensity.
inline ElboEstimate estimate_elbo(const TargetDensity& target, const LocationScaleApprox& q,
                                  int n_draws, std::uint64_t seed, int max_rejections = 0) {
  if (target.dim != q.dim()) throw DimensionMismatch("elbo: target and family dimensions differ");
  if (n_draws < 2) throw InvalidParameter("elbo: need at least two draws");
  const Matrix zeta = sample_base_noise(q.base, n_draws, seed);
  const Matrix z = transform_noise(q, zeta);
  const double half_log_det = q.half_log_det();

  ElboEstimate e;
  e.n_draws = n_draws;
  e.seed = seed;
  e.per_draw.reserve(n_draws);
  int rejected = 0;
  for (int i = 0; i < n_draws; ++i) {
    const double lp = target.log_density(z.row(i).transpose());
    if (!std::isfinite(lp)) {
      if (++rejected > max_rejections) {
        throw NonFiniteDensity(target.name + ": non-finite log density at a sampled point (" +
                               std::to_string(rejected) + " rejections exceed budget)");
      }
      continue;
    }
    const double lq = base_log_density(q.base, zeta.row(i).transpose()) - half_log_det;
    e.per_draw.push_back(lp - lq);
  }
  const int m = static_cast<int>(e.per_draw.size());
  if (m < 2) throw NonFiniteDensity("elbo: fewer than two finite draws survived");
  double s = 0.0;
  for (double v : e.per_draw) s += v;
  e.value = s / m;
  double s2 = 0.0;
  for (double v : e.per_draw) s2 += (v - e.value) * (v - e.value);
  e.std_error = std::sqrt(s2 / (m - 1.0) / m);
  return e;
}

// Pathwise (reparameterization) gradient of the ELBO in packed coordinates.
// Uses the same noise stream as estimate_elbo for the same (n_draws, seed),
// so seeded finite differences of estimate_elbo converge to this vector.
//
// With z = nu + L zeta and g = grad log p~(z):
//   d/d nu        : E[g]
//   d/d log L_ii  : E[g_i zeta_i] L_ii + 1   (the +1 is the entropy term)
//   d/d L_ij, i>j : E[g_i zeta_j]
inline Vector grad_elbo(const TargetDensity& target, const LocationScaleApprox& q, int n_draws,
                        std::uint64_t seed) {
  if (target.dim != q.dim()) throw DimensionMismatch("elbo: target and family dimensions differ");
  if (n_draws < 1) throw InvalidParameter("elbo: need at least one draw");
  const int d = q.dim();
  const Matrix zeta = sample_base_noise(q.base, n_draws, seed);
  const Matrix z = transform_noise(q, zeta);

  Vector g_nu = Vector::Zero(d);
  Vector g_diag = Vector::Zero(d);          // against L_ii, before the log-diag chain rule
  Matrix g_lower = Matrix::Zero(d, d);
  for (int i = 0; i < n_draws; ++i) {
    const Vector g = target.grad_log_density(z.row(i).transpose());
    for (int a = 0; a < d; ++a) {
      if (!std::isfinite(g(a))) {
        throw NonFiniteGradient(target.name + ": non-finite gradient at a sampled point");
      }
    }
    g_nu += g;
    for (int a = 0; a < d; ++a) {
      g_diag(a) += g(a) * zeta(i, a);
      if (q.mode == ScaleMode::full_rank) {
        for (int b = 0; b < a; ++b) g_lower(a, b) += g(a) * zeta(i, b);
      }
    }
  }
  g_nu /= n_draws;
  g_diag /= n_draws;
  g_lower /= n_draws;

  Vector out(packed_size(q));
  out.head(d) = g_nu;
  if (q.mode != ScaleMode::location_only) {
    for (int a = 0; a < d; ++a) {
      out(d + a) = g_diag(a) * std::exp(q.log_diag(a)) + 1.0;
    }
  }
  if (q.mode == ScaleMode::full_rank) {
    int k = 2 * d;
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < a; ++b) out(k++) = g_lower(a, b);
    }
  }
  return out;
}

struct OptimizerConfig {
  int n_draws_per_step = 1000;
  int max_steps = 5000;
  double step_size = 0.05;
  double step_decay = 0.999;
  std::uint64_t seed = 0;
  int convergence_window = 100;
  double convergence_tol = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_rejections_per_step = 0;
};

struct TraceStep {
  int step = 0;
  double elbo = 0.0;
  double std_error = 0.0;
  double grad_norm = 0.0;
  double step_scale = 0.0;
};

struct OptimizationTrace {
  std::vector<TraceStep> steps;
  bool converged = false;
  int best_step = -1;
  double best_elbo = 0.0;
};

struct OptimizeResult {
  LocationScaleApprox q;
  OptimizationTrace trace;
};

inline void validate(const OptimizerConfig& cfg) {
  if (cfg.n_draws_per_step < 2 || cfg.max_steps < 1) {
    throw InvalidParameter("optimizer: draws per step and steps must be positive");
  }
  if (!(cfg.step_size > 0.0) || !(cfg.step_decay > 0.0) || cfg.step_decay > 1.0) {
    throw InvalidParameter("optimizer: step size must be positive, decay in (0, 1]");
  }
  if (cfg.convergence_window < 1 || !(cfg.convergence_tol >= 0.0)) {
    throw InvalidParameter("optimizer: bad convergence window or tolerance");
  }
}

// Adam-style stochastic ascent on the ELBO. Each step draws fresh noise from
// a seed derived from (cfg.seed, step), estimates value and gradient with the
// same draws, and updates the packed parameters. Stops early once the mean
// ELBO over the last window improves on the previous window by less than
// convergence_tol. Returns the iterate with the highest estimated ELBO.
// The selection estimate reuses one fixed noise stream with a larger draw
// count, evaluated every few steps: comparing iterates on shared draws
// removes the bias toward far iterates whose fresh-noise estimates have the
// largest variance, and the bigger sample keeps the shared stream's own
// location and scale error well inside the recovery tolerances.
inline OptimizeResult optimize(const TargetDensity& target, const LocationScaleApprox& q0,
                               const OptimizerConfig& cfg) {
  validate(cfg);
  validate(q0);
  if (target.dim != q0.dim()) throw DimensionMismatch("optimize: dimension mismatch");

  Vector theta = pack(q0);
  const Eigen::Index p = theta.size();
  Vector m = Vector::Zero(p), v = Vector::Zero(p);
  LocationScaleApprox q = q0;

  OptimizationTrace trace;
  trace.steps.reserve(cfg.max_steps);
  Vector best_theta = theta;
  double best_elbo = -INFINITY;
  int best_step = -1;
  std::vector<double> history;
  history.reserve(cfg.max_steps);

  double lr = cfg.step_size;
  const std::uint64_t selection_seed = derive_seed(cfg.seed, 0x5e1ec7);
  const int selection_draws = std::min(16 * cfg.n_draws_per_step, 20000);
  const auto consider = [&](int step) {
    try {
      const ElboEstimate sel =
          estimate_elbo(target, q, selection_draws, selection_seed, cfg.max_rejections_per_step);
      if (std::isfinite(sel.value) && sel.value > best_elbo) {
        best_elbo = sel.value;
        best_theta = theta;
        best_step = step;
      }
    } catch (const Error&) {
      // An iterate whose shared-draw estimate fails is never the winner.
    }
  };
  int last_step = 0;
  for (int step = 0; step < cfg.max_steps; ++step) {
    last_step = step;
    const std::uint64_t step_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(step) + 1);
    const ElboEstimate e =
        estimate_elbo(target, q, cfg.n_draws_per_step, step_seed, cfg.max_rejections_per_step);
    const Vector g = grad_elbo(target, q, cfg.n_draws_per_step, step_seed);

    if (!std::isfinite(e.value)) {
      throw Diverged("optimize: non-finite ELBO at step " + std::to_string(step));
    }
    if (step % 10 == 0) consider(step);
    trace.steps.push_back({step, e.value, e.std_error, g.norm(), lr});
    history.push_back(e.value);

    // Windowed improvement test on disjoint trailing windows.
    const int w = cfg.convergence_window;
    if (static_cast<int>(history.size()) >= 2 * w) {
      double recent = 0.0, previous = 0.0;
      const std::size_t n = history.size();
      for (int i = 0; i < w; ++i) {
        recent += history[n - 1 - i];
        previous += history[n - 1 - w - i];
      }
      if ((recent - previous) / w < cfg.convergence_tol) {
        trace.converged = true;
        break;
      }
    }

    const double b1t = 1.0 - std::pow(cfg.adam_beta1, step + 1);
    const double b2t = 1.0 - std::pow(cfg.adam_beta2, step + 1);
    for (Eigen::Index i = 0; i < p; ++i) {
      m(i) = cfg.adam_beta1 * m(i) + (1.0 - cfg.adam_beta1) * g(i);
      v(i) = cfg.adam_beta2 * v(i) + (1.0 - cfg.adam_beta2) * g(i) * g(i);
      theta(i) += lr * (m(i) / b1t) / (std::sqrt(v(i) / b2t) + cfg.adam_eps);
    }
    if (!theta.allFinite()) {
      std::string tail;
      for (std::size_t i = trace.steps.size() > 5 ? trace.steps.size() - 5 : 0;
           i < trace.steps.size(); ++i) {
        tail += " step " + std::to_string(trace.steps[i].step) + " elbo " +
                std::to_string(trace.steps[i].elbo) + ";";
      }
      throw Diverged("optimize: parameters left the finite range;" + tail);
    }
    lr *= cfg.step_decay;
    q = unpack(theta, q0);
  }
  // The finest-step iterate is always a candidate.
  consider(last_step);

  trace.best_step = best_step;
  trace.best_elbo = best_elbo;
  OptimizeResult out{unpack(best_theta, q0), std::move(trace)};
  return out;
}

// Deterministic KL(q_nu || p) for one-dimensional targets by adaptive
// quadrature, up to the target's normalizing constant:
//   KL = -H(q0) - log s - int q0(u) log p~(nu + s u) du.
inline double kl_quadrature_1d(const TargetDensity& target, const BaseDensity& base, double nu,
                               double s, double abs_tol = 1e-10, double rel_tol = 1e-10) {
  if (target.dim != 1 || base.dim != 1) throw DimensionMismatch("kl quadrature needs dim 1");
  if (!(s > 0.0)) throw InvalidParameter("kl quadrature: scale must be positive");
  const double r = base_coord_support_radius(base);
  double h0;
  if (auto h = base_entropy_closed(base)) {
    h0 = *h;
  } else {
    h0 = -integrate_adaptive(
              [&](double u) {
                const double lq = base_coord_log_density(base, u);
                return std::exp(lq) * lq;
              },
              -r, r, abs_tol, rel_tol)
              .value;
  }
  const auto cross = integrate_adaptive(
      [&](double u) {
        Vector z(1);
        z(0) = nu + s * u;
        const double lp = target.log_density(z);
        if (!std::isfinite(lp)) throw QuadratureFailure("kl quadrature: non-finite log density");
        return std::exp(base_coord_log_density(base, u)) * lp;
      },
      -r, r, abs_tol, rel_tol);
  return -h0 - std::log(s) - cross.value;
}

struct GridSearch1DResult {
  std::vector<double> nus;
  std::vector<double> kl;
  int argmin_index = -1;
  double best_nu = 0.0;
};

// Exhaustive location sweep with the scale held fixed. Deterministic:
// every KL value comes from quadrature, not sampling.
inline GridSearch1DResult grid_search_1d(const TargetDensity& target, const BaseDensity& base,
                                         double s, double nu_lo, double nu_hi, double step) {
  if (!(step > 0.0) || !(nu_hi > nu_lo)) throw InvalidParameter("grid search: bad grid");
  GridSearch1DResult r;
  const int n = static_cast<int>(std::floor((nu_hi - nu_lo) / step + 1e-9)) + 1;
  r.nus.reserve(n);
  r.kl.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double nu = nu_lo + i * step;
    const double kl = kl_quadrature_1d(target, base, nu, s);
    r.nus.push_back(nu);
    r.kl.push_back(kl);
    if (r.argmin_index < 0 || kl < r.kl[r.argmin_index]) r.argmin_index = i;
  }
  r.best_nu = r.nus[r.argmin_index];
  return r;
}

}  // namespace symvi
