#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "symvi/errors.hpp"
#include "symvi/linalg.hpp"
#include "symvi/rng.hpp"
#include "symvi/targets.hpp"

namespace symvi {

namespace detail {

// Iterative radix-2 FFT, in place. Length must be a power of two.
inline void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

// Autocovariances c_0..c_{m-1} with 1/n normalization, via FFT.
inline std::vector<double> autocovariance(const std::vector<double>& x, std::size_t m) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  std::size_t size = 1;
  while (size < 2 * n) size <<= 1;
  std::vector<std::complex<double>> a(size);
  for (std::size_t i = 0; i < n; ++i) a[i] = x[i] - mean;
  fft(a, false);
  for (auto& v : a) v = v * std::conj(v);
  fft(a, true);
  std::vector<double> c(m);
  for (std::size_t t = 0; t < m && t < n; ++t) c[t] = a[t].real() / static_cast<double>(n);
  return c;
}

}  // namespace detail

// Effective sample size by Geyer's initial positive sequence: sum paired
// autocorrelations Gamma_m = rho_{2m} + rho_{2m+1} while positive, then
// ess = n / (2 sum Gamma - 1), clipped into [1, n].
inline double effective_sample_size_1d(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 4) throw TooFewValidSamples("ess: need at least four draws");
  const std::vector<double> c = detail::autocovariance(x, n);
  if (!(c[0] > 0.0)) return 1.0;
  double sum_gamma = 0.0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double gamma = (c[2 * m] + c[2 * m + 1]) / c[0];
    if (gamma <= 0.0) break;
    sum_gamma += gamma;
  }
  const double tau = std::max(1.0, 2.0 * sum_gamma - 1.0);
  return std::min(static_cast<double>(n), std::max(1.0, static_cast<double>(n) / tau));
}

inline Vector effective_sample_size(const Matrix& draws) {
  Vector ess(draws.cols());
  std::vector<double> x(draws.rows());
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    for (Eigen::Index i = 0; i < draws.rows(); ++i) x[i] = draws(i, j);
    ess(j) = effective_sample_size_1d(x);
  }
  return ess;
}

enum class ChainAlgorithm { rwm_adaptive, hmc_fixed };

struct ChainConfig {
  ChainAlgorithm algorithm = ChainAlgorithm::rwm_adaptive;
  int n_warmup = 1000;
  int n_samples = 4000;
  std::uint64_t seed = 0;
  Vector init;  // empty means the origin
  // rwm_adaptive: proposal scale adapted during warmup toward target_accept,
  // then frozen for the sampling phase.
  double rwm_init_scale = 0.5;
  double rwm_target_accept = 0.3;
  // hmc_fixed: no adaptation at all.
  double hmc_step_size = 0.05;
  int hmc_n_leapfrog = 32;
};

struct ChainOutput {
  Matrix draws;  // n_samples rows
  double acceptance_rate = 0.0;
  Vector ess;
  bool zero_acceptance_warning = false;
  double proposal_scale = 0.0;  // frozen scale (rwm) or step size (hmc)
};

inline ChainOutput run_chain(const TargetDensity& target, const ChainConfig& cfg) {
  if (cfg.n_samples < 4 || cfg.n_warmup < 0) {
    throw InvalidParameter("chain: need n_samples >= 4 and nonnegative warmup");
  }
  const int d = target.dim;
  Vector z = cfg.init.size() == 0 ? Vector::Zero(d) : cfg.init;
  if (z.size() != d) throw DimensionMismatch("chain: init dimension mismatch");
  double lp = target.log_density(z);
  if (!std::isfinite(lp)) {
    throw NonFiniteDensity(target.name + ": non-finite log density at the chain start");
  }

  Rng rng(derive_seed(cfg.seed, 0x31));
  ChainOutput out;
  out.draws.resize(cfg.n_samples, d);
  int accepted = 0;

  if (cfg.algorithm == ChainAlgorithm::rwm_adaptive) {
    double log_scale = std::log(cfg.rwm_init_scale);
    Vector prop(d);
    for (int t = 0; t < cfg.n_warmup + cfg.n_samples; ++t) {
      const double scale = std::exp(log_scale);
      for (int j = 0; j < d; ++j) prop(j) = z(j) + scale * rng.normal();
      const double lp_prop = target.log_density(prop);
      const double alpha =
          std::isfinite(lp_prop) ? std::min(1.0, std::exp(lp_prop - lp)) : 0.0;
      if (rng.uniform() < alpha) {
        z = prop;
        lp = lp_prop;
        if (t >= cfg.n_warmup) ++accepted;
      }
      if (t < cfg.n_warmup) {
        // Robbins-Monro step toward the target acceptance rate.
        log_scale += (alpha - cfg.rwm_target_accept) / std::pow(t + 1.0, 0.6);
      } else {
        out.draws.row(t - cfg.n_warmup) = z.transpose();
      }
    }
    out.proposal_scale = std::exp(log_scale);
  } else {
    const double eps = cfg.hmc_step_size;
    const int leaps = cfg.hmc_n_leapfrog;
    if (!(eps > 0.0) || leaps < 1) throw InvalidParameter("chain: bad leapfrog settings");
    Vector grad = target.grad_log_density(z);
    Vector p(d), zq(d), gq(d);
    for (int t = 0; t < cfg.n_warmup + cfg.n_samples; ++t) {
      for (int j = 0; j < d; ++j) p(j) = rng.normal();
      const double h0 = -lp + 0.5 * p.squaredNorm();
      zq = z;
      gq = grad;
      Vector pq = p;
      bool finite = true;
      for (int s = 0; s < leaps; ++s) {
        pq += 0.5 * eps * gq;
        zq += eps * pq;
        const double lpx = target.log_density(zq);
        if (!std::isfinite(lpx)) {
          finite = false;
          break;
        }
        gq = target.grad_log_density(zq);
        pq += 0.5 * eps * gq;
      }
      double alpha = 0.0;
      if (finite) {
        const double h1 = -target.log_density(zq) + 0.5 * pq.squaredNorm();
        alpha = std::min(1.0, std::exp(h0 - h1));
      }
      if (finite && rng.uniform() < alpha) {
        z = zq;
        grad = gq;
        lp = target.log_density(z);
        if (t >= cfg.n_warmup) ++accepted;
      }
      if (t >= cfg.n_warmup) out.draws.row(t - cfg.n_warmup) = z.transpose();
    }
    out.proposal_scale = eps;
  }

  out.acceptance_rate = static_cast<double>(accepted) / cfg.n_samples;
  out.zero_acceptance_warning = out.acceptance_rate < 0.01;
  out.ess = effective_sample_size(out.draws);
  return out;
}

}  // namespace symvi
