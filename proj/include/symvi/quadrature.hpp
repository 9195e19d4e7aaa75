#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "symvi/errors.hpp"

namespace symvi {

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int n_evals = 0;
};

namespace detail {

// 15-point Kronrod nodes on [-1, 1] (positive half) with Kronrod weights,
// and the embedded 7-point Gauss weights on the odd-indexed nodes.
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526, 0.949107912342758524526189684048,
    0.864864423359769072789712788641, 0.741531185599394439863864773281,
    0.586087235467691130294144838259, 0.405845151377397166906606412077,
    0.207784955007898467600689403773, 0.0};

inline constexpr double kGk15WeightsK[8] = {
    0.022935322010529224963732008059, 0.063092092629978553290700663189,
    0.104790010322250183839876322542, 0.140653259715525918745189590510,
    0.169004726639267902826583426599, 0.190350578064785409913256402421,
    0.204432940075298892414161999234, 0.209482141084727828012999174892};

inline constexpr double kGk15WeightsG[4] = {
    0.129484966168869693270611432679, 0.279705391489276667901467771424,
    0.381830050505118944950369775489, 0.417959183673469387755102040816};

struct Segment {
  double a, b;
  double value;
  double error;
};

template <class F>
inline Segment gk15(F&& f, double a, double b, int& n_evals) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double sk = 0.0;
  double sg = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double x = kGk15Nodes[i];
    double fv;
    if (i == 7) {
      fv = f(c);
      ++n_evals;
      sk += kGk15WeightsK[i] * fv;
      sg += kGk15WeightsG[3] * fv;
    } else {
      const double f1 = f(c - h * x);
      const double f2 = f(c + h * x);
      n_evals += 2;
      sk += kGk15WeightsK[i] * (f1 + f2);
      if (i % 2 == 1) sg += kGk15WeightsG[i / 2] * (f1 + f2);
    }
  }
  Segment s;
  s.a = a;
  s.b = b;
  s.value = sk * h;
  const double diff = std::abs((sk - sg) * h);
  // Scaling from QUADPACK: sharpens the raw Gauss/Kronrod gap.
  s.error = diff == 0.0 ? 0.0 : diff * std::min(1.0, std::pow(200.0 * diff / std::abs(s.value + diff + 1e-300), 1.5));
  if (!std::isfinite(s.value)) throw QuadratureFailure("non-finite integrand segment");
  return s;
}

}  // namespace detail

// Adaptive Gauss-Kronrod on a finite interval. Splits the segment with the
// largest error estimate until the total meets max(abs_tol, rel_tol*|value|).
// Deterministic: ties in the error ordering resolve by insertion order.
template <class F>
inline QuadratureResult integrate_adaptive(F&& f, double a, double b, double abs_tol = 1e-10,
                                           double rel_tol = 1e-10, int max_segments = 2000) {
  if (!(b > a)) throw InvalidParameter("integration interval is empty");
  int n_evals = 0;
  std::vector<detail::Segment> segs;
  segs.reserve(64);
  segs.push_back(detail::gk15(f, a, b, n_evals));
  for (;;) {
    double total = 0.0;
    double err = 0.0;
    std::size_t worst = 0;
    double worst_err = -1.0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      total += segs[i].value;
      err += segs[i].error;
      if (segs[i].error > worst_err) {
        worst_err = segs[i].error;
        worst = i;
      }
    }
    if (err <= std::max(abs_tol, rel_tol * std::abs(total))) {
      return {total, err, n_evals};
    }
    if (static_cast<int>(segs.size()) >= max_segments) {
      throw QuadratureFailure("adaptive quadrature failed to converge");
    }
    const detail::Segment s = segs[worst];
    const double m = 0.5 * (s.a + s.b);
    if (m <= s.a || m >= s.b) {
      throw QuadratureFailure("interval collapsed below machine resolution");
    }
    segs[worst] = detail::gk15(f, s.a, m, n_evals);
    segs.push_back(detail::gk15(f, m, s.b, n_evals));
  }
}

// Expands [lo, hi] geometrically until f changes sign across it.
// f(lo) must start positive or become positive as lo shrinks toward zero;
// used for root finding on strictly decreasing residuals with lo > 0.
template <class F>
inline std::pair<double, double> expand_bracket_decreasing(F&& f, double lo, double hi,
                                                           int max_expand = 200) {
  if (!(lo > 0.0) || !(hi > lo)) throw InvalidParameter("bracket must satisfy 0 < lo < hi");
  int k = 0;
  while (f(lo) <= 0.0) {
    lo *= 0.5;
    if (++k > max_expand) throw BracketFailure("no positive residual at small argument");
  }
  k = 0;
  while (f(hi) >= 0.0) {
    hi *= 2.0;
    if (++k > max_expand) throw BracketFailure("no negative residual at large argument");
  }
  return {lo, hi};
}

// Bisection for f decreasing across [lo, hi] with f(lo) > 0 > f(hi).
template <class F>
inline double bisect_decreasing(F&& f, double lo, double hi, double xtol = 1e-13,
                                int max_iter = 200) {
  for (int i = 0; i < max_iter; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= xtol * std::max(1.0, std::abs(mid))) return mid;
    const double fm = f(mid);
    if (fm > 0.0) {
      lo = mid;
    } else if (fm < 0.0) {
      hi = mid;
    } else {
      return mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace symvi
