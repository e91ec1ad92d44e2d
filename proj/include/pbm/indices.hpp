#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pbm/model.hpp"
#include "pbm/stats.hpp"

namespace pbm {

struct IndexResult {
  double value = 0.0;
  bool at_boundary = false;  // true when the index saturates at 1
};

// Hoeffding-type optimistic index S_k/N~_k + sqrt(N_k/N~_k) sqrt(delta/(2 N~_k)).
// Not clipped to 1 so the argument ordering among arms is preserved.
inline double ucb_index(const CounterSet& counters, int arm, double delta) {
  const std::int64_t n = counters.total_plays(arm);
  if (n < 1) throw std::invalid_argument("ucb_index: arm " + std::to_string(arm) + " has no data");
  const double nt = counters.corrected_plays(arm);
  const double mean = static_cast<double>(counters.total_clicks(arm)) / nt;
  return mean + std::sqrt(static_cast<double>(n) / nt) * std::sqrt(delta / (2.0 * nt));
}

namespace detail {

// Precomputed per-position pieces of Phi(q) = sum_l N_l d(S_l/N_l, kappa_l q)
// over positions with N_l > 0. Writing d(p, x) = p log p + (1-p) log(1-p)
//   - p log x - (1-p) log(1-x) gives two logs per term in the hot loop.
struct PhiProfile {
  struct Term {
    double kappa;
    double a;        // N_l * p_l
    double b;        // N_l * (1 - p_l)
    double entropy;  // N_l * (p_l log p_l + (1-p_l) log(1-p_l))
  };
  std::vector<Term> terms;
  double total_a = 0.0;

  bool empty() const { return terms.empty(); }

  double value(double q) const {
    double s = 0.0;
    for (const Term& t : terms) {
      const double x = t.kappa * q;
      if (x <= 0.0) {
        if (t.a > 0.0) return std::numeric_limits<double>::infinity();
        s += t.entropy;  // p = 0: d(0,0) = 0, entropy term is 0 as well
        continue;
      }
      if (x >= 1.0) {
        if (t.b > 0.0) return std::numeric_limits<double>::infinity();
        s += t.entropy - t.a * std::log(x);
        continue;
      }
      s += t.entropy - t.a * std::log(x) - t.b * std::log1p(-x);
    }
    return s;
  }

  // d/dq of the above; strictly increasing in q, no logs involved.
  double derivative(double q) const {
    double s = 0.0;
    for (const Term& t : terms) {
      const double x = t.kappa * q;
      s += -t.a / q + t.b * t.kappa / (1.0 - x);
    }
    return s;
  }
};

inline PhiProfile make_phi_profile(const CounterSet& counters, int arm) {
  PhiProfile prof;
  for (int l = 1; l <= counters.num_positions(); ++l) {
    const std::int64_t n = counters.plays(arm, l);
    if (n == 0) continue;
    const std::int64_t s = counters.clicks(arm, l);
    const double nd = static_cast<double>(n);
    const double p = static_cast<double>(s) / nd;
    PhiProfile::Term t;
    t.kappa = counters.kappa()[static_cast<std::size_t>(l - 1)];
    t.a = nd * p;
    t.b = nd * (1.0 - p);
    double entropy = 0.0;
    if (p > 0.0) entropy += nd * p * std::log(p);
    if (p < 1.0) entropy += nd * (1.0 - p) * std::log(1.0 - p);
    t.entropy = entropy;
    prof.terms.push_back(t);
    prof.total_a += t.a;
  }
  return prof;
}

// Golden-section minimizer, used as fallback when derivative signs are not
// informative (non-finite values at the probe points).
template <class F>
double golden_min(F&& f, double lo, double hi, double tol) {
  static const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// argmin of the convex Phi over [0,1] to 1e-10, by bisection on the sign of
// the derivative.
inline double phi_argmin(const PhiProfile& prof) {
  if (prof.total_a <= 0.0) return 0.0;  // no clicks: Phi minimized at 0
  double lo = 0.0, hi = 1.0;            // derivative < 0 at 0+, sign at 1- checked below
  const double d_hi = prof.derivative(1.0 - 1e-15);
  if (std::isfinite(d_hi) && d_hi <= 0.0) return 1.0;
  for (int it = 0; it < 64 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double d = prof.derivative(mid);
    if (!std::isfinite(d))
      return golden_min([&](double q) { return prof.value(q); }, lo, hi, 1e-11);
    (d < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Largest q in [lo, 1] with Phi(q) <= delta, assuming Phi(lo) <= delta and
// Phi nondecreasing on [lo, 1]. Bisection plus a few safeguarded Newton steps
// so the residual |Phi(q) - delta| stays small even for very large counts.
inline double phi_upper_root(const PhiProfile& prof, double lo, double delta) {
  double hi = 1.0;
  for (int it = 0; it < 80 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (prof.value(mid) <= delta ? lo : hi) = mid;
  }
  double x = lo;
  for (int it = 0; it < 6; ++it) {
    const double r = prof.value(x) - delta;
    if (std::abs(r) <= 1e-9) break;
    const double d = prof.derivative(x);
    if (!(d > 0.0) || !std::isfinite(r)) break;
    const double next = x - r / d;
    if (!(next > 0.0) || next >= hi || !std::isfinite(next)) break;
    x = next;
  }
  return x;
}

}  // namespace detail

// Phi(q) = sum over active positions of N_{k,l} d(S_{k,l}/N_{k,l}, kappa_l q).
// Positions without plays contribute zero.
inline double phi(const CounterSet& counters, int arm, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("phi: q must lie in [0,1]");
  return detail::make_phi_profile(counters, arm).value(q);
}

struct PhiMinResult {
  double theta_min = 0.0;
  double phi_value = 0.0;
};

inline PhiMinResult phi_min(const CounterSet& counters, int arm) {
  const detail::PhiProfile prof = detail::make_phi_profile(counters, arm);
  if (prof.empty())
    throw std::invalid_argument("phi_min: arm " + std::to_string(arm) + " has no data");
  const double q = detail::phi_argmin(prof);
  return {q, prof.value(q)};
}

// Multi-position KL confidence index: sup{q in [theta_min, 1] : Phi(q) <= delta}.
inline IndexResult pie_index(const CounterSet& counters, int arm, double delta) {
  if (!(delta >= 0.0)) throw std::invalid_argument("pie_index: delta must be >= 0");
  const detail::PhiProfile prof = detail::make_phi_profile(counters, arm);
  if (prof.empty())
    throw std::invalid_argument("pie_index: arm " + std::to_string(arm) + " has no data");
  const double qmin = detail::phi_argmin(prof);
  if (prof.value(qmin) >= delta) return {qmin, qmin >= 1.0};
  const double at_one = prof.value(1.0);
  if (at_one <= delta) return {1.0, true};
  return {detail::phi_upper_root(prof, qmin, delta), false};
}

// Scalar KL-UCB index: max{q in [p_hat, 1] : n d(p_hat, q) <= delta}.
inline double klucb_scalar(double p_hat, std::int64_t n, double delta) {
  if (!(p_hat >= 0.0 && p_hat <= 1.0))
    throw std::invalid_argument("klucb_scalar: p_hat must lie in [0,1]");
  if (n < 1) throw std::invalid_argument("klucb_scalar: n must be >= 1");
  if (delta <= 0.0 || p_hat >= 1.0) return p_hat >= 1.0 ? 1.0 : p_hat;
  detail::PhiProfile prof;
  detail::PhiProfile::Term t;
  t.kappa = 1.0;
  const double nd = static_cast<double>(n);
  t.a = nd * p_hat;
  t.b = nd * (1.0 - p_hat);
  t.entropy = 0.0;
  if (p_hat > 0.0) t.entropy += nd * p_hat * std::log(p_hat);
  if (p_hat < 1.0) t.entropy += nd * (1.0 - p_hat) * std::log(1.0 - p_hat);
  prof.terms.push_back(t);
  prof.total_a = t.a;
  if (prof.value(1.0) <= delta) return 1.0;
  return detail::phi_upper_root(prof, p_hat, delta);
}

}  // namespace pbm
