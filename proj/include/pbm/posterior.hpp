#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pbm/rng.hpp"
#include "pbm/stats.hpp"

namespace pbm {

// Exact single-arm posterior under a uniform prior: a product of truncated
// scaled beta kernels theta^alpha_l (1 - kappa_l theta)^beta_l with
// alpha_l = S_{k,l} and beta_l = N_{k,l} - S_{k,l}.
struct ArmPosterior {
  std::vector<double> kappa;
  std::vector<std::int64_t> alpha;
  std::vector<std::int64_t> beta;

  static ArmPosterior from_counters(const CounterSet& counters, int arm) {
    ArmPosterior p;
    p.kappa = counters.kappa();
    const int L = counters.num_positions();
    p.alpha.resize(static_cast<std::size_t>(L));
    p.beta.resize(static_cast<std::size_t>(L));
    for (int l = 1; l <= L; ++l) {
      p.alpha[static_cast<std::size_t>(l - 1)] = counters.clicks(arm, l);
      p.beta[static_cast<std::size_t>(l - 1)] = counters.plays(arm, l) - counters.clicks(arm, l);
    }
    return p;
  }

  void validate() const {
    if (kappa.empty() || alpha.size() != kappa.size() || beta.size() != kappa.size())
      throw std::invalid_argument("posterior: kappa/alpha/beta lengths must match");
    for (std::size_t l = 0; l < kappa.size(); ++l) {
      if (!(kappa[l] > 0.0 && kappa[l] <= 1.0))
        throw std::invalid_argument("posterior: kappa must lie in (0,1]");
      if (alpha[l] < 0 || beta[l] < 0)
        throw std::invalid_argument("posterior: negative exponent");
    }
  }
};

// log of the unnormalized density at theta in (0,1); -inf at the support
// boundaries when the corresponding exponent is positive.
inline double log_density_unnorm(const ArmPosterior& p, double theta) {
  double s = 0.0;
  for (std::size_t l = 0; l < p.kappa.size(); ++l) {
    if (p.alpha[l] > 0) {
      if (theta <= 0.0) return -std::numeric_limits<double>::infinity();
      s += static_cast<double>(p.alpha[l]) * std::log(theta);
    }
    if (p.beta[l] > 0) {
      const double x = p.kappa[l] * theta;
      if (x >= 1.0) return -std::numeric_limits<double>::infinity();
      s += static_cast<double>(p.beta[l]) * std::log1p(-x);
    }
  }
  return s;
}

struct SamplerDiagnostics {
  std::uint64_t proposals = 0;
  std::uint64_t accepts = 0;
  std::uint64_t grid_fallbacks = 0;

  SamplerDiagnostics& operator+=(const SamplerDiagnostics& o) {
    proposals += o.proposals;
    accepts += o.accepts;
    grid_fallbacks += o.grid_fallbacks;
    return *this;
  }
};

// Rejection sampler for ArmPosterior. The proposal is the scaled beta kernel
// of the position m with the most observations, with shape (alpha_m+1,
// beta_m+1) so it stays well-defined at zero counts. The log envelope
// constant is the exact maximum of
//   psi(theta) = log target - log proposal kernel
//              = sum_{l != m} [alpha_l log theta + beta_l log(1 - kappa_l theta)],
// a concave function, found by bisection on its decreasing derivative
// (golden-section fallback), plus a log(1.05) safety margin. Draws that land
// above 1 after the 1/kappa_m scaling are rejected outright.
class PosteriorSampler {
 public:
  explicit PosteriorSampler(ArmPosterior posterior, std::uint64_t max_rejections = 10000)
      : post_(std::move(posterior)), max_rejections_(max_rejections) {
    post_.validate();
    const std::size_t L = post_.kappa.size();
    m_ = 0;
    std::int64_t best = -1;
    std::int64_t total = 0;
    for (std::size_t l = 0; l < L; ++l) {
      const std::int64_t n = post_.alpha[l] + post_.beta[l];
      total += n;
      if (n > best) {
        best = n;
        m_ = l;
      }
    }
    flat_ = total == 0;
    if (flat_) return;
    prop_a_ = static_cast<double>(post_.alpha[m_]) + 1.0;
    prop_b_ = static_cast<double>(post_.beta[m_]) + 1.0;
    rest_alpha_ = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      if (l == m_) continue;
      if (post_.alpha[l] > 0) rest_alpha_ += static_cast<double>(post_.alpha[l]);
      if (post_.beta[l] > 0)
        rest_terms_.push_back({post_.kappa[l], static_cast<double>(post_.beta[l])});
    }
    log_envelope_ = psi(psi_argmax()) + std::log(1.05);
  }

  const ArmPosterior& posterior() const { return post_; }
  double log_envelope() const { return flat_ ? 0.0 : log_envelope_; }
  const SamplerDiagnostics& diagnostics() const { return diag_; }

  // Log ratio used by the accept test: log target minus log proposal kernel,
  // both unnormalized. The dropped constants cancel against log_envelope().
  double psi(double theta) const {
    if (flat_) return 0.0;
    double s = 0.0;
    if (rest_alpha_ > 0.0) {
      if (theta <= 0.0) return -std::numeric_limits<double>::infinity();
      s += rest_alpha_ * std::log(theta);
    }
    for (const RestTerm& t : rest_terms_) {
      const double x = t.kappa * theta;
      if (x >= 1.0) return -std::numeric_limits<double>::infinity();
      s += t.beta * std::log1p(-x);
    }
    return s;
  }

  double sample(Rng& rng) {
    if (flat_) {
      ++diag_.proposals;
      ++diag_.accepts;
      return rng.uniform();
    }
    for (std::uint64_t trial = 0; trial < max_rejections_; ++trial) {
      ++diag_.proposals;
      const double x = rng.beta(prop_a_, prop_b_);
      const double theta = x / post_.kappa[m_];
      if (theta >= 1.0) continue;
      const double u = rng.uniform();
      if (std::log(u) <= psi(theta) - log_envelope_) {
        ++diag_.accepts;
        return theta;
      }
    }
    ++diag_.grid_fallbacks;
    return grid_inverse_cdf(rng.uniform());
  }

  // Deterministic inverse-CDF draw from an 8192-point grid of the exact
  // density; used when the rejection loop exhausts its budget.
  double grid_inverse_cdf(double u) const {
    build_grid();
    const std::size_t n = grid_cdf_.size();
    const auto it = std::lower_bound(grid_cdf_.begin(), grid_cdf_.end(), u * grid_cdf_.back());
    const std::size_t i = static_cast<std::size_t>(it - grid_cdf_.begin());
    if (i >= n) return (static_cast<double>(n) - 0.5) / static_cast<double>(n);
    const double hi_cdf = grid_cdf_[i];
    const double lo_cdf = i == 0 ? 0.0 : grid_cdf_[i - 1];
    const double frac = hi_cdf > lo_cdf ? (u * grid_cdf_.back() - lo_cdf) / (hi_cdf - lo_cdf) : 0.5;
    return (static_cast<double>(i) + frac) / static_cast<double>(n);
  }

 private:
  struct RestTerm {
    double kappa;
    double beta;
  };

  // argmax of the concave psi over (0,1).
  double psi_argmax() const {
    if (rest_alpha_ <= 0.0) return 1e-12;  // psi nonincreasing, sup at 0+ equals 0
    const double hi_probe = 1.0 - 1e-12;
    if (psi_derivative(hi_probe) >= 0.0) return hi_probe;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 64 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double d = psi_derivative(mid);
      if (!std::isfinite(d)) {
        static const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = lo, b = hi;
        while (b - a > 1e-11) {
          const double c = b - inv_phi * (b - a);
          const double e = a + inv_phi * (b - a);
          if (psi(c) > psi(e)) b = e; else a = c;
        }
        return 0.5 * (a + b);
      }
      (d > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  double psi_derivative(double theta) const {
    double s = rest_alpha_ / theta;
    for (const RestTerm& t : rest_terms_) s -= t.beta * t.kappa / (1.0 - t.kappa * theta);
    return s;
  }

  void build_grid() const {
    if (!grid_cdf_.empty()) return;
    constexpr std::size_t kGrid = 8192;
    std::vector<double> logd(kGrid);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < kGrid; ++i) {
      const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(kGrid);
      logd[i] = log_density_unnorm(post_, t);
      peak = std::max(peak, logd[i]);
    }
    grid_cdf_.resize(kGrid);
    double acc = 0.0;
    for (std::size_t i = 0; i < kGrid; ++i) {
      acc += std::exp(logd[i] - peak);
      grid_cdf_[i] = acc;
    }
  }

  ArmPosterior post_;
  std::uint64_t max_rejections_;
  std::size_t m_ = 0;
  bool flat_ = true;
  double prop_a_ = 1.0;
  double prop_b_ = 1.0;
  double rest_alpha_ = 0.0;
  std::vector<RestTerm> rest_terms_;
  double log_envelope_ = 0.0;
  SamplerDiagnostics diag_;
  mutable std::vector<double> grid_cdf_;
};

}  // namespace pbm
