// Test-only reference implementations, independent of the library code paths
// they check: brute-force enumeration, dense-grid minimization, grid
// inverse-CDF sampling, and small statistics helpers.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pbm/model.hpp"
#include "pbm/posterior.hpp"
#include "pbm/rng.hpp"

namespace oracle {

// All ordered L-lists of distinct arms from {1..K}.
inline std::vector<std::vector<int>> all_actions(int num_arms, int num_positions) {
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  std::vector<char> used(static_cast<std::size_t>(num_arms) + 1, 0);
  std::function<void()> rec = [&]() {
    if (static_cast<int>(current.size()) == num_positions) {
      out.push_back(current);
      return;
    }
    for (int k = 1; k <= num_arms; ++k) {
      if (used[static_cast<std::size_t>(k)]) continue;
      used[static_cast<std::size_t>(k)] = 1;
      current.push_back(k);
      rec();
      current.pop_back();
      used[static_cast<std::size_t>(k)] = 0;
    }
  };
  rec();
  return out;
}

// Expected reward recomputed from raw parameters (no pbm::expected_reward).
inline double reward_of(const std::vector<double>& theta, const std::vector<double>& kappa,
                        const std::vector<int>& arms) {
  double mu = 0.0;
  for (std::size_t l = 0; l < kappa.size(); ++l)
    mu += kappa[l] * theta[static_cast<std::size_t>(arms[l] - 1)];
  return mu;
}

inline std::vector<int> best_action_brute_force(const std::vector<double>& theta,
                                                const std::vector<double>& kappa) {
  std::vector<int> best;
  double best_mu = -1.0;
  for (const auto& a : all_actions(static_cast<int>(theta.size()), static_cast<int>(kappa.size()))) {
    const double mu = reward_of(theta, kappa, a);
    if (mu > best_mu + 1e-15) {
      best_mu = mu;
      best = a;
    }
  }
  return best;
}

// Scalar Bernoulli KL, written independently (direct formula, no shortcuts).
inline double kl_scalar(double p, double q) {
  double v = 0.0;
  if (p > 0.0) v += p * std::log(p / q);
  if (p < 1.0) v += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  return v;
}

// Dense-grid argmin of a function on [lo, hi].
inline double grid_argmin(const std::function<double(double)>& f, double lo, double hi, int points) {
  double best_x = lo, best_v = f(lo);
  for (int i = 1; i <= points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points);
    const double v = f(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  return best_x;
}

// Kolmogorov-Smirnov distance between a sample and a reference CDF.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
    ks = std::max(ks, std::abs(f - static_cast<double>(i + 1) / n));
  }
  return ks;
}

// CDF tabulated on a dense midpoint grid of an unnormalized log-density over
// (0,1); linear interpolation between grid cells.
class GridCdf {
 public:
  GridCdf(const std::function<double(double)>& log_density, int points) : cum_(static_cast<std::size_t>(points)) {
    std::vector<double> logd(cum_.size());
    double peak = -1e300;
    for (std::size_t i = 0; i < cum_.size(); ++i) {
      const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(cum_.size());
      logd[i] = log_density(t);
      peak = std::max(peak, logd[i]);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < cum_.size(); ++i) {
      acc += std::exp(logd[i] - peak);
      cum_[i] = acc;
    }
  }

  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double pos = x * static_cast<double>(cum_.size()) - 0.5;
    const auto i = static_cast<std::ptrdiff_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    const double lo = i < 0 ? 0.0 : cum_[static_cast<std::size_t>(i)];
    const double hi = i + 1 >= static_cast<std::ptrdiff_t>(cum_.size())
                          ? cum_.back()
                          : cum_[static_cast<std::size_t>(i + 1)];
    return (lo + frac * (hi - lo)) / cum_.back();
  }

 private:
  std::vector<double> cum_;
};

inline std::int64_t binomial(pbm::Rng& rng, std::int64_t n, double p) {
  std::int64_t s = 0;
  for (std::int64_t i = 0; i < n; ++i) s += rng.bernoulli(p) ? 1 : 0;
  return s;
}

// Fixed 20-case posterior battery shared by the distribution, envelope, and
// acceptance checks: empty, conjugate single-position, mixed-kappa, truncated,
// and high-count shapes.
inline std::vector<pbm::ArmPosterior> posterior_battery() {
  const auto mk = [](std::vector<double> kappa, std::vector<std::int64_t> alpha,
                     std::vector<std::int64_t> beta) {
    pbm::ArmPosterior p;
    p.kappa = std::move(kappa);
    p.alpha = std::move(alpha);
    p.beta = std::move(beta);
    p.validate();
    return p;
  };
  std::vector<pbm::ArmPosterior> cases;
  cases.push_back(mk({0.9, 0.6, 0.3}, {0, 0, 0}, {0, 0, 0}));
  cases.push_back(mk({1.0}, {1}, {1}));
  cases.push_back(mk({1.0}, {0}, {0}));
  cases.push_back(mk({1.0}, {4}, {0}));
  cases.push_back(mk({1.0}, {0}, {6}));
  cases.push_back(mk({0.9, 0.6}, {5, 2}, {15, 8}));
  cases.push_back(mk({0.5}, {3}, {9}));
  cases.push_back(mk({0.3}, {2}, {1}));
  cases.push_back(mk({0.9, 0.6, 0.3}, {1, 0, 0}, {3, 2, 1}));
  cases.push_back(mk({0.9, 0.6, 0.3}, {0, 1, 2}, {4, 4, 4}));
  cases.push_back(mk({0.9, 0.6, 0.3}, {12, 5, 2}, {28, 15, 8}));
  cases.push_back(mk({1.0, 0.6}, {3, 1}, {7, 4}));
  cases.push_back(mk({1.0, 0.2}, {0, 0}, {5, 5}));
  cases.push_back(mk({0.8, 0.8}, {6, 6}, {6, 6}));
  cases.push_back(mk({0.9, 0.6, 0.3}, {120, 40, 10}, {280, 160, 50}));
  cases.push_back(mk({0.95, 0.05}, {2, 2}, {2, 18}));
  cases.push_back(mk({0.9}, {0}, {400}));
  cases.push_back(mk({0.9}, {300}, {100}));
  cases.push_back(mk({0.7, 0.5, 0.2, 0.1}, {9, 4, 1, 0}, {21, 10, 3, 2}));
  cases.push_back(mk({0.6, 0.3}, {50, 20}, {50, 80}));
  return cases;
}

}  // namespace oracle
