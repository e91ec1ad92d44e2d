#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbm/model.hpp"

namespace pbm {

// Per suboptimal arm: the insertion position that minimizes the
// gap-to-information ratio, and the pieces of that ratio.
struct PerArmBound {
  int arm = 0;             // original arm id
  int best_position = 0;   // l_k
  double gap = 0.0;        // Delta at the winning insertion action
  double kl_denominator = 0.0;
  double ratio = 0.0;      // may be +inf when theta ties make the KL vanish
};

struct BoundReport {
  double f_theta = 0.0;  // sum of the finite per-arm ratios
  std::vector<PerArmBound> per_arm;
  bool has_infinite_terms = false;  // some ratios were +inf and excluded
  double crude = 0.0;
  double ucb_constant_C = 0.0;
  std::function<double(double, double)> pie_leading;  // (epsilon, eta)
};

namespace detail {

// Model with theta and kappa sorted decreasing (ties toward smaller index),
// plus the maps back to the original arm ids / display positions.
struct SortedModel {
  std::vector<double> theta;  // sorted desc
  std::vector<double> kappa;  // sorted desc
  std::vector<int> arm_id;    // arm_id[r] = original id of rank-r arm (0-based rank)
  std::vector<int> pos_id;    // pos_id[r] = original position (1-based) of rank-r slot
  std::vector<int> arm_rank;  // inverse of arm_id (0-based)

  static SortedModel of(const PbmModel& m) {
    SortedModel s;
    const std::vector<int> order = arms_by_theta_desc(m);
    s.arm_id = order;
    s.theta.reserve(order.size());
    for (int id : order) s.theta.push_back(m.theta(id));
    s.arm_rank.assign(order.size(), 0);
    for (std::size_t r = 0; r < order.size(); ++r)
      s.arm_rank[static_cast<std::size_t>(order[r] - 1)] = static_cast<int>(r);
    const int L = m.num_positions();
    std::vector<int> pos(static_cast<std::size_t>(L));
    std::iota(pos.begin(), pos.end(), 1);
    std::stable_sort(pos.begin(), pos.end(), [&](int a, int b) {
      return m.kappa_at(a) > m.kappa_at(b);
    });
    s.pos_id = pos;
    s.kappa.reserve(pos.size());
    for (int p : pos) s.kappa.push_back(m.kappa_at(p));
    return s;
  }

  // Reward of assigning the rank-r arms `ranks` to the sorted positions.
  double reward(const std::vector<int>& ranks) const {
    double mu = 0.0;
    for (std::size_t l = 0; l < kappa.size(); ++l)
      mu += kappa[l] * theta[static_cast<std::size_t>(ranks[l])];
    return mu;
  }

  double optimal_reward() const {
    double mu = 0.0;
    for (std::size_t l = 0; l < kappa.size(); ++l) mu += kappa[l] * theta[l];
    return mu;
  }

  // Ranks (0-based) of the arms in the insertion list v_{k,l}: the top L-1
  // arms with the rank-k arm squeezed in at sorted position l (1-based).
  std::vector<int> insertion_ranks(int k_rank, int l) const {
    std::vector<int> ranks;
    ranks.reserve(kappa.size());
    for (int j = 0; j < l - 1; ++j) ranks.push_back(j);
    ranks.push_back(k_rank);
    for (int j = l - 1; j < static_cast<int>(kappa.size()) - 1; ++j) ranks.push_back(j);
    return ranks;
  }

  // Map ranks in sorted-position space back to a display-order Action.
  Action to_action(const std::vector<int>& ranks) const {
    Action a;
    a.arms.assign(kappa.size(), 0);
    for (std::size_t l = 0; l < kappa.size(); ++l)
      a.arms[static_cast<std::size_t>(pos_id[l] - 1)] = arm_id[static_cast<std::size_t>(ranks[l])];
    return a;
  }
};

}  // namespace detail

// The action v_{k,l}: suboptimal arm k shown at (canonically sorted) position
// l, with the top L-1 arms in order around it. Returned in display order of
// the original model.
inline Action insertion_action(const PbmModel& model, int arm, int position) {
  const int L = model.num_positions();
  if (position < 1 || position > L)
    throw std::invalid_argument("insertion_action: position out of [1.." + std::to_string(L) + "]");
  if (arm < 1 || arm > model.num_arms())
    throw std::invalid_argument("insertion_action: arm out of range");
  const detail::SortedModel s = detail::SortedModel::of(model);
  const int rank = s.arm_rank[static_cast<std::size_t>(arm - 1)];
  if (rank < L)
    throw std::invalid_argument("insertion_action: arm " + std::to_string(arm) +
                                " is among the top " + std::to_string(L) + " arms");
  return s.to_action(s.insertion_ranks(rank, position));
}

// Crude relaxation kappa_L sum_k (theta_L - theta_k) / d(kappa_L theta_k,
// kappa_L theta_L), evaluated as displayed (terms with tied theta are +inf).
inline double crude_bound(const PbmModel& model) {
  const detail::SortedModel s = detail::SortedModel::of(model);
  const int L = model.num_positions();
  const double kL = s.kappa[static_cast<std::size_t>(L - 1)];
  const double thL = s.theta[static_cast<std::size_t>(L - 1)];
  double sum = 0.0;
  for (std::size_t k = static_cast<std::size_t>(L); k < s.theta.size(); ++k) {
    const double thk = s.theta[k];
    const double den = kl_bernoulli(kL * thk, kL * thL);
    if (den <= 0.0) return std::numeric_limits<double>::infinity();  // theta tie
    sum += (thL - thk) / den;
  }
  return kL * sum;
}

// C(kappa) = min_l [ (sum_{j<=L} kappa_j)^2 / l + (sum_{j<=l} kappa_j)^2 ] / kappa_L^2.
inline double ucb_constant(const PbmModel& model) {
  const detail::SortedModel s = detail::SortedModel::of(model);
  const int L = model.num_positions();
  double total = 0.0;
  for (double k : s.kappa) total += k;
  const double kL2 = s.kappa[static_cast<std::size_t>(L - 1)] * s.kappa[static_cast<std::size_t>(L - 1)];
  double best = std::numeric_limits<double>::infinity();
  double prefix = 0.0;
  for (int l = 1; l <= L; ++l) {
    prefix += s.kappa[static_cast<std::size_t>(l - 1)];
    best = std::min(best, (total * total / static_cast<double>(l) + prefix * prefix) / kL2);
  }
  return best;
}

// log T coefficient of the PBM-PIE regret upper bound:
// (1+eps)^2 sum_k kappa_L (theta_L - theta_k) / d(kappa_L theta_k, kappa_L (theta_L - eta)).
inline double pie_leading_term(const PbmModel& model, double epsilon, double eta) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("pie_leading_term: epsilon must be > 0");
  const detail::SortedModel s = detail::SortedModel::of(model);
  double min_half_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < s.theta.size(); ++k)
    min_half_gap = std::min(min_half_gap, (s.theta[k] - s.theta[k + 1]) / 2.0);
  if (!(eta > 0.0 && eta < min_half_gap))
    throw std::invalid_argument("pie_leading_term: eta must lie in (0, " +
                                std::to_string(min_half_gap) + ")");
  const int L = model.num_positions();
  const double kL = s.kappa[static_cast<std::size_t>(L - 1)];
  const double thL = s.theta[static_cast<std::size_t>(L - 1)];
  double sum = 0.0;
  for (std::size_t k = static_cast<std::size_t>(L); k < s.theta.size(); ++k) {
    const double thk = s.theta[k];
    sum += kL * (thL - thk) / kl_bernoulli(kL * thk, kL * (thL - eta));
  }
  return (1.0 + epsilon) * (1.0 + epsilon) * sum;
}

// Closed-form regret lower bound: f(theta) = sum over suboptimal arms of
// min_l Delta_{v_{k,l}} / d(kappa_l theta_k, kappa_l theta_L). Arms whose
// theta ties theta_L produce +inf ratios; these are recorded per-arm and
// excluded from the finite sum.
inline BoundReport regret_lower_bound(const PbmModel& model) {
  const detail::SortedModel s = detail::SortedModel::of(model);
  const int L = model.num_positions();
  const int K = model.num_arms();
  const double mu_star = s.optimal_reward();
  const double thL = s.theta[static_cast<std::size_t>(L - 1)];

  BoundReport report;
  for (int k_rank = L; k_rank < K; ++k_rank) {
    const double thk = s.theta[static_cast<std::size_t>(k_rank)];
    PerArmBound best;
    best.arm = s.arm_id[static_cast<std::size_t>(k_rank)];
    best.ratio = std::numeric_limits<double>::infinity();
    for (int l = 1; l <= L; ++l) {
      const double delta = mu_star - s.reward(s.insertion_ranks(k_rank, l));
      const double denom = kl_bernoulli(s.kappa[static_cast<std::size_t>(l - 1)] * thk,
                                        s.kappa[static_cast<std::size_t>(l - 1)] * thL);
      const double ratio = denom > 0.0 ? delta / denom : std::numeric_limits<double>::infinity();
      if (best.best_position == 0 || ratio < best.ratio) {
        best.best_position = l;
        best.gap = delta;
        best.kl_denominator = denom;
        best.ratio = ratio;
      }
    }
    if (std::isfinite(best.ratio))
      report.f_theta += best.ratio;
    else
      report.has_infinite_terms = true;
    report.per_arm.push_back(best);
  }
  report.crude = crude_bound(model);
  report.ucb_constant_C = ucb_constant(model);
  report.pie_leading = [model](double eps, double eta) {
    return pie_leading_term(model, eps, eta);
  };
  return report;
}

}  // namespace pbm
