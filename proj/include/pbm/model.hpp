#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbm/rng.hpp"

namespace pbm {

// Kullback-Leibler divergence between Bernoulli(p) and Bernoulli(q).
// Total on [0,1]^2 with the conventions 0*log(0) = 0 and d(p,q) = +inf for
// q in {0,1}, p != q, so index root-finders can probe boundary values.
inline double kl_bernoulli(double p, double q) {
  if (p == q) return 0.0;
  if (q <= 0.0 || q >= 1.0) return std::numeric_limits<double>::infinity();
  double t = 0.0;
  if (p > 0.0) t += p * std::log(p / q);
  if (p < 1.0) t += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
  return t;
}

// An ordered list of L distinct arms; arms[0] sits in display position 1.
// Arm ids are 1-based.
struct Action {
  std::vector<int> arms;

  bool operator==(const Action& o) const { return arms == o.arms; }
};

// Censored click vector: z[l] = X_l * Y_l, one bit per position.
struct Feedback {
  std::vector<unsigned char> z;
};

// A position-based-model problem instance. Immutable after construction and
// safe to share across threads.
class PbmModel {
 public:
  PbmModel(std::vector<double> theta, std::vector<double> kappa)
      : theta_(std::move(theta)), kappa_(std::move(kappa)) {
    if (theta_.empty()) throw std::invalid_argument("model: theta must be non-empty");
    if (kappa_.empty()) throw std::invalid_argument("model: kappa must be non-empty");
    if (kappa_.size() > theta_.size())
      throw std::invalid_argument("model: requires L <= K, got L=" +
                                  std::to_string(kappa_.size()) +
                                  " K=" + std::to_string(theta_.size()));
    for (double v : theta_)
      if (!(v > 0.0 && v < 1.0))
        throw std::invalid_argument("model: every theta must lie in (0,1)");
    for (double v : kappa_)
      if (!(v > 0.0 && v <= 1.0))
        throw std::invalid_argument("model: every kappa must lie in (0,1]");
  }

  int num_arms() const { return static_cast<int>(theta_.size()); }
  int num_positions() const { return static_cast<int>(kappa_.size()); }
  const std::vector<double>& theta() const { return theta_; }
  const std::vector<double>& kappa() const { return kappa_; }
  double theta(int arm) const { return theta_[static_cast<std::size_t>(arm - 1)]; }
  double kappa_at(int position) const { return kappa_[static_cast<std::size_t>(position - 1)]; }

  void validate_action(const Action& a) const {
    if (static_cast<int>(a.arms.size()) != num_positions())
      throw std::invalid_argument("action: expected " + std::to_string(num_positions()) +
                                  " arms, got " + std::to_string(a.arms.size()));
    for (std::size_t i = 0; i < a.arms.size(); ++i) {
      const int arm = a.arms[i];
      if (arm < 1 || arm > num_arms())
        throw std::invalid_argument("action: arm id " + std::to_string(arm) +
                                    " out of range [1.." + std::to_string(num_arms()) + "]");
      for (std::size_t j = i + 1; j < a.arms.size(); ++j)
        if (a.arms[j] == arm)
          throw std::invalid_argument("action: duplicate arm id " + std::to_string(arm));
    }
  }

 private:
  std::vector<double> theta_;
  std::vector<double> kappa_;
};

// mu_a = sum_l kappa_l * theta_{a_l}.
inline double expected_reward(const PbmModel& model, const Action& a) {
  model.validate_action(a);
  double mu = 0.0;
  for (int l = 0; l < model.num_positions(); ++l)
    mu += model.kappa()[static_cast<std::size_t>(l)] * model.theta(a.arms[static_cast<std::size_t>(l)]);
  return mu;
}

// Arms ranked by theta descending, tie -> smaller arm id. Used for canonical
// sorting by the bound formulas as well.
inline std::vector<int> arms_by_theta_desc(const PbmModel& model) {
  std::vector<int> order(static_cast<std::size_t>(model.num_arms()));
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return model.theta(a) > model.theta(b);
  });
  return order;
}

// Best arms on the most examined positions (rearrangement bound); ties broken
// toward smaller arm id / earlier position. Returned in display order.
inline Action optimal_action(const PbmModel& model) {
  const int L = model.num_positions();
  std::vector<int> pos(static_cast<std::size_t>(L));
  std::iota(pos.begin(), pos.end(), 0);
  std::stable_sort(pos.begin(), pos.end(), [&](int a, int b) {
    return model.kappa()[static_cast<std::size_t>(a)] > model.kappa()[static_cast<std::size_t>(b)];
  });
  const std::vector<int> arms = arms_by_theta_desc(model);
  Action a;
  a.arms.assign(static_cast<std::size_t>(L), 0);
  for (int r = 0; r < L; ++r) a.arms[static_cast<std::size_t>(pos[static_cast<std::size_t>(r)])] = arms[static_cast<std::size_t>(r)];
  return a;
}

inline double optimal_reward(const PbmModel& model) {
  return expected_reward(model, optimal_action(model));
}

// Delta_a = mu* - mu_a >= 0.
inline double gap(const PbmModel& model, const Action& a) {
  return optimal_reward(model) - expected_reward(model, a);
}

// One censored Bernoulli bit per position with success probability
// kappa_l * theta_{a_l}; the examination and attraction variables are never
// materialized separately.
inline Feedback sample_feedback(const PbmModel& model, const Action& a, Rng& rng) {
  model.validate_action(a);
  Feedback f;
  f.z.resize(a.arms.size());
  for (std::size_t l = 0; l < a.arms.size(); ++l)
    f.z[l] = rng.bernoulli(model.kappa()[l] * model.theta(a.arms[l])) ? 1 : 0;
  return f;
}

}  // namespace pbm
