#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbm/indices.hpp"
#include "pbm/model.hpp"
#include "pbm/posterior.hpp"
#include "pbm/rng.hpp"
#include "pbm/stats.hpp"

namespace pbm {

enum class PolicyKind { pbm_ucb, pbm_pie, pbm_ts, bc_mp_ts, rba_klucb, random };

enum class HorizonMode { anytime_log_t, fixed_horizon_log_T };

struct PolicyConfig {
  PolicyKind kind = PolicyKind::pbm_ucb;
  double epsilon = 0.01;
  HorizonMode horizon_mode = HorizonMode::anytime_log_t;
  std::optional<std::int64_t> horizon_T;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("policy: epsilon must be > 0");
    if (horizon_mode == HorizonMode::fixed_horizon_log_T && !horizon_T)
      throw std::invalid_argument("policy: horizon_T required for fixed_horizon_log_T");
    if (horizon_T && *horizon_T < 1)
      throw std::invalid_argument("policy: horizon_T must be >= 1");
  }
};

inline PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "pbm_ucb") return PolicyKind::pbm_ucb;
  if (s == "pbm_pie") return PolicyKind::pbm_pie;
  if (s == "pbm_ts") return PolicyKind::pbm_ts;
  if (s == "bc_mp_ts") return PolicyKind::bc_mp_ts;
  if (s == "rba_klucb") return PolicyKind::rba_klucb;
  if (s == "random") return PolicyKind::random;
  throw std::invalid_argument("policy: unknown kind '" + s + "'");
}

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::pbm_ucb: return "pbm_ucb";
    case PolicyKind::pbm_pie: return "pbm_pie";
    case PolicyKind::pbm_ts: return "pbm_ts";
    case PolicyKind::bc_mp_ts: return "bc_mp_ts";
    case PolicyKind::rba_klucb: return "rba_klucb";
    case PolicyKind::random: return "random";
  }
  return "?";
}

struct PolicyDiagnostics {
  SamplerDiagnostics posterior;
};

// Stateful decision contract. select_action and update must alternate; the
// round counter equals the number of updates received. Policies that rely on
// per-arm data run a round-robin initialization for the first K rounds: round
// t plays arms (t, t+1, ..., t+L-1) wrapped modulo K, which leaves every
// (arm, position) cell with at least one play.
class Policy {
 public:
  Policy(int num_arms, std::vector<double> kappa)
      : counters_(num_arms, std::move(kappa)) {}
  virtual ~Policy() = default;

  Action select_action(Rng& rng) {
    if (needs_initialization() && round_ < counters_.num_arms()) {
      Action a = initialization_action(round_ + 1);
      on_selected(a);
      return a;
    }
    Action a = select(rng);
    on_selected(a);
    return a;
  }

  void update(const Action& a, const Feedback& z) {
    counters_.update(a, z);
    ++round_;
    after_update(a, z);
  }

  const CounterSet& counters() const { return counters_; }
  std::int64_t round() const { return round_; }
  int num_arms() const { return counters_.num_arms(); }
  int num_positions() const { return counters_.num_positions(); }
  virtual PolicyDiagnostics diagnostics() const { return {}; }

 protected:
  virtual Action select(Rng& rng) = 0;
  virtual bool needs_initialization() const { return true; }
  virtual void on_selected(const Action&) {}
  virtual void after_update(const Action&, const Feedback&) {}

  // Round number about to be played (1-based).
  std::int64_t current_round() const { return round_ + 1; }

  Action initialization_action(std::int64_t t) const {
    const int K = num_arms();
    const int L = num_positions();
    Action a;
    a.arms.reserve(static_cast<std::size_t>(L));
    for (int j = 0; j < L; ++j)
      a.arms.push_back(static_cast<int>((t - 1 + j) % K) + 1);
    return a;
  }

  // Arms ordered by score descending, ties toward the smaller arm id.
  static std::vector<int> ranked_arms(const std::vector<double>& score) {
    std::vector<int> order(score.size());
    std::iota(order.begin(), order.end(), 1);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return score[static_cast<std::size_t>(a - 1)] > score[static_cast<std::size_t>(b - 1)];
    });
    return order;
  }

  Action top_arms_action(const std::vector<double>& score) const {
    const std::vector<int> order = ranked_arms(score);
    Action a;
    a.arms.assign(order.begin(), order.begin() + num_positions());
    return a;
  }

  CounterSet counters_;
  std::int64_t round_ = 0;
};

// Optimistic index sorting with the Hoeffding-type bonus, delta = (1+eps) log t.
class PbmUcbPolicy : public Policy {
 public:
  PbmUcbPolicy(int num_arms, std::vector<double> kappa, const PolicyConfig& cfg)
      : Policy(num_arms, std::move(kappa)), epsilon_(cfg.epsilon) {}

 protected:
  Action select(Rng&) override {
    const double delta = (1.0 + epsilon_) * std::log(static_cast<double>(current_round()));
    std::vector<double> idx(static_cast<std::size_t>(num_arms()));
    for (int k = 1; k <= num_arms(); ++k)
      idx[static_cast<std::size_t>(k - 1)] = ucb_index(counters_, k, delta);
    return top_arms_action(idx);
  }

 private:
  double epsilon_;
};

// Parsimonious item exploration: leaders by pooled estimate on positions
// 1..L-1, and with probability 1/2 a challenger (any non-leader whose KL
// confidence index reaches the L-th leader's estimate) at position L.
class PbmPiePolicy : public Policy {
 public:
  PbmPiePolicy(int num_arms, std::vector<double> kappa, const PolicyConfig& cfg)
      : Policy(num_arms, std::move(kappa)),
        epsilon_(cfg.epsilon),
        horizon_mode_(cfg.horizon_mode),
        horizon_T_(cfg.horizon_T ? *cfg.horizon_T : 0) {
    if (horizon_mode_ == HorizonMode::fixed_horizon_log_T && horizon_T_ < 1)
      throw std::invalid_argument("pbm_pie: horizon_T required for fixed_horizon_log_T");
  }

  double exploration_delta(std::int64_t t) const {
    const double arg = horizon_mode_ == HorizonMode::anytime_log_t
                           ? static_cast<double>(t)
                           : static_cast<double>(horizon_T_);
    return (1.0 + epsilon_) * std::log(arg);
  }

  std::vector<int> challenger_set(double delta) const {
    std::vector<double> means(static_cast<std::size_t>(num_arms()));
    for (int k = 1; k <= num_arms(); ++k)
      means[static_cast<std::size_t>(k - 1)] = counters_.theta_hat(k);
    const std::vector<int> order = ranked_arms(means);
    const double last_leader_mean = means[static_cast<std::size_t>(order[static_cast<std::size_t>(num_positions() - 1)] - 1)];
    std::vector<int> challengers;
    for (std::size_t r = static_cast<std::size_t>(num_positions()); r < order.size(); ++r) {
      const int k = order[r];
      if (pie_index(counters_, k, delta).value >= last_leader_mean)
        challengers.push_back(k);
    }
    std::sort(challengers.begin(), challengers.end());
    return challengers;
  }

 protected:
  Action select(Rng& rng) override {
    const int L = num_positions();
    std::vector<double> means(static_cast<std::size_t>(num_arms()));
    for (int k = 1; k <= num_arms(); ++k)
      means[static_cast<std::size_t>(k - 1)] = counters_.theta_hat(k);
    const std::vector<int> order = ranked_arms(means);
    Action a;
    a.arms.assign(order.begin(), order.begin() + L);

    const double delta = exploration_delta(current_round());
    const double last_leader_mean = means[static_cast<std::size_t>(a.arms.back() - 1)];
    std::vector<int> challengers;
    for (std::size_t r = static_cast<std::size_t>(L); r < order.size(); ++r) {
      const int k = order[r];
      if (pie_index(counters_, k, delta).value >= last_leader_mean)
        challengers.push_back(k);
    }
    if (!challengers.empty() && rng.bernoulli(0.5)) {
      std::sort(challengers.begin(), challengers.end());
      a.arms.back() = challengers[rng.uniform_int(challengers.size())];
    }
    return a;
  }

 private:
  double epsilon_;
  HorizonMode horizon_mode_;
  std::int64_t horizon_T_;
};

// Thompson sampling from the exact per-arm posterior via rejection sampling.
class PbmTsPolicy : public Policy {
 public:
  PbmTsPolicy(int num_arms, std::vector<double> kappa, const PolicyConfig&)
      : Policy(num_arms, std::move(kappa)),
        samplers_(static_cast<std::size_t>(num_arms)) {}

  PolicyDiagnostics diagnostics() const override {
    PolicyDiagnostics d;
    d.posterior = retired_diag_;
    for (const auto& s : samplers_)
      if (s) d.posterior += s->diagnostics();
    return d;
  }

 protected:
  Action select(Rng& rng) override {
    std::vector<double> draw(static_cast<std::size_t>(num_arms()));
    for (int k = 1; k <= num_arms(); ++k) {
      auto& s = samplers_[static_cast<std::size_t>(k - 1)];
      if (!s) s = std::make_unique<PosteriorSampler>(ArmPosterior::from_counters(counters_, k));
      draw[static_cast<std::size_t>(k - 1)] = s->sample(rng);
    }
    return top_arms_action(draw);
  }

  void after_update(const Action& a, const Feedback&) override {
    for (int arm : a.arms) {
      auto& s = samplers_[static_cast<std::size_t>(arm - 1)];
      if (s) {
        retired_diag_ += s->diagnostics();
        s.reset();
      }
    }
  }

 private:
  std::vector<std::unique_ptr<PosteriorSampler>> samplers_;
  SamplerDiagnostics retired_diag_;
};

// Bias-corrected beta approximation of the posterior: one pooled
// Beta(S_k + 1, max(N~_k - S_k, 0) + 1) draw per arm.
class BcMpTsPolicy : public Policy {
 public:
  BcMpTsPolicy(int num_arms, std::vector<double> kappa, const PolicyConfig&)
      : Policy(num_arms, std::move(kappa)) {}

 protected:
  Action select(Rng& rng) override {
    std::vector<double> draw(static_cast<std::size_t>(num_arms()));
    for (int k = 1; k <= num_arms(); ++k) {
      const double s = static_cast<double>(counters_.total_clicks(k));
      const double n = counters_.corrected_plays(k);
      draw[static_cast<std::size_t>(k - 1)] = rng.beta(s + 1.0, std::max(n - s, 0.0) + 1.0);
    }
    return top_arms_action(draw);
  }
};

// Ranked bandits: one scalar KL-UCB bandit per position. A sub-bandit whose
// pick duplicates a higher position is shown a uniformly random unused arm
// instead and its pick is credited zero reward; the replacement is never
// credited.
class RbaKlUcbPolicy : public Policy {
 public:
  RbaKlUcbPolicy(int num_arms, std::vector<double> kappa, const PolicyConfig&)
      : Policy(num_arms, std::move(kappa)),
        plays_(static_cast<std::size_t>(num_positions()),
               std::vector<std::int64_t>(static_cast<std::size_t>(num_arms), 0)),
        rewards_(static_cast<std::size_t>(num_positions()),
                 std::vector<std::int64_t>(static_cast<std::size_t>(num_arms), 0)) {}

  std::int64_t sub_bandit_plays(int position, int arm) const {
    return plays_[static_cast<std::size_t>(position - 1)][static_cast<std::size_t>(arm - 1)];
  }
  std::int64_t sub_bandit_rewards(int position, int arm) const {
    return rewards_[static_cast<std::size_t>(position - 1)][static_cast<std::size_t>(arm - 1)];
  }

  static double exploration_delta(std::int64_t t) {
    if (t < 3) return 0.0;
    const double lt = std::log(static_cast<double>(t));
    return lt + 3.0 * std::log(lt);
  }

 protected:
  Action select(Rng& rng) override {
    const int K = num_arms();
    const int L = num_positions();
    const double delta = exploration_delta(current_round());
    last_chosen_.assign(static_cast<std::size_t>(L), 0);
    Action a;
    a.arms.reserve(static_cast<std::size_t>(L));
    std::vector<char> used(static_cast<std::size_t>(K) + 1, 0);
    for (int l = 1; l <= L; ++l) {
      int best = 1;
      double best_idx = -1.0;
      for (int k = 1; k <= K; ++k) {
        const std::int64_t n = plays_[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(k - 1)];
        const std::int64_t s = rewards_[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(k - 1)];
        const double idx = klucb_scalar(static_cast<double>(s) / static_cast<double>(n), n, delta);
        if (idx > best_idx) {
          best_idx = idx;
          best = k;
        }
      }
      last_chosen_[static_cast<std::size_t>(l - 1)] = best;
      int shown = best;
      if (used[static_cast<std::size_t>(best)]) {
        std::vector<int> unused;
        unused.reserve(static_cast<std::size_t>(K));
        for (int k = 1; k <= K; ++k)
          if (!used[static_cast<std::size_t>(k)]) unused.push_back(k);
        shown = unused[rng.uniform_int(unused.size())];
      }
      used[static_cast<std::size_t>(shown)] = 1;
      a.arms.push_back(shown);
    }
    return a;
  }

  void on_selected(const Action& a) override {
    if (round_ < num_arms()) last_chosen_.assign(a.arms.begin(), a.arms.end());
  }

  void after_update(const Action& a, const Feedback& z) override {
    if (last_chosen_.size() != a.arms.size())
      throw std::logic_error("rba_klucb: update without a matching select_action");
    for (std::size_t l = 0; l < a.arms.size(); ++l) {
      const int chosen = last_chosen_[l];
      plays_[l][static_cast<std::size_t>(chosen - 1)] += 1;
      if (chosen == a.arms[l])
        rewards_[l][static_cast<std::size_t>(chosen - 1)] += z.z[l] ? 1 : 0;
    }
    last_chosen_.clear();
  }

 private:
  std::vector<std::vector<std::int64_t>> plays_;
  std::vector<std::vector<std::int64_t>> rewards_;
  std::vector<int> last_chosen_;
};

// Uniformly random ordered L-subset; no initialization phase.
class RandomPolicy : public Policy {
 public:
  RandomPolicy(int num_arms, std::vector<double> kappa, const PolicyConfig&)
      : Policy(num_arms, std::move(kappa)) {}

 protected:
  bool needs_initialization() const override { return false; }

  Action select(Rng& rng) override {
    std::vector<int> pool(static_cast<std::size_t>(num_arms()));
    std::iota(pool.begin(), pool.end(), 1);
    const std::size_t L = static_cast<std::size_t>(num_positions());
    for (std::size_t j = 0; j < L; ++j)
      std::swap(pool[j], pool[j + rng.uniform_int(pool.size() - j)]);
    Action a;
    a.arms.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(L));
    return a;
  }
};

inline std::unique_ptr<Policy> make_policy(const PolicyConfig& cfg, int num_arms,
                                           std::vector<double> kappa) {
  cfg.validate();
  switch (cfg.kind) {
    case PolicyKind::pbm_ucb: return std::make_unique<PbmUcbPolicy>(num_arms, std::move(kappa), cfg);
    case PolicyKind::pbm_pie: return std::make_unique<PbmPiePolicy>(num_arms, std::move(kappa), cfg);
    case PolicyKind::pbm_ts: return std::make_unique<PbmTsPolicy>(num_arms, std::move(kappa), cfg);
    case PolicyKind::bc_mp_ts: return std::make_unique<BcMpTsPolicy>(num_arms, std::move(kappa), cfg);
    case PolicyKind::rba_klucb: return std::make_unique<RbaKlUcbPolicy>(num_arms, std::move(kappa), cfg);
    case PolicyKind::random: return std::make_unique<RandomPolicy>(num_arms, std::move(kappa), cfg);
  }
  throw std::invalid_argument("policy: unknown kind");
}

}  // namespace pbm
