#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pbm/indices.hpp"
#include "pbm/rng.hpp"
#include "pbm/stats.hpp"

using namespace pbm;

namespace {

// Counters with a single arm whose per-position cells are set by repeated
// full-row updates; filler arms absorb the other positions.
CounterSet single_arm_counters(const std::vector<double>& kappa,
                               const std::vector<std::int64_t>& plays,
                               const std::vector<std::int64_t>& clicks) {
  const int L = static_cast<int>(kappa.size());
  CounterSet cs(L + 1, kappa);
  for (int l = 0; l < L; ++l) {
    for (std::int64_t i = 0; i < plays[static_cast<std::size_t>(l)]; ++i) {
      Action a;
      Feedback z;
      int filler = 2;
      for (int j = 0; j < L; ++j) {
        a.arms.push_back(j == l ? 1 : filler++);
        z.z.push_back(j == l && i < clicks[static_cast<std::size_t>(l)] ? 1 : 0);
      }
      cs.update(a, z);
    }
  }
  return cs;
}

}  // namespace

TEST_CASE("ucb_index with zero exploration is the pooled estimate") {
  CounterSet cs = single_arm_counters({0.9, 0.6}, {4, 3}, {2, 1});
  CHECK(ucb_index(cs, 1, 0.0) == doctest::Approx(cs.theta_hat(1)).epsilon(1e-12));
}

TEST_CASE("ucb_index hand-computed value") {
  CounterSet cs = single_arm_counters({0.9}, {10}, {5});
  // 5/9 + sqrt(10/9) sqrt(2/18)
  CHECK(ucb_index(cs, 1, 2.0) == doctest::Approx(0.9069197400187088).epsilon(1e-9));
}

TEST_CASE("ucb_index requires data and dominates the estimate") {
  CounterSet cs(3, {0.9, 0.6});
  CHECK_THROWS_AS(ucb_index(cs, 1, 1.0), std::invalid_argument);
  Rng rng(7);
  cs.update({{1, 2}}, {{1, 0}});
  cs.update({{2, 3}}, {{0, 0}});
  for (int k = 1; k <= 3; ++k) {
    if (cs.total_plays(k) == 0) continue;
    for (double delta : {0.0, 0.3, 1.0, 3.0, 10.0})
      CHECK(ucb_index(cs, k, delta) >= cs.theta_hat(k) - 1e-15);
  }
}

TEST_CASE("phi vanishes when kappa*q matches every per-position mean") {
  // S/N = (4/10, 2/10) and kappa = (0.8, 0.4): both match at q = 0.5.
  CounterSet cs = single_arm_counters({0.8, 0.4}, {10, 10}, {4, 2});
  CHECK(phi(cs, 1, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(phi(cs, 1, 0.3) > 0.0);
  CHECK(phi(cs, 1, 0.7) > 0.0);
}

TEST_CASE("phi of an empty row is identically zero") {
  CounterSet cs(2, {0.9, 0.6});
  for (double q : {0.0, 0.25, 0.5, 1.0}) CHECK(phi(cs, 1, q) == 0.0);
}

TEST_CASE("phi is convex on a grid for random counters") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const int L = 1 + static_cast<int>(rng.uniform_int(3));
    std::vector<double> kappa;
    std::vector<std::int64_t> plays, clicks;
    for (int l = 0; l < L; ++l) {
      kappa.push_back(0.1 + 0.85 * rng.uniform());
      const std::int64_t n = 1 + static_cast<std::int64_t>(rng.uniform_int(30));
      plays.push_back(n);
      clicks.push_back(static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(n + 1))));
    }
    CounterSet cs = single_arm_counters(kappa, plays, clicks);
    const int G = 10000;
    std::vector<double> v(static_cast<std::size_t>(G - 1));
    for (int i = 1; i < G; ++i)
      v[static_cast<std::size_t>(i - 1)] = phi(cs, 1, static_cast<double>(i) / G);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (!std::isfinite(v[i - 1]) || !std::isfinite(v[i]) || !std::isfinite(v[i + 1])) continue;
      CHECK(v[i - 1] - 2.0 * v[i] + v[i + 1] >= -1e-9);
    }
  }
}

TEST_CASE("phi_min single active position reduces to min(1, mean/kappa)") {
  CounterSet a = single_arm_counters({0.8, 0.4}, {12, 0}, {6, 0});
  const auto [qa, va] = phi_min(a, 1);
  CHECK(qa == doctest::Approx(0.5 / 0.8).epsilon(1e-8));
  CHECK(va == doctest::Approx(0.0).epsilon(1e-10));

  // mean above kappa: minimizer saturates at 1
  CounterSet b = single_arm_counters({0.4}, {10}, {8});
  const auto [qb, vb] = phi_min(b, 1);
  CHECK(qb == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(vb == doctest::Approx(10.0 * kl_bernoulli(0.8, 0.4)).epsilon(1e-9));
}

TEST_CASE("phi_min matches a dense-grid search") {
  CounterSet cs = single_arm_counters({0.8, 0.4}, {10, 10}, {4, 2});
  const auto [q, v] = phi_min(cs, 1);
  const double q_grid = oracle::grid_argmin([&](double x) { return phi(cs, 1, x); }, 0.0, 1.0, 1000000);
  CHECK(q == doctest::Approx(q_grid).epsilon(1e-5));
  CHECK(q == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(v == doctest::Approx(0.0).epsilon(1e-10));

  // asymmetric counts: the minimum sits strictly between the two scaled means
  CounterSet asym = single_arm_counters({0.8, 0.4}, {10, 10}, {4, 3});
  const auto [q2, v2] = phi_min(asym, 1);
  const double q2_grid = oracle::grid_argmin([&](double x) { return phi(asym, 1, x); }, 0.0, 1.0, 1000000);
  CHECK(q2 == doctest::Approx(q2_grid).epsilon(1e-5));
  CHECK(v2 == doctest::Approx(phi(asym, 1, q2_grid)).epsilon(1e-8));
  CHECK(v2 > 0.0);
}

TEST_CASE("phi_min value is minimal against random probes") {
  Rng rng(424);
  CounterSet cs = single_arm_counters({0.95, 0.6, 0.2}, {14, 9, 3}, {5, 2, 1});
  const auto [q, v] = phi_min(cs, 1);
  for (int i = 0; i < 100; ++i) CHECK(v <= phi(cs, 1, rng.uniform()) + 1e-12);
  CHECK_THROWS_AS(phi_min(CounterSet(2, {0.9}), 1), std::invalid_argument);
}

TEST_CASE("phi_min with no clicks is zero at zero") {
  CounterSet cs = single_arm_counters({0.7, 0.3}, {5, 8}, {0, 0});
  const auto [q, v] = phi_min(cs, 1);
  CHECK(q == 0.0);
  CHECK(v == 0.0);
}

TEST_CASE("pie_index zero delta returns the phi minimizer") {
  CounterSet cs = single_arm_counters({0.8, 0.4}, {10, 10}, {4, 2});
  const IndexResult r = pie_index(cs, 1, 0.0);
  CHECK(r.value == doctest::Approx(0.5).epsilon(1e-7));
  CHECK_FALSE(r.at_boundary);
}

TEST_CASE("pie_index single-position root matches the scalar equation") {
  CounterSet cs = single_arm_counters({1.0}, {20}, {5});
  const IndexResult r = pie_index(cs, 1, 2.0);
  CHECK(r.value == doctest::Approx(0.4670610705057663).epsilon(1e-6));
  CHECK_FALSE(r.at_boundary);
  // root certificate
  CHECK(std::abs(phi(cs, 1, r.value) - 2.0) <= 1e-6);
}

TEST_CASE("pie_index saturates at one for huge delta") {
  CounterSet cs = single_arm_counters({0.8, 0.4}, {10, 10}, {4, 2});
  const IndexResult r = pie_index(cs, 1, 1e6);
  CHECK(r.value == 1.0);
  CHECK(r.at_boundary);
  CHECK_THROWS_AS(pie_index(CounterSet(2, {0.9}), 1, 1.0), std::invalid_argument);
}

TEST_CASE("pie_index is nondecreasing in delta with small residuals") {
  Rng rng(31337);
  for (int trial = 0; trial < 25; ++trial) {
    const int L = 1 + static_cast<int>(rng.uniform_int(3));
    std::vector<double> kappa;
    std::vector<std::int64_t> plays, clicks;
    for (int l = 0; l < L; ++l) {
      kappa.push_back(0.15 + 0.84 * rng.uniform());
      const std::int64_t n = 2 + static_cast<std::int64_t>(rng.uniform_int(200));
      plays.push_back(n);
      clicks.push_back(static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(n + 1))));
    }
    CounterSet cs = single_arm_counters(kappa, plays, clicks);
    double prev = -1.0;
    for (double delta : {0.0, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0}) {
      const IndexResult r = pie_index(cs, 1, delta);
      CHECK(r.value >= prev - 1e-12);
      CHECK(r.value >= 0.0);
      CHECK(r.value <= 1.0);
      if (!r.at_boundary && delta > 0.0 && r.value > phi_min(cs, 1).theta_min + 1e-12)
        CHECK(std::abs(phi(cs, 1, r.value) - delta) <= 1e-6);
      prev = r.value;
    }
  }
}

TEST_CASE("pie_index reduces to klucb_scalar when kappa is one") {
  Rng rng(5150);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.uniform_int(500));
    const std::int64_t s = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(n + 1)));
    const double delta = 8.0 * rng.uniform();
    CounterSet cs = single_arm_counters({1.0}, {n}, {s});
    const double a = pie_index(cs, 1, delta).value;
    const double b = klucb_scalar(static_cast<double>(s) / static_cast<double>(n), n, delta);
    CHECK(a == doctest::Approx(b).epsilon(1e-6));
  }
}

TEST_CASE("pie_index single position with general kappa solves N d(S/N, kq) = delta") {
  CounterSet cs = single_arm_counters({0.6}, {40}, {10});
  const double delta = 1.7;
  const IndexResult r = pie_index(cs, 1, delta);
  CHECK(40.0 * kl_bernoulli(0.25, 0.6 * r.value) == doctest::Approx(delta).epsilon(1e-6));
}

TEST_CASE("klucb_scalar basics and frozen value") {
  CHECK(klucb_scalar(0.4, 10, 0.0) == 0.4);
  CHECK(klucb_scalar(1.0, 3, 2.0) == 1.0);
  CHECK(klucb_scalar(0.25, 20, 2.0) == doctest::Approx(0.4670610705057663).epsilon(1e-6));
  CHECK_THROWS_AS(klucb_scalar(0.4, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(klucb_scalar(1.4, 3, 1.0), std::invalid_argument);
}

TEST_CASE("klucb_scalar is nondecreasing in delta and bounded by one") {
  Rng rng(64);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.uniform_int(300));
    const double p = rng.uniform();
    double prev = p;
    for (double delta : {0.0, 0.1, 0.5, 1.0, 2.5, 6.0, 20.0}) {
      const double v = klucb_scalar(p, n, delta);
      CHECK(v >= prev - 1e-12);
      CHECK(v <= 1.0);
      CHECK(v >= p);
      prev = v;
    }
  }
}

TEST_CASE("klucb_scalar at p=0 matches the closed form 1 - exp(-delta/n)") {
  for (std::int64_t n : {1, 5, 50}) {
    for (double delta : {0.5, 1.0, 3.0}) {
      const double v = klucb_scalar(0.0, n, delta);
      CHECK(v == doctest::Approx(1.0 - std::exp(-delta / static_cast<double>(n))).epsilon(1e-7));
    }
  }
}

TEST_CASE("index coverage smoke check at moderate sample size") {
  // Fuller coverage runs live in the acceptance suite; this guards the wiring.
  const std::vector<double> kappa{0.9, 0.6, 0.3};
  const double theta = 0.35;
  Rng rng(808);
  const std::int64_t n_per_pos = 20;
  int ucb_viol = 0, pie_viol = 0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    std::vector<std::int64_t> clicks;
    for (double k : kappa) clicks.push_back(oracle::binomial(rng, n_per_pos, k * theta));
    CounterSet cs = single_arm_counters(kappa, {n_per_pos, n_per_pos, n_per_pos}, clicks);
    if (ucb_index(cs, 1, 6.0) < theta) ++ucb_viol;
    if (pie_index(cs, 1, 8.0).value < theta) ++pie_viol;
  }
  const double t = static_cast<double>(3 * n_per_pos);
  const double ucb_bound = std::exp(1.0) * 6.0 * std::log(t) * std::exp(-6.0);
  CHECK(static_cast<double>(ucb_viol) / reps <= ucb_bound);
  const double pie_bound = std::exp(4.0) * std::pow(std::ceil(8.0 * std::log(t)) * 8.0 / 3.0, 3.0) * std::exp(-8.0);
  CHECK(static_cast<double>(pie_viol) / reps <= pie_bound);
}
