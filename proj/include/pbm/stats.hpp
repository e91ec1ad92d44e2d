#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbm/model.hpp"

namespace pbm {

// Per-(arm, position) play and click counts, kept as exact integers.
// The bias-corrected sums N~ are recomputed in double precision on demand
// with Neumaier-compensated summation, so there is no float drift over long
// horizons.
class CounterSet {
 public:
  CounterSet(int num_arms, std::vector<double> kappa)
      : num_arms_(num_arms),
        kappa_(std::move(kappa)),
        plays_(static_cast<std::size_t>(num_arms) * kappa_.size(), 0),
        clicks_(static_cast<std::size_t>(num_arms) * kappa_.size(), 0) {
    if (num_arms_ < 1) throw std::invalid_argument("counters: need at least one arm");
    if (kappa_.empty()) throw std::invalid_argument("counters: need at least one position");
  }

  int num_arms() const { return num_arms_; }
  int num_positions() const { return static_cast<int>(kappa_.size()); }
  const std::vector<double>& kappa() const { return kappa_; }

  std::int64_t plays(int arm, int position) const { return plays_[cell(arm, position)]; }
  std::int64_t clicks(int arm, int position) const { return clicks_[cell(arm, position)]; }

  // N_{k,l} += 1 and S_{k,l} += z_l along the displayed action.
  void update(const Action& a, const Feedback& z) {
    if (a.arms.size() != z.z.size() || a.arms.size() != kappa_.size())
      throw std::invalid_argument("counters: action/feedback length mismatch");
    for (std::size_t l = 0; l < a.arms.size(); ++l) {
      const std::size_t c = cell(a.arms[l], static_cast<int>(l) + 1);
      plays_[c] += 1;
      clicks_[c] += z.z[l] ? 1 : 0;
    }
  }

  std::int64_t total_clicks(int arm) const {
    std::int64_t s = 0;
    for (int l = 1; l <= num_positions(); ++l) s += clicks(arm, l);
    return s;
  }

  std::int64_t total_plays(int arm) const {
    std::int64_t s = 0;
    for (int l = 1; l <= num_positions(); ++l) s += plays(arm, l);
    return s;
  }

  // N~_k = sum_l kappa_l N_{k,l}.
  double corrected_plays(int arm) const {
    double sum = 0.0, comp = 0.0;
    for (int l = 1; l <= num_positions(); ++l) {
      const double term = kappa_[static_cast<std::size_t>(l - 1)] * static_cast<double>(plays(arm, l));
      const double t = sum + term;
      comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
      sum = t;
    }
    return sum + comp;
  }

  // Pooled linear estimator S_k / N~_k; deliberately un-clipped, values above
  // one are possible and preserved for ordering.
  double theta_hat(int arm) const {
    const double n = corrected_plays(arm);
    if (!(n > 0.0))
      throw std::invalid_argument("theta_hat: no data for arm " + std::to_string(arm));
    return static_cast<double>(total_clicks(arm)) / n;
  }

  // I(theta_k) = sum_l N_{k,l} kappa_l / (theta (1 - kappa_l theta)).
  double fisher_information(int arm, double theta) const {
    if (!(theta > 0.0 && theta < 1.0))
      throw std::invalid_argument("fisher_information: theta must lie in (0,1)");
    double s = 0.0;
    for (int l = 1; l <= num_positions(); ++l) {
      const std::int64_t n = plays(arm, l);
      if (n == 0) continue;
      const double k = kappa_[static_cast<std::size_t>(l - 1)];
      if (k * theta >= 1.0)
        throw std::invalid_argument("fisher_information: kappa*theta must stay below 1");
      s += static_cast<double>(n) * k / (theta * (1.0 - k * theta));
    }
    return s;
  }

  // v(theta_k) = sum_l N_{k,l} kappa_l theta (1-kappa_l theta) / (N~_k)^2.
  double estimator_variance(int arm, double theta) const {
    if (!(theta > 0.0 && theta < 1.0))
      throw std::invalid_argument("estimator_variance: theta must lie in (0,1)");
    const double n = corrected_plays(arm);
    if (!(n > 0.0))
      throw std::invalid_argument("estimator_variance: no data for arm " + std::to_string(arm));
    double num = 0.0;
    for (int l = 1; l <= num_positions(); ++l) {
      const double k = kappa_[static_cast<std::size_t>(l - 1)];
      num += static_cast<double>(plays(arm, l)) * k * theta * (1.0 - k * theta);
    }
    return num / (n * n);
  }

  // Debug/fixture dump, one row per cell: arm,position,plays,clicks.
  void write_csv(std::ostream& out) const {
    out << "arm,position,plays,clicks\n";
    for (int k = 1; k <= num_arms_; ++k)
      for (int l = 1; l <= num_positions(); ++l)
        out << k << ',' << l << ',' << plays(k, l) << ',' << clicks(k, l) << '\n';
  }

  static CounterSet read_csv(std::istream& in, std::vector<double> kappa) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("arm,position,plays,clicks", 0) != 0)
      throw std::invalid_argument("counters csv: missing header arm,position,plays,clicks");
    struct Row { int arm, pos; std::int64_t n, s; };
    std::vector<Row> rows;
    int max_arm = 0;
    int lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ss(line);
      Row r{};
      char c1, c2, c3;
      if (!(ss >> r.arm >> c1 >> r.pos >> c2 >> r.n >> c3 >> r.s) || c1 != ',' || c2 != ',' || c3 != ',')
        throw std::invalid_argument("counters csv: malformed row at line " + std::to_string(lineno));
      if (r.pos < 1 || r.pos > static_cast<int>(kappa.size()))
        throw std::invalid_argument("counters csv: position out of range at line " + std::to_string(lineno));
      if (r.s < 0 || r.n < r.s)
        throw std::invalid_argument("counters csv: requires 0 <= clicks <= plays at line " + std::to_string(lineno));
      max_arm = std::max(max_arm, r.arm);
      rows.push_back(r);
    }
    CounterSet cs(std::max(max_arm, 1), std::move(kappa));
    for (const Row& r : rows) {
      cs.plays_[cs.cell(r.arm, r.pos)] += r.n;
      cs.clicks_[cs.cell(r.arm, r.pos)] += r.s;
    }
    return cs;
  }

 private:
  std::size_t cell(int arm, int position) const {
    if (arm < 1 || arm > num_arms_ || position < 1 || position > num_positions())
      throw std::out_of_range("counters: cell (" + std::to_string(arm) + "," +
                              std::to_string(position) + ") out of range");
    return static_cast<std::size_t>(arm - 1) * kappa_.size() + static_cast<std::size_t>(position - 1);
  }

  int num_arms_;
  std::vector<double> kappa_;
  std::vector<std::int64_t> plays_;
  std::vector<std::int64_t> clicks_;
};

}  // namespace pbm
