#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbm::emfit {

struct ClickLogRecord {
  std::string query_id;
  std::string arm_id;
  int position = 0;  // 1-based
  bool click = false;
};

struct CellCounts {
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
};

// Exact per-(query, arm, position) impression/click tallies. Maps are ordered
// so iteration (and everything derived from it) is input-order independent.
struct AggregatedCounts {
  int num_positions = 0;
  std::map<std::string, std::map<std::string, std::vector<CellCounts>>> queries;

  bool operator==(const AggregatedCounts& o) const {
    if (num_positions != o.num_positions || queries.size() != o.queries.size()) return false;
    auto it = o.queries.begin();
    for (const auto& [q, arms] : queries) {
      if (it->first != q || arms.size() != it->second.size()) return false;
      auto jt = it->second.begin();
      for (const auto& [a, cells] : arms) {
        if (jt->first != a) return false;
        for (std::size_t l = 0; l < cells.size(); ++l)
          if (cells[l].impressions != jt->second[l].impressions ||
              cells[l].clicks != jt->second[l].clicks)
            return false;
        ++jt;
      }
      ++it;
    }
    return true;
  }

  std::int64_t total_impressions() const {
    std::int64_t n = 0;
    for (const auto& [q, arms] : queries)
      for (const auto& [a, cells] : arms)
        for (const CellCounts& c : cells) n += c.impressions;
    return n;
  }

  // Pre-aggregated serialization; ingest() accepts this format back.
  void write_csv(std::ostream& out) const {
    out << "query_id,arm_id,position,impressions,clicks\n";
    for (const auto& [q, arms] : queries)
      for (const auto& [a, cells] : arms)
        for (std::size_t l = 0; l < cells.size(); ++l)
          if (cells[l].impressions > 0)
            out << q << ',' << a << ',' << (l + 1) << ',' << cells[l].impressions << ','
                << cells[l].clicks << '\n';
  }
};

struct IngestOptions {
  std::int64_t min_impressions = 1000;  // per (query, arm) at EVERY position
  int min_arms = 5;                     // surviving arms per query
};

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::int64_t parse_count(const std::string& s, const char* what, int lineno) {
  std::size_t pos = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || v < 0)
    throw std::invalid_argument(std::string("ingest: bad ") + what + " '" + s + "' at line " +
                                std::to_string(lineno));
  return v;
}

}  // namespace detail

// Reads either raw click logs (query_id,arm_id,position,click) or
// pre-aggregated counts (query_id,arm_id,position,impressions,clicks),
// aggregates exactly, then filters: a (query, arm) pair survives only with at
// least min_impressions at every position, and a query survives only with at
// least min_arms surviving arms.
inline AggregatedCounts ingest(std::istream& in, int num_positions,
                               const IngestOptions& options = {}) {
  if (num_positions < 1) throw std::invalid_argument("ingest: num_positions must be >= 1");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("ingest: empty input");
  const std::vector<std::string> header = detail::split_csv_row(line);
  bool aggregated = false;
  if (header == std::vector<std::string>{"query_id", "arm_id", "position", "click"}) {
    aggregated = false;
  } else if (header ==
             std::vector<std::string>{"query_id", "arm_id", "position", "impressions", "clicks"}) {
    aggregated = true;
  } else {
    throw std::invalid_argument(
        "ingest: unrecognized header; expected query_id,arm_id,position,click or "
        "query_id,arm_id,position,impressions,clicks");
  }

  AggregatedCounts counts;
  counts.num_positions = num_positions;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = detail::split_csv_row(line);
    if (f.size() != header.size())
      throw std::invalid_argument("ingest: expected " + std::to_string(header.size()) +
                                  " fields at line " + std::to_string(lineno));
    const std::int64_t pos = detail::parse_count(f[2], "position", lineno);
    if (pos < 1 || pos > num_positions)
      throw std::invalid_argument("ingest: position " + std::to_string(pos) +
                                  " out of [1.." + std::to_string(num_positions) +
                                  "] at line " + std::to_string(lineno));
    auto& cells = counts.queries[f[0]][f[1]];
    if (cells.empty()) cells.resize(static_cast<std::size_t>(num_positions));
    CellCounts& cell = cells[static_cast<std::size_t>(pos - 1)];
    if (aggregated) {
      const std::int64_t n = detail::parse_count(f[3], "impressions", lineno);
      const std::int64_t s = detail::parse_count(f[4], "clicks", lineno);
      if (s > n)
        throw std::invalid_argument("ingest: clicks exceed impressions at line " +
                                    std::to_string(lineno));
      cell.impressions += n;
      cell.clicks += s;
    } else {
      const std::int64_t c = detail::parse_count(f[3], "click", lineno);
      if (c > 1)
        throw std::invalid_argument("ingest: click must be 0 or 1 at line " +
                                    std::to_string(lineno));
      cell.impressions += 1;
      cell.clicks += c;
    }
  }

  // Filter pass.
  for (auto qit = counts.queries.begin(); qit != counts.queries.end();) {
    auto& arms = qit->second;
    for (auto ait = arms.begin(); ait != arms.end();) {
      bool keep = true;
      for (const CellCounts& c : ait->second)
        if (c.impressions < options.min_impressions) {
          keep = false;
          break;
        }
      ait = keep ? std::next(ait) : arms.erase(ait);
    }
    qit = static_cast<int>(arms.size()) >= options.min_arms ? std::next(qit)
                                                            : counts.queries.erase(qit);
  }
  return counts;
}

// Per-query attraction parameters; order aligned with `arms`.
struct QueryFit {
  std::string query_id;
  std::vector<std::string> arms;
  std::vector<double> theta;
  std::int64_t records = 0;  // impressions behind this query's fit
  double theta_min = 0.0;
  double theta_max = 0.0;
};

struct FitResult {
  int num_positions = 0;
  std::vector<double> kappa;
  std::vector<QueryFit> queries;
  std::vector<double> log_likelihood;  // initial value, then one per iteration
  int iterations = 0;
  bool converged = false;
};

struct EmOptions {
  int max_iterations = 500;
  double tolerance = 1e-8;  // relative log-likelihood improvement
};

// Bernoulli log-likelihood sum_cells [s log(kappa_l theta_k) +
// (n-s) log(1 - kappa_l theta_k)], with 0 log 0 = 0 for empty cells.
inline double log_likelihood(const AggregatedCounts& counts, const std::vector<double>& kappa,
                             const std::map<std::string, std::map<std::string, double>>& theta) {
  double ll = 0.0;
  for (const auto& [q, arms] : counts.queries) {
    const auto qt = theta.find(q);
    if (qt == theta.end()) throw std::invalid_argument("log_likelihood: missing query " + q);
    for (const auto& [a, cells] : arms) {
      const auto at = qt->second.find(a);
      if (at == qt->second.end())
        throw std::invalid_argument("log_likelihood: missing arm " + a + " for query " + q);
      const double th = at->second;
      for (std::size_t l = 0; l < cells.size(); ++l) {
        const CellCounts& c = cells[l];
        if (c.impressions == 0) continue;
        const double p = kappa[l] * th;
        const double s = static_cast<double>(c.clicks);
        const double f = static_cast<double>(c.impressions - c.clicks);
        if (s > 0.0) ll += p > 0.0 ? s * std::log(p) : -std::numeric_limits<double>::infinity();
        if (f > 0.0) ll += p < 1.0 ? f * std::log1p(-p) : -std::numeric_limits<double>::infinity();
      }
    }
  }
  return ll;
}

// EM with the examination indicator as latent variable. One kappa vector is
// shared across the query pool; theta is per (query, arm). The kappa/theta
// scale ambiguity is left unresolved: only the products kappa_l * theta_k are
// identifiable, and results are comparable through the fixed initialization
// kappa_l = 1/l.
inline FitResult em_fit(const AggregatedCounts& counts, const EmOptions& options = {}) {
  const int L = counts.num_positions;
  if (counts.queries.empty() || counts.total_impressions() == 0)
    throw std::invalid_argument("em_fit: no impressions to fit");
  std::vector<std::int64_t> impressions_at(static_cast<std::size_t>(L), 0);
  for (const auto& [q, arms] : counts.queries)
    for (const auto& [a, cells] : arms)
      for (std::size_t l = 0; l < cells.size(); ++l)
        impressions_at[l] += cells[l].impressions;
  for (int l = 0; l < L; ++l)
    if (impressions_at[static_cast<std::size_t>(l)] == 0)
      throw std::invalid_argument("em_fit: no impressions at position " + std::to_string(l + 1));

  static constexpr double kThetaLo = 1e-6;
  static constexpr double kThetaHi = 1.0 - 1e-6;
  const auto clamp_theta = [](double v) { return std::clamp(v, kThetaLo, kThetaHi); };
  // kappa may sit at exactly 1 (the domain is (0,1]); theta stays inside (0,1).
  const auto clamp_kappa = [](double v) { return std::clamp(v, kThetaLo, 1.0); };

  std::int64_t all_clicks = 0, all_impressions = 0;
  for (const auto& [q, arms] : counts.queries)
    for (const auto& [a, cells] : arms)
      for (const CellCounts& c : cells) {
        all_clicks += c.clicks;
        all_impressions += c.impressions;
      }
  const double global_ctr =
      clamp_theta(static_cast<double>(all_clicks) / static_cast<double>(all_impressions));

  std::vector<double> kappa(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) kappa[static_cast<std::size_t>(l)] = 1.0 / static_cast<double>(l + 1);

  std::map<std::string, std::map<std::string, double>> theta;
  for (const auto& [q, arms] : counts.queries)
    for (const auto& [a, cells] : arms) {
      const CellCounts& first = cells[0];
      theta[q][a] = first.impressions > 0
                        ? clamp_theta(static_cast<double>(first.clicks) /
                                      static_cast<double>(first.impressions))
                        : global_ctr;
    }

  FitResult result;
  result.num_positions = L;
  result.log_likelihood.push_back(log_likelihood(counts, kappa, theta));
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    std::vector<double> exam_at(static_cast<std::size_t>(L), 0.0);  // expected examinations
    std::map<std::string, std::map<std::string, double>> new_theta;
    for (const auto& [q, arms] : counts.queries) {
      for (const auto& [a, cells] : arms) {
        const double th = theta[q][a];
        double clicks_k = 0.0, exam_k = 0.0;
        for (std::size_t l = 0; l < cells.size(); ++l) {
          const CellCounts& c = cells[l];
          if (c.impressions == 0) continue;
          const double k = kappa[l];
          // Unclicked impression: examined-but-unattracted with probability
          // k(1-th)/(1-k*th); clicked ones were examined for sure.
          const double unclicked = static_cast<double>(c.impressions - c.clicks);
          const double examined =
              static_cast<double>(c.clicks) + unclicked * k * (1.0 - th) / (1.0 - k * th);
          exam_at[l] += examined;
          clicks_k += static_cast<double>(c.clicks);
          exam_k += examined;
        }
        new_theta[q][a] = exam_k > 0.0 ? clamp_theta(clicks_k / exam_k) : th;
      }
    }
    for (int l = 0; l < L; ++l)
      kappa[static_cast<std::size_t>(l)] =
          clamp_kappa(exam_at[static_cast<std::size_t>(l)] /
                      static_cast<double>(impressions_at[static_cast<std::size_t>(l)]));
    theta = std::move(new_theta);

    const double ll = log_likelihood(counts, kappa, theta);
    if (!std::isfinite(ll))
      throw std::runtime_error("em_fit: non-finite log-likelihood at iteration " +
                               std::to_string(iter + 1));
    const double prev = result.log_likelihood.back();
    result.log_likelihood.push_back(ll);
    if (ll - prev < options.tolerance * std::max(1.0, std::abs(prev))) {
      converged = true;
      ++iter;
      break;
    }
  }
  result.iterations = iter;
  result.converged = converged;
  result.kappa = kappa;
  for (const auto& [q, arms] : counts.queries) {
    QueryFit qf;
    qf.query_id = q;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& [a, cells] : arms) {
      qf.arms.push_back(a);
      const double th = theta[q][a];
      qf.theta.push_back(th);
      lo = std::min(lo, th);
      hi = std::max(hi, th);
      for (const CellCounts& c : cells) qf.records += c.impressions;
    }
    qf.theta_min = lo;
    qf.theta_max = hi;
    result.queries.push_back(std::move(qf));
  }
  return result;
}

// Per-query theta table: query_id,arm_id,theta.
inline void write_theta_csv(const FitResult& fit, std::ostream& out) {
  char buf[64];
  out << "query_id,arm_id,theta\n";
  for (const QueryFit& q : fit.queries)
    for (std::size_t i = 0; i < q.arms.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", q.theta[i]);
      out << q.query_id << ',' << q.arms[i] << ',' << buf << '\n';
    }
}

}  // namespace pbm::emfit
