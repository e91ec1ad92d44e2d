#pragma once

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pbm/bound.hpp"
#include "pbm/io.hpp"
#include "pbm/model.hpp"
#include "pbm/policies.hpp"
#include "pbm/rng.hpp"

namespace pbm::harness {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Output file stem for a policy label.
inline std::string label_slug(const std::string& label) {
  std::string s;
  for (char c : label)
    s.push_back(std::isalnum(static_cast<unsigned char>(c))
                    ? static_cast<char>(std::tolower(static_cast<unsigned char>(c)))
                    : '_');
  return s;
}

struct PolicySpec {
  std::string label;
  PolicyConfig config;
};

struct ExperimentConfig {
  std::optional<PbmModel> model;    // inline single-instance mode
  std::vector<PbmModel> pool;      // pool mode: drawn uniformly per replication
  std::string pool_source;         // path echoed into the summary
  std::vector<PolicySpec> policies;
  std::int64_t horizon = 0;
  int replications = 0;
  std::uint64_t base_seed = 0;
  int checkpoints = 50;
  std::string output_dir = "pbm_out";

  void validate() const {
    if (!model && pool.empty())
      throw std::invalid_argument("config: either an inline model or a model pool is required");
    if (model && !pool.empty())
      throw std::invalid_argument("config: inline model and model pool are mutually exclusive");
    if (policies.empty()) throw std::invalid_argument("config: at least one policy required");
    if (replications < 1) throw std::invalid_argument("config: replications must be >= 1");
    if (checkpoints < 1) throw std::invalid_argument("config: checkpoints must be >= 1");
    int max_arms = 0;
    if (model) max_arms = model->num_arms();
    for (const PbmModel& m : pool) max_arms = std::max(max_arms, m.num_arms());
    if (horizon < max_arms)
      throw std::invalid_argument("config: horizon must be >= K so initialization fits");
    std::vector<std::string> slugs;
    for (const PolicySpec& p : policies) {
      p.config.validate();
      if (p.label.empty()) throw std::invalid_argument("config: policy label must be non-empty");
      const std::string slug = label_slug(p.label);
      for (const std::string& seen : slugs)
        if (seen == slug)
          throw std::invalid_argument("config: policy labels '" + p.label +
                                      "' collide on the output file name '" + slug + ".csv'");
      slugs.push_back(slug);
    }
  }
};

// Cumulative pseudo-regret at log-spaced checkpoints, per replication, with
// mean and first/last decile aggregates.
struct RegretCurve {
  std::vector<std::int64_t> checkpoints;
  std::vector<std::vector<double>> per_replication;  // [rep][checkpoint]; empty row = aborted
  std::vector<double> mean;
  std::vector<double> decile_10;
  std::vector<double> decile_90;
};

struct ReplicationFailure {
  std::string label;
  int replication = 0;
  std::string message;
};

struct ExperimentResult {
  std::map<std::string, RegretCurve> curves;
  std::map<std::string, PolicyDiagnostics> diagnostics;
  std::vector<ReplicationFailure> failures;
};

inline std::vector<std::int64_t> make_checkpoints(std::int64_t horizon, int count) {
  std::vector<std::int64_t> pts;
  if (count < 2 || horizon <= 1) {
    pts.push_back(horizon);
    return pts;
  }
  const double log_t = std::log(static_cast<double>(horizon));
  for (int i = 0; i < count; ++i) {
    const double v = std::exp(log_t * static_cast<double>(i) / static_cast<double>(count - 1));
    const std::int64_t t = std::min<std::int64_t>(horizon, std::max<std::int64_t>(1, std::llround(v)));
    if (pts.empty() || t != pts.back()) pts.push_back(t);
  }
  if (pts.back() != horizon) pts.push_back(horizon);
  return pts;
}

// Linear-interpolation quantile of an already sorted vector.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double idx = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace detail {

struct ReplicationOutput {
  std::vector<double> regret;  // per checkpoint; empty on failure
  PolicyDiagnostics diagnostics;
  std::string error;
};

inline ReplicationOutput run_replication(const ExperimentConfig& config, const PolicySpec& spec,
                                         int replication,
                                         const std::vector<std::int64_t>& checkpoints) {
  ReplicationOutput out;
  try {
    Rng rng(derive_stream_seed(config.base_seed, static_cast<std::uint64_t>(replication), spec.label));
    const PbmModel& model = config.pool.empty()
                                ? *config.model
                                : config.pool[rng.uniform_int(config.pool.size())];
    auto policy = make_policy(spec.config, model.num_arms(), model.kappa());
    const double mu_star = optimal_reward(model);
    out.regret.reserve(checkpoints.size());
    double cumulative = 0.0;
    std::size_t next_cp = 0;
    for (std::int64_t t = 1; t <= config.horizon; ++t) {
      const Action a = policy->select_action(rng);
      cumulative += mu_star - expected_reward(model, a);
      const Feedback z = sample_feedback(model, a, rng);
      policy->update(a, z);
      if (next_cp < checkpoints.size() && t == checkpoints[next_cp]) {
        out.regret.push_back(cumulative);
        ++next_cp;
      }
    }
    out.diagnostics = policy->diagnostics();
  } catch (const std::exception& e) {
    out.regret.clear();
    out.error = e.what();
  }
  return out;
}

}  // namespace detail

// Runs every (policy, replication) pair on a bounded worker pool. Each pair
// draws from its own stream seeded by (base_seed, replication, label), so the
// schedule cannot influence any result and parallel equals serial.
inline ExperimentResult run_experiment(const ExperimentConfig& config, int threads = 1) {
  config.validate();
  const std::vector<std::int64_t> checkpoints = make_checkpoints(config.horizon, config.checkpoints);
  const std::size_t num_policies = config.policies.size();
  const std::size_t reps = static_cast<std::size_t>(config.replications);

  std::vector<std::vector<detail::ReplicationOutput>> raw(num_policies);
  for (auto& v : raw) v.resize(reps);

  const std::size_t total = num_policies * reps;
  std::atomic<std::size_t> cursor{0};
  const int workers = std::max(1, threads);
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= total) return;
      const std::size_t p = i / reps;
      const std::size_t r = i % reps;
      raw[p][r] = detail::run_replication(config, config.policies[p], static_cast<int>(r), checkpoints);
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  ExperimentResult result;
  std::size_t failures = 0;
  for (std::size_t p = 0; p < num_policies; ++p) {
    const std::string& label = config.policies[p].label;
    RegretCurve curve;
    curve.checkpoints = checkpoints;
    curve.per_replication.resize(reps);
    PolicyDiagnostics diag;
    for (std::size_t r = 0; r < reps; ++r) {
      detail::ReplicationOutput& o = raw[p][r];
      if (!o.error.empty()) {
        ++failures;
        result.failures.push_back({label, static_cast<int>(r), o.error});
        continue;
      }
      diag.posterior += o.diagnostics.posterior;
      curve.per_replication[r] = std::move(o.regret);
    }
    const std::size_t C = checkpoints.size();
    curve.mean.assign(C, 0.0);
    curve.decile_10.assign(C, 0.0);
    curve.decile_90.assign(C, 0.0);
    std::vector<double> column;
    for (std::size_t c = 0; c < C; ++c) {
      column.clear();
      for (const auto& row : curve.per_replication)
        if (!row.empty()) column.push_back(row[c]);
      if (column.empty()) continue;
      double sum = 0.0;
      for (double v : column) sum += v;
      curve.mean[c] = sum / static_cast<double>(column.size());
      std::sort(column.begin(), column.end());
      curve.decile_10[c] = sorted_quantile(column, 0.10);
      curve.decile_90[c] = sorted_quantile(column, 0.90);
    }
    result.curves[label] = std::move(curve);
    result.diagnostics[label] = diag;
  }

  if (static_cast<double>(failures) > 0.01 * static_cast<double>(total)) {
    std::string msg = "run_experiment: " + std::to_string(failures) + "/" + std::to_string(total) +
                      " replications aborted";
    for (std::size_t i = 0; i < result.failures.size() && i < 3; ++i)
      msg += "; [" + result.failures[i].label + " rep " +
             std::to_string(result.failures[i].replication) + "] " + result.failures[i].message;
    throw std::runtime_error(msg);
  }
  return result;
}

inline io::json config_to_json(const ExperimentConfig& config) {
  io::json j;
  if (config.model) j["model"] = io::model_to_json(*config.model);
  if (!config.pool.empty()) {
    j["model_pool"] = config.pool_source;
    j["pool_size"] = config.pool.size();
  }
  io::json pols = io::json::array();
  for (const PolicySpec& p : config.policies) pols.push_back(io::policy_config_to_json(p.label, p.config));
  j["policies"] = pols;
  j["horizon"] = config.horizon;
  j["replications"] = config.replications;
  j["base_seed"] = config.base_seed;
  j["checkpoints"] = config.checkpoints;
  j["output_dir"] = config.output_dir;
  return j;
}

inline ExperimentConfig config_from_json(const io::json& j, const std::string& config_dir = ".") {
  ExperimentConfig c;
  if (j.contains("model")) c.model = io::model_from_json(j.at("model"));
  if (j.contains("model_pool")) {
    const std::string rel = j.at("model_pool").get<std::string>();
    const std::filesystem::path p = std::filesystem::path(rel).is_absolute()
                                        ? std::filesystem::path(rel)
                                        : std::filesystem::path(config_dir) / rel;
    c.pool_source = rel;
    c.pool = io::models_from_fit(io::fit_result_from_json(io::read_json_file(p.string())));
  }
  for (const io::json& pj : j.at("policies")) {
    PolicySpec spec;
    spec.config.kind = policy_kind_from_string(pj.at("kind").get<std::string>());
    spec.label = pj.value("label", pbm::to_string(spec.config.kind));
    if (pj.contains("epsilon")) spec.config.epsilon = pj.at("epsilon").get<double>();
    if (pj.contains("horizon_mode"))
      spec.config.horizon_mode = io::horizon_mode_from_string(pj.at("horizon_mode").get<std::string>());
    if (pj.contains("horizon_T")) spec.config.horizon_T = pj.at("horizon_T").get<std::int64_t>();
    c.policies.push_back(std::move(spec));
  }
  c.horizon = j.at("horizon").get<std::int64_t>();
  c.replications = j.at("replications").get<int>();
  c.base_seed = j.at("base_seed").get<std::uint64_t>();
  c.checkpoints = j.value("checkpoints", 50);
  c.output_dir = j.value("output_dir", std::string("pbm_out"));
  return c;
}

// Writes per-policy regret CSVs, the optional reference lower-bound curve,
// and a deterministic JSON summary (no wall-clock content, so identical
// configurations reproduce byte-identical files).
inline void export_results(const ExperimentConfig& config, const ExperimentResult& result,
                           const std::optional<BoundReport>& bound, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("export: cannot create directory '" + out_dir + "': " + ec.message());

  for (const auto& [label, curve] : result.curves) {
    std::ostringstream csv;
    csv << "t,mean_regret,decile_10,decile_90\n";
    for (std::size_t c = 0; c < curve.checkpoints.size(); ++c)
      csv << curve.checkpoints[c] << ',' << format_double(curve.mean[c]) << ','
          << format_double(curve.decile_10[c]) << ',' << format_double(curve.decile_90[c]) << '\n';
    io::write_text_file((fs::path(out_dir) / (label_slug(label) + ".csv")).string(), csv.str());
  }

  io::json summary;
  summary["config"] = config_to_json(config);
  summary["seed_derivation"] =
      "stream = splitmix64_avalanche(splitmix64_avalanche(base_seed + golden_gamma*(replication+1)) xor fnv1a64(label))";
  io::json policies = io::json::array();
  for (const PolicySpec& spec : config.policies) {
    if (result.curves.find(spec.label) == result.curves.end()) continue;
    const RegretCurve& curve = result.curves.at(spec.label);
    const PolicyDiagnostics& diag = result.diagnostics.at(spec.label);
    std::size_t aborted = 0;
    for (const auto& f : result.failures)
      if (f.label == spec.label) ++aborted;
    io::json pj = io::policy_config_to_json(spec.label, spec.config);
    pj["final_mean_regret"] = curve.mean.back();
    pj["final_decile_10"] = curve.decile_10.back();
    pj["final_decile_90"] = curve.decile_90.back();
    pj["aborted_replications"] = aborted;
    pj["posterior_sampler"] = io::json{{"proposals", diag.posterior.proposals},
                                       {"accepts", diag.posterior.accepts},
                                       {"grid_fallbacks", diag.posterior.grid_fallbacks}};
    policies.push_back(pj);
  }
  summary["policies"] = policies;
  if (bound) {
    summary["bound"] = io::bound_report_to_json(*bound);
    std::ostringstream csv;
    csv << "t,lower_bound\n";
    const std::vector<std::int64_t>& cps = result.curves.begin()->second.checkpoints;
    for (std::int64_t t : cps)
      csv << t << ',' << format_double(bound->f_theta * std::log(static_cast<double>(t))) << '\n';
    io::write_text_file((fs::path(out_dir) / "lower_bound.csv").string(), csv.str());
  }
  io::write_text_file((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
}

}  // namespace pbm::harness
