#pragma once

#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbm/bound.hpp"
#include "pbm/emfit.hpp"
#include "pbm/model.hpp"
#include "pbm/policies.hpp"

namespace pbm::io {

using nlohmann::json;

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("failed to parse '" + path + "': " + e.what());
  }
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed while writing '" + path + "'");
}

// Model files carry K, L, theta (K reals) and kappa (L reals).
inline PbmModel model_from_json(const json& j) {
  for (const char* key : {"K", "L", "theta", "kappa"})
    if (!j.contains(key)) throw std::runtime_error(std::string("model file: missing field '") + key + "'");
  const auto theta = j.at("theta").get<std::vector<double>>();
  const auto kappa = j.at("kappa").get<std::vector<double>>();
  if (j.at("K").get<std::size_t>() != theta.size())
    throw std::runtime_error("model file: K does not match theta length");
  if (j.at("L").get<std::size_t>() != kappa.size())
    throw std::runtime_error("model file: L does not match kappa length");
  try {
    return PbmModel(theta, kappa);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
}

inline json model_to_json(const PbmModel& m) {
  return json{{"K", m.num_arms()},
              {"L", m.num_positions()},
              {"theta", m.theta()},
              {"kappa", m.kappa()}};
}

inline PbmModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

inline json fit_result_to_json(const emfit::FitResult& fit) {
  json queries = json::array();
  for (const emfit::QueryFit& q : fit.queries)
    queries.push_back(json{{"query_id", q.query_id},
                           {"num_arms", q.arms.size()},
                           {"arms", q.arms},
                           {"theta", q.theta},
                           {"records", q.records},
                           {"theta_min", q.theta_min},
                           {"theta_max", q.theta_max}});
  return json{{"L", fit.num_positions},
              {"kappa", fit.kappa},
              {"queries", queries},
              {"log_likelihood", fit.log_likelihood},
              {"iterations", fit.iterations},
              {"converged", fit.converged}};
}

inline emfit::FitResult fit_result_from_json(const json& j) {
  emfit::FitResult fit;
  fit.num_positions = j.at("L").get<int>();
  fit.kappa = j.at("kappa").get<std::vector<double>>();
  for (const json& q : j.at("queries")) {
    emfit::QueryFit qf;
    qf.query_id = q.at("query_id").get<std::string>();
    qf.arms = q.at("arms").get<std::vector<std::string>>();
    qf.theta = q.at("theta").get<std::vector<double>>();
    qf.records = q.value("records", std::int64_t{0});
    qf.theta_min = q.value("theta_min", 0.0);
    qf.theta_max = q.value("theta_max", 0.0);
    fit.queries.push_back(std::move(qf));
  }
  if (j.contains("log_likelihood"))
    fit.log_likelihood = j.at("log_likelihood").get<std::vector<double>>();
  fit.iterations = j.value("iterations", 0);
  fit.converged = j.value("converged", false);
  return fit;
}

// One bandit model per fitted query: shared kappa, per-query theta.
inline std::vector<PbmModel> models_from_fit(const emfit::FitResult& fit) {
  std::vector<PbmModel> pool;
  pool.reserve(fit.queries.size());
  for (const emfit::QueryFit& q : fit.queries) pool.emplace_back(q.theta, fit.kappa);
  return pool;
}

inline json bound_report_to_json(const BoundReport& report) {
  json per_arm = json::array();
  for (const PerArmBound& p : report.per_arm) {
    json entry{{"arm", p.arm},
               {"best_position", p.best_position},
               {"gap", p.gap},
               {"kl_denominator", p.kl_denominator}};
    if (std::isfinite(p.ratio))
      entry["ratio"] = p.ratio;
    else
      entry["ratio"] = "inf";
    per_arm.push_back(entry);
  }
  return json{{"f_theta", report.f_theta},
              {"has_infinite_terms", report.has_infinite_terms},
              {"per_arm", per_arm},
              {"crude", report.crude},
              {"ucb_constant_C", report.ucb_constant_C}};
}

inline HorizonMode horizon_mode_from_string(const std::string& s) {
  if (s == "anytime_log_t") return HorizonMode::anytime_log_t;
  if (s == "fixed_horizon_log_T") return HorizonMode::fixed_horizon_log_T;
  throw std::runtime_error("config: unknown horizon_mode '" + s + "'");
}

inline std::string to_string(HorizonMode m) {
  return m == HorizonMode::anytime_log_t ? "anytime_log_t" : "fixed_horizon_log_T";
}

inline json policy_config_to_json(const std::string& label, const PolicyConfig& cfg) {
  json j{{"label", label},
         {"kind", pbm::to_string(cfg.kind)},
         {"epsilon", cfg.epsilon},
         {"horizon_mode", to_string(cfg.horizon_mode)}};
  if (cfg.horizon_T) j["horizon_T"] = *cfg.horizon_T;
  return j;
}

}  // namespace pbm::io
