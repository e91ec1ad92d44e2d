// Command-line front end: simulate / bound / fit / index / version.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pbm/bound.hpp"
#include "pbm/harness.hpp"
#include "pbm/indices.hpp"
#include "pbm/io.hpp"
#include "pbm/model.hpp"
#include "pbm/stats.hpp"

namespace {

constexpr const char* kVersion = "pbm-bandit-lab 1.0.0";

int default_threads() {
  if (const char* env = std::getenv("PBM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

int run_simulate(const std::string& config_path, const std::string& out_override, int threads) {
  const auto config_dir = std::filesystem::path(config_path).parent_path();
  pbm::harness::ExperimentConfig config = pbm::harness::config_from_json(
      pbm::io::read_json_file(config_path), config_dir.empty() ? "." : config_dir.string());
  if (!out_override.empty()) config.output_dir = out_override;
  config.validate();

  std::optional<pbm::BoundReport> bound;
  if (config.model) bound = pbm::regret_lower_bound(*config.model);

  const auto start = std::chrono::steady_clock::now();
  const pbm::harness::ExperimentResult result = pbm::harness::run_experiment(config, threads);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  pbm::harness::export_results(config, result, bound, config.output_dir);

  std::cerr << "simulate: " << config.policies.size() << " policies x " << config.replications
            << " replications x T=" << config.horizon << " finished in " << seconds << " s on "
            << threads << " thread(s); results in " << config.output_dir << "\n";
  for (const auto& [label, curve] : result.curves)
    std::cerr << "  " << label << ": final mean regret " << curve.mean.back() << "\n";
  return 0;
}

int run_bound(const std::string& model_path, const std::string& curve_path, double tmax,
              int points) {
  const pbm::PbmModel model = pbm::io::load_model(model_path);
  const pbm::BoundReport report = pbm::regret_lower_bound(model);
  std::cout << pbm::io::bound_report_to_json(report).dump(2) << "\n";
  if (!curve_path.empty()) {
    std::ostringstream csv;
    csv << "t,bound\n";
    const auto grid = pbm::harness::make_checkpoints(static_cast<std::int64_t>(tmax), points);
    for (const std::int64_t t : grid)
      csv << t << ',' << pbm::harness::format_double(report.f_theta * std::log(static_cast<double>(t)))
          << '\n';
    pbm::io::write_text_file(curve_path, csv.str());
    std::cerr << "bound: reference curve written to " << curve_path << "\n";
  }
  return 0;
}

int run_fit(const std::string& input_path, int positions, std::int64_t min_impressions,
            int min_arms, int max_iters, double tol, const std::string& out_path,
            const std::string& theta_csv_path) {
  std::ifstream in(input_path);
  if (!in) throw std::runtime_error("cannot open '" + input_path + "'");
  pbm::emfit::IngestOptions ingest_options;
  ingest_options.min_impressions = min_impressions;
  ingest_options.min_arms = min_arms;
  const pbm::emfit::AggregatedCounts counts = pbm::emfit::ingest(in, positions, ingest_options);
  if (counts.queries.empty())
    throw std::runtime_error("fit: no queries survive the filters (min_impressions=" +
                             std::to_string(min_impressions) +
                             ", min_arms=" + std::to_string(min_arms) + ")");

  pbm::emfit::EmOptions em_options;
  em_options.max_iterations = max_iters;
  em_options.tolerance = tol;
  const pbm::emfit::FitResult fit = pbm::emfit::em_fit(counts, em_options);

  const std::string json_text = pbm::io::fit_result_to_json(fit).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << json_text;
  } else {
    pbm::io::write_text_file(out_path, json_text);
    std::cerr << "fit: result written to " << out_path << "\n";
  }
  if (!theta_csv_path.empty()) {
    std::ostringstream csv;
    pbm::emfit::write_theta_csv(fit, csv);
    pbm::io::write_text_file(theta_csv_path, csv.str());
  }
  std::cerr << "fit: " << fit.queries.size() << " queries, " << fit.iterations << " iterations, "
            << (fit.converged ? "converged" : "iteration cap reached") << "\n";
  for (const auto& q : fit.queries)
    std::cerr << "  query " << q.query_id << ": K=" << q.arms.size() << " records=" << q.records
              << " theta in [" << q.theta_min << ", " << q.theta_max << "]\n";
  return 0;
}

int run_index(const std::string& counters_path, int arm, const std::string& kappa_csv,
              const std::string& model_path, int points, double delta) {
  std::vector<double> kappa;
  if (!model_path.empty())
    kappa = pbm::io::load_model(model_path).kappa();
  else if (!kappa_csv.empty())
    kappa = parse_double_list(kappa_csv);
  else
    throw std::runtime_error("index: provide --kappa or --model for the examination parameters");

  std::ifstream in(counters_path);
  if (!in) throw std::runtime_error("cannot open '" + counters_path + "'");
  const pbm::CounterSet counters = pbm::CounterSet::read_csv(in, kappa);

  std::cout << "q,phi\n";
  for (int i = 0; i <= points; ++i) {
    const double q = static_cast<double>(i) / static_cast<double>(points);
    std::cout << pbm::harness::format_double(q) << ','
              << pbm::harness::format_double(pbm::phi(counters, arm, q)) << "\n";
  }
  if (delta >= 0.0) {
    const auto [theta_min, phi_value] = pbm::phi_min(counters, arm);
    const pbm::IndexResult idx = pbm::pie_index(counters, arm, delta);
    std::cerr << "index: theta_min=" << theta_min << " phi(theta_min)=" << phi_value
              << " index(delta=" << delta << ")=" << idx.value
              << (idx.at_boundary ? " (saturated)" : "") << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-play bandit laboratory for the position-based click model"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Run a seeded multi-replication experiment");
  std::string config_path;
  std::string out_override;
  int threads = default_threads();
  simulate->add_option("--config", config_path, "Experiment config JSON")->required();
  simulate->add_option("--out", out_override, "Output directory (overrides config)");
  simulate->add_option("--threads", threads, "Worker threads (default: PBM_THREADS or hardware)");

  auto* bound = app.add_subcommand("bound", "Print the regret lower-bound report for a model");
  std::string model_path;
  std::string curve_path;
  double tmax = 1e6;
  int curve_points = 50;
  bound->add_option("--model", model_path, "Model JSON file")->required();
  bound->add_option("--curve", curve_path, "Write f(theta) log t as CSV t,bound to this path");
  bound->add_option("--tmax", tmax, "Largest t on the reference grid");
  bound->add_option("--points", curve_points, "Number of grid points");

  auto* fit = app.add_subcommand("fit", "Fit (kappa, theta) from click logs with EM");
  std::string fit_input;
  int fit_positions = 3;
  std::int64_t min_impressions = 1000;
  int min_arms = 5;
  int max_iters = 500;
  double tol = 1e-8;
  std::string fit_out;
  std::string theta_csv;
  fit->add_option("--input", fit_input, "Click log CSV")->required();
  fit->add_option("--positions", fit_positions, "Number of display positions L")->required();
  fit->add_option("--min-impressions", min_impressions, "Keep (query,arm) with at least this many impressions at every position");
  fit->add_option("--min-arms", min_arms, "Keep queries with at least this many surviving arms");
  fit->add_option("--max-iters", max_iters, "EM iteration cap");
  fit->add_option("--tol", tol, "Relative log-likelihood improvement threshold");
  fit->add_option("--out", fit_out, "Write FitResult JSON here (default: stdout)");
  fit->add_option("--theta-csv", theta_csv, "Write per-query theta table CSV here");

  auto* index = app.add_subcommand("index", "Dump the Phi profile of an arm as CSV q,phi");
  std::string counters_path;
  int arm = 1;
  std::string kappa_csv;
  std::string index_model;
  int phi_points = 200;
  double index_delta = -1.0;
  index->add_option("--counters", counters_path, "Counters CSV (arm,position,plays,clicks)")->required();
  index->add_option("--arm", arm, "Arm id")->required();
  index->add_option("--kappa", kappa_csv, "Comma-separated examination probabilities");
  index->add_option("--model", index_model, "Model JSON (kappa source)");
  index->add_option("--points", phi_points, "Grid resolution");
  index->add_option("--delta", index_delta, "Also report the KL index at this exploration level");

  auto* version = app.add_subcommand("version", "Print version");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return run_simulate(config_path, out_override, threads);
    if (bound->parsed()) return run_bound(model_path, curve_path, tmax, curve_points);
    if (fit->parsed())
      return run_fit(fit_input, fit_positions, min_impressions, min_arms, max_iters, tol, fit_out,
                     theta_csv);
    if (index->parsed())
      return run_index(counters_path, arm, kappa_csv, index_model, phi_points, index_delta);
    if (version->parsed()) {
      std::cout << kVersion << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
