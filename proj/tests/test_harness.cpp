#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pbm/bound.hpp"
#include "pbm/harness.hpp"
#include "pbm/io.hpp"

using namespace pbm;
using namespace pbm::harness;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.model = PbmModel({0.45, 0.35, 0.25, 0.15, 0.05}, {0.9, 0.6, 0.3});
  for (const char* kind : {"pbm_ucb", "pbm_ts", "random"}) {
    PolicySpec spec;
    spec.label = kind;
    spec.config.kind = policy_kind_from_string(kind);
    c.policies.push_back(spec);
  }
  c.horizon = 500;
  c.replications = 12;
  c.base_seed = 424242;
  c.checkpoints = 11;
  return c;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("checkpoints are log-spaced, unique, and end at the horizon") {
  const auto pts = make_checkpoints(100000, 51);
  CHECK(pts.front() == 1);
  CHECK(pts.back() == 100000);
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i] > pts[i - 1]);
  // powers of ten land exactly on the grid
  for (std::int64_t t : {10, 100, 1000, 10000, 100000})
    CHECK(std::find(pts.begin(), pts.end(), t) != pts.end());
  CHECK(make_checkpoints(50, 1) == std::vector<std::int64_t>{50});
}

TEST_CASE("config validation catches structural mistakes") {
  ExperimentConfig c = small_config();
  c.policies[1].label = "pbm_ucb";  // duplicate
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.horizon = 3;  // below K
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.model.reset();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = small_config();
  c.replications = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("random policy has zero pseudo-regret when all arms are equal") {
  ExperimentConfig c;
  c.model = PbmModel({0.3, 0.3, 0.3, 0.3}, {0.9, 0.5});
  PolicySpec spec;
  spec.label = "random";
  spec.config.kind = PolicyKind::random;
  c.policies.push_back(spec);
  c.horizon = 200;
  c.replications = 5;
  c.base_seed = 7;
  c.checkpoints = 5;
  const ExperimentResult r = run_experiment(c);
  for (const auto& row : r.curves.at("random").per_replication)
    for (double v : row) CHECK(v == 0.0);
}

TEST_CASE("cumulative regret is nondecreasing and deciles bracket the mean") {
  const ExperimentConfig c = small_config();
  const ExperimentResult r = run_experiment(c, 2);
  for (const auto& [label, curve] : r.curves) {
    CAPTURE(label);
    for (const auto& row : curve.per_replication) {
      REQUIRE(row.size() == curve.checkpoints.size());
      for (std::size_t i = 1; i < row.size(); ++i) CHECK(row[i] >= row[i - 1]);
    }
    for (std::size_t i = 0; i < curve.checkpoints.size(); ++i) {
      CHECK(curve.decile_10[i] <= curve.mean[i] + 1e-12);
      CHECK(curve.mean[i] <= curve.decile_90[i] + 1e-12);
    }
  }
}

TEST_CASE("parallel and serial execution produce identical results") {
  const ExperimentConfig c = small_config();
  const ExperimentResult serial = run_experiment(c, 1);
  const ExperimentResult parallel = run_experiment(c, 4);
  for (const auto& [label, curve] : serial.curves) {
    const RegretCurve& other = parallel.curves.at(label);
    REQUIRE(curve.per_replication.size() == other.per_replication.size());
    for (std::size_t rep = 0; rep < curve.per_replication.size(); ++rep)
      for (std::size_t i = 0; i < curve.per_replication[rep].size(); ++i)
        CHECK(curve.per_replication[rep][i] == other.per_replication[rep][i]);
  }
}

TEST_CASE("stream seeds depend only on their coordinates") {
  CHECK(derive_stream_seed(1, 2, "a") == derive_stream_seed(1, 2, "a"));
  CHECK(derive_stream_seed(1, 2, "a") != derive_stream_seed(1, 3, "a"));
  CHECK(derive_stream_seed(1, 2, "a") != derive_stream_seed(2, 2, "a"));
  CHECK(derive_stream_seed(1, 2, "a") != derive_stream_seed(1, 2, "b"));
}

TEST_CASE("export writes the pinned CSV header and a reparsable summary") {
  const ExperimentConfig c = small_config();
  const ExperimentResult r = run_experiment(c, 2);
  const std::optional<BoundReport> bound = regret_lower_bound(*c.model);
  TempDir dir("pbm_export_test");
  export_results(c, r, bound, dir.path.string());

  for (const char* name : {"pbm_ucb.csv", "pbm_ts.csv", "random.csv"}) {
    const std::string text = slurp(dir.path / name);
    CHECK(text.rfind("t,mean_regret,decile_10,decile_90\n", 0) == 0);
  }

  const io::json summary = io::read_json_file((dir.path / "summary.json").string());
  CHECK(summary.at("config").at("horizon").get<std::int64_t>() == 500);
  CHECK(summary.at("policies").size() == 3);
  CHECK(summary.at("bound").at("f_theta").get<double>() == doctest::Approx(5.5919491700572).epsilon(1e-9));

  // reference curve: f(theta) * log t at every checkpoint
  std::istringstream ref(slurp(dir.path / "lower_bound.csv"));
  std::string line;
  std::getline(ref, line);
  CHECK(line == "t,lower_bound");
  const auto& cps = r.curves.begin()->second.checkpoints;
  std::size_t i = 0;
  while (std::getline(ref, line)) {
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    const double t = std::stod(line.substr(0, comma));
    const double v = std::stod(line.substr(comma + 1));
    CHECK(t == doctest::Approx(static_cast<double>(cps[i])));
    CHECK(v == doctest::Approx(bound->f_theta * std::log(t)).epsilon(1e-12));
    ++i;
  }
  CHECK(i == cps.size());
}

TEST_CASE("export is byte-identical across runs and thread counts") {
  const ExperimentConfig c = small_config();
  TempDir dir_a("pbm_det_a");
  TempDir dir_b("pbm_det_b");
  export_results(c, run_experiment(c, 1), std::nullopt, dir_a.path.string());
  export_results(c, run_experiment(c, 3), std::nullopt, dir_b.path.string());
  for (const char* name : {"pbm_ucb.csv", "pbm_ts.csv", "random.csv", "summary.json"})
    CHECK(slurp(dir_a.path / name) == slurp(dir_b.path / name));
}

TEST_CASE("model pool mode draws a model per replication") {
  ExperimentConfig c;
  c.pool.push_back(PbmModel({0.5, 0.4, 0.2}, {0.9, 0.5}));
  c.pool.push_back(PbmModel({0.3, 0.2, 0.1, 0.05}, {0.8, 0.4}));
  c.pool_source = "inline-pool";
  PolicySpec spec;
  spec.label = "pbm_ucb";
  spec.config.kind = PolicyKind::pbm_ucb;
  c.policies.push_back(spec);
  c.horizon = 300;
  c.replications = 10;
  c.base_seed = 99;
  c.checkpoints = 4;
  const ExperimentResult r = run_experiment(c, 2);
  const RegretCurve& curve = r.curves.at("pbm_ucb");
  CHECK(curve.per_replication.size() == 10);
  for (const auto& row : curve.per_replication) CHECK(row.size() == curve.checkpoints.size());
}

TEST_CASE("experiment config round-trips through JSON") {
  ExperimentConfig c = small_config();
  c.policies[0].config.epsilon = 0.25;
  c.policies[0].config.horizon_mode = HorizonMode::fixed_horizon_log_T;
  c.policies[0].config.horizon_T = 12345;
  const io::json j = config_to_json(c);
  const ExperimentConfig back = config_from_json(j);
  CHECK(back.horizon == c.horizon);
  CHECK(back.replications == c.replications);
  CHECK(back.base_seed == c.base_seed);
  CHECK(back.checkpoints == c.checkpoints);
  REQUIRE(back.policies.size() == c.policies.size());
  CHECK(back.policies[0].config.epsilon == 0.25);
  CHECK(back.policies[0].config.horizon_mode == HorizonMode::fixed_horizon_log_T);
  CHECK(back.policies[0].config.horizon_T == 12345);
  CHECK(back.model->theta() == c.model->theta());
  CHECK(config_to_json(back) == j);
}
