#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "flowmc/runner.hpp"

using namespace flowmc;

TEST_CASE("config parsing: defaults, unknown keys, basic validation") {
  auto cfg = parse_config(R"({"experiment": "three_flows"})");
  CHECK(cfg.experiment == "three_flows");
  CHECK(cfg.dim == 16);
  CHECK(cfg.n_chains == 64);
  CHECK(cfg.n_steps == 1000);
  CHECK(cfg.seed == 0);
  CHECK(cfg.record_wall_ms == false);

  CHECK_THROWS_AS(parse_config(R"({"experiment": "three_flows", "typo_key": 1})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({"experiment": "no_such_experiment"})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config(R"({})"), std::invalid_argument);
  // chains are split in half for warmup, so odd lengths are rejected
  CHECK_THROWS_AS(parse_config(R"({"experiment": "three_flows", "n_steps": 101})"),
                  std::invalid_argument);
}

TEST_CASE("config round trip through canonical JSON") {
  auto cfg = parse_config(R"({
    "experiment": "bound_study",
    "dim": 4,
    "n_chains": 8,
    "n_steps": 200,
    "seed": 42,
    "lambda_grid": [-0.01, 0.01],
    "samplers": ["gauss-imh"],
    "record_wall_ms": true
  })");
  auto back = parse_config(config_to_json(cfg));
  CHECK(back.experiment == cfg.experiment);
  CHECK(back.dim == cfg.dim);
  CHECK(back.n_chains == cfg.n_chains);
  CHECK(back.n_steps == cfg.n_steps);
  CHECK(back.seed == cfg.seed);
  CHECK(back.lambda_grid == cfg.lambda_grid);
  CHECK(back.samplers == cfg.samplers);
  CHECK(back.record_wall_ms == cfg.record_wall_ms);
}

TEST_CASE("CSV serialization: header, full-precision round trip, empty case") {
  std::vector<ResultRow> rows;
  ResultRow r;
  r.experiment = "three_flows";
  r.sampler = "flow-imh";
  r.param = "t=0.5";
  r.metric = "sliced_tv";
  r.value = 1.0 / 3.0;
  r.seed = 7;
  r.wall_ms = 0.0;
  rows.push_back(r);
  r.metric = "acceptance";
  r.value = 1e-17;
  rows.push_back(r);

  const std::string csv = rows_to_csv(rows);
  CHECK(csv.rfind("experiment,sampler,param,metric,value,seed,wall_ms\n", 0) == 0);
  auto parsed = parse_csv(csv);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].value == rows[0].value);  // 17 significant digits survive
  CHECK(parsed[1].value == rows[1].value);
  CHECK(parsed[0].sampler == "flow-imh");
  CHECK(parsed[0].seed == 7);

  CHECK(rows_to_csv({}) == "experiment,sampler,param,metric,value,seed,wall_ms\n");
  CHECK(parse_csv(rows_to_csv({})).empty());
  CHECK_THROWS(parse_csv("not,a,valid,header\n"));
}

TEST_CASE("canonical row ordering is (sampler, param, metric, seed)") {
  std::vector<ResultRow> rows(3);
  rows[0].sampler = "b";
  rows[1].sampler = "a";
  rows[2].sampler = "a";
  rows[0].metric = "x";
  rows[1].metric = "y";
  rows[2].metric = "x";
  sort_rows(rows);
  CHECK(rows[0].sampler == "a");
  CHECK(rows[0].metric == "x");
  CHECK(rows[1].metric == "y");
  CHECK(rows[2].sampler == "b");
}

TEST_CASE("bound_study emits the four bound metrics per lambda") {
  auto cfg = parse_config(R"({
    "experiment": "bound_study",
    "n_steps": 200,
    "lambda_grid": [-0.005, 0.005]
  })");
  auto rows = run_experiment(cfg);
  CHECK(rows.size() == 8);
  std::set<std::string> metrics;
  for (const auto& r : rows) {
    CHECK(r.experiment == "bound_study");
    CHECK(r.sampler == "gauss-imh");
    CHECK(r.wall_ms == 0.0);  // record_wall_ms defaults off
    metrics.insert(r.metric);
  }
  CHECK(metrics ==
        std::set<std::string>{"c_r", "condition_ok", "mixing_bound", "empirical_steps"});
}

TEST_CASE("small three_flows run: sensible rows and byte-identical reruns") {
  auto cfg = parse_config(R"({
    "experiment": "three_flows",
    "dim": 4,
    "n_chains": 4,
    "n_steps": 200,
    "t_grid": [0.5],
    "samplers": ["neural-is", "flow-imh"],
    "seed": 3,
    "reference_factor": 2
  })");
  auto rows = run_experiment(cfg);
  REQUIRE(!rows.empty());
  bool saw_perfect_imh = false;
  for (const auto& r : rows) {
    if (r.sampler == "flow-imh" && r.metric == "acceptance") {
      CHECK(r.value == 1.0);  // exact transport at t = 0.5
      saw_perfect_imh = true;
    }
    if (r.metric == "sliced_tv") CHECK(r.value < 0.2);
  }
  CHECK(saw_perfect_imh);

  auto rerun = run_experiment(cfg);
  CHECK(rows_to_csv(rows) == rows_to_csv(rerun));
}

TEST_CASE("emit_csv and emit_json write parseable artifacts") {
  auto cfg = parse_config(R"({
    "experiment": "bound_study",
    "n_steps": 100,
    "lambda_grid": [0.001]
  })");
  auto rows = run_experiment(cfg);
  const std::string csv_path = "/tmp/flowmc_test_rows.csv";
  const std::string json_path = "/tmp/flowmc_test_rows.json";
  emit_csv(rows, csv_path);
  emit_json(rows, cfg, json_path);

  std::ifstream csv_in(csv_path);
  std::string csv((std::istreambuf_iterator<char>(csv_in)), std::istreambuf_iterator<char>());
  CHECK(parse_csv(csv).size() == rows.size());
  CHECK(csv == rows_to_csv(rows));

  std::ifstream json_in(json_path);
  std::string json((std::istreambuf_iterator<char>(json_in)), std::istreambuf_iterator<char>());
  CHECK(json.find("\"rows\"") != std::string::npos);
  CHECK(json.find("\"config\"") != std::string::npos);
  CHECK(json.find("bound_study") != std::string::npos);
  std::remove(csv_path.c_str());
  std::remove(json_path.c_str());
}

TEST_CASE("known experiment list covers the dispatcher") {
  const auto& names = known_experiments();
  CHECK(names.size() == 7);
  for (const auto& n : names) {
    auto cfg = parse_config(R"({"experiment": ")" + n + R"("})");
    CHECK(cfg.experiment == n);
  }
}
