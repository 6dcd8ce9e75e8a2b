#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "qbnn/experiment.hpp"
#include "qbnn/trainer.hpp"

using namespace qbnn;

namespace {

SolveOptions quick_options(std::uint64_t seed, int replicas = 60, int steps = 150) {
  SolveOptions opts;
  opts.config.n_replicas = replicas;
  opts.config.schedule.n_steps = steps;
  opts.config.seed = seed;
  return opts;
}

}  // namespace

TEST_CASE("factor update: beta = 1 removes the damping") {
  const Topology t = fully_connected(2, 2, 1);
  TrainedNetwork net{t, std::vector<std::int8_t>(t.group_count(), 1),
                     std::vector<std::int8_t>(t.node_slots(), 1), {}};
  FactorState a(t), b(t);
  // identical update sequences with wildly different violation counts
  for (int n_usc : {0, 3, 17, 1, 0}) {
    a.update(t, net, 0.2, 1.0, n_usc);
    b.update(t, net, 0.2, 1.0, 0);
  }
  REQUIRE(a.weight == b.weight);
  REQUIRE(a.bias == b.bias);
}

TEST_CASE("factor update: constant sign and zero violations accumulate exactly") {
  const Topology t = fully_connected(2, 1, 1);
  TrainedNetwork net{t, std::vector<std::int8_t>(t.group_count(), -1),
                     std::vector<std::int8_t>(t.node_slots(), -1), {}};
  FactorState f(t);
  const double eta = 0.0625;  // dyadic, so the additions stay exact
  const int m = 10;
  for (int i = 0; i < m; ++i) f.update(t, net, eta, 0.1, 0);
  for (GroupId g = 0; g < t.group_count(); ++g) REQUIRE(f.weight[g] == -eta * m);
  for (NodeId j : t.active_nodes())
    if (!t.is_input(j)) REQUIRE(f.bias[j] == -eta * m);
}

TEST_CASE("factor update: violations damp the step exponentially") {
  const Topology t = fully_connected(2, 1, 1);
  TrainedNetwork net{t, std::vector<std::int8_t>(t.group_count(), 1),
                     std::vector<std::int8_t>(t.node_slots(), 1), {}};
  FactorState f(t);
  f.update(t, net, 1.0, 0.5, 3);
  REQUIRE(f.weight[0] == 0.125);
}

TEST_CASE("factor update only touches surviving parameters") {
  const Topology t = fully_connected(3, 2, 1);
  const Topology r = t.remove_nodes({0, 3});
  TrainedNetwork net{r, std::vector<std::int8_t>(r.group_count(), 1),
                     std::vector<std::int8_t>(r.node_slots(), 1), {}};
  FactorState f(t);
  f.update(r, net, 1.0, 1.0, 0);
  for (GroupId g = 0; g < t.group_count(); ++g)
    REQUIRE(f.weight[g] == (r.group_active(g) ? 1.0 : 0.0));
  REQUIRE(f.bias[3] == 0.0);
  REQUIRE(f.bias[4] == 1.0);
}

TEST_CASE("train_once produces a coherent report") {
  const Dataset ds = generate_canonical(0);
  const Topology t = fully_connected(25, 3, 2);
  const RunResult r = train_once(t, ds, 0.0, quick_options(11));
  REQUIRE(r.total_constraints == 44);
  REQUIRE(r.report.train_accuracy >= 0.0);
  REQUIRE(r.report.train_accuracy <= 1.0);
  REQUIRE(r.report.s2 >= r.report.s1);
  REQUIRE((r.feasible == (r.report.unsat_fraction == 0.0)));
  if (r.feasible) {
    REQUIRE(r.energy == 0.0);
    REQUIRE(r.report.train_accuracy == 1.0);
  }
  // deterministic in the seed
  const RunResult again = train_once(t, ds, 0.0, quick_options(11));
  REQUIRE(again.energy == r.energy);
  REQUIRE(again.report.test_accuracy == r.report.test_accuracy);
  REQUIRE(again.report.s2 == r.report.s2);
}

TEST_CASE("dropout with eta = 0 reduces to plain training") {
  const Dataset ds = generate_canonical(0);
  const Topology t = fully_connected(25, 3, 2);
  DropoutParams dp;
  dp.eta = 0.0;
  dp.iterations = 2;
  dp.n_drop = 1;
  dp.seed = 9;
  const SolveOptions opts = quick_options(21, 40, 100);
  const RunResult dropped = train_dropout(t, ds, dp, opts);
  const RunResult plain = train_once(t, ds, 0.0, opts);
  REQUIRE(dropped.energy == plain.energy);
  REQUIRE(dropped.report.test_accuracy == plain.report.test_accuracy);
  REQUIRE(dropped.report.s1 == plain.report.s1);
  REQUIRE(dropped.report.s2 == plain.report.s2);
}

TEST_CASE("dropout validates its parameters") {
  const Dataset ds = generate_canonical(0);
  const Topology t = fully_connected(25, 3, 2);
  DropoutParams dp;
  dp.n_drop = 4;  // only 3 hidden nodes
  REQUIRE_THROWS_AS(train_dropout(t, ds, dp, quick_options(1)), std::invalid_argument);
  dp.n_drop = 0;
  dp.beta = 0.0;
  REQUIRE_THROWS_AS(train_dropout(t, ds, dp, quick_options(1)), std::invalid_argument);
  dp.beta = 0.1;
  dp.input_drop_count = 26;
  REQUIRE_THROWS_AS(train_dropout(t, ds, dp, quick_options(1)), std::invalid_argument);
}

TEST_CASE("experiment matrix writes deterministic per-run and summary CSVs") {
  const char* spec_json = R"({
    "architectures": ["fc1", "fc2"],
    "gammas": [0.0],
    "runs": 2,
    "seed": 5,
    "dataset_seed": 0,
    "annealer": {"replicas": 25, "steps": 60}
  })";
  const ExperimentSpec spec = ExperimentSpec::from_json(nlohmann::json::parse(spec_json));
  std::stringstream runs1, summary1, runs2, summary2;
  run_experiment_matrix(spec, runs1, summary1);
  run_experiment_matrix(spec, runs2, summary2);
  REQUIRE(runs1.str() == runs2.str());
  REQUIRE(summary1.str() == summary2.str());

  // shape: header + 4 run rows; header + 2 summary rows
  auto count_lines = [](const std::string& s) {
    int n = 0;
    for (char c : s) n += c == '\n';
    return n;
  };
  REQUIRE(count_lines(runs1.str()) == 5);
  REQUIRE(count_lines(summary1.str()) == 3);
  REQUIRE(runs1.str().rfind(kRunsCsvHeader, 0) == 0);
  REQUIRE(summary1.str().rfind(kSummaryCsvHeader, 0) == 0);
}

TEST_CASE("experiment matrix covers dropout grids") {
  const char* spec_json = R"({
    "architectures": ["fc2"],
    "gammas": [],
    "dropout": {"etas": [0.1], "n_drops": [0, 1], "input_drop_count": 3, "iterations": 2},
    "runs": 1,
    "seed": 3,
    "annealer": {"replicas": 20, "steps": 50}
  })";
  const ExperimentSpec spec = ExperimentSpec::from_json(nlohmann::json::parse(spec_json));
  std::stringstream runs, summary;
  run_experiment_matrix(spec, runs, summary);
  std::string line;
  std::getline(summary, line);  // header
  int rows = 0;
  while (std::getline(summary, line)) {
    ++rows;
    REQUIRE(line.find("fc2,0,0.1,") == 0);
  }
  REQUIRE(rows == 2);
}

TEST_CASE("summary statistics are exact functions of the run rows") {
  const char* spec_json = R"({
    "architectures": ["fc2"],
    "gammas": [0.0],
    "runs": 3,
    "seed": 12,
    "annealer": {"replicas": 25, "steps": 60}
  })";
  const ExperimentSpec spec = ExperimentSpec::from_json(nlohmann::json::parse(spec_json));
  std::stringstream runs, summary;
  run_experiment_matrix(spec, runs, summary);

  std::string line;
  std::getline(runs, line);
  std::vector<double> test_accs;
  while (std::getline(runs, line)) {
    // column 7 is test_acc
    std::stringstream ls(line);
    std::string field;
    for (int i = 0; i < 7; ++i) std::getline(ls, field, ',');
    test_accs.push_back(std::stod(field));
  }
  REQUIRE(test_accs.size() == 3);
  double mean = (test_accs[0] + test_accs[1] + test_accs[2]) / 3.0;

  std::getline(summary, line);
  std::getline(summary, line);
  std::stringstream ls(line);
  std::string field;
  for (int i = 0; i < 8; ++i) std::getline(ls, field, ',');  // test_mean column
  REQUIRE_THAT(std::stod(field), Catch::Matchers::WithinAbs(mean, 5e-5));
}
