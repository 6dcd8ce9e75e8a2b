// qbnn command-line tool: dataset generation, single training runs,
// experiment matrices, oracle verification, and QUBO export.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error (or a failed
// verification in `oracle verify`).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qbnn/experiment.hpp"
#include "qbnn/oracle.hpp"
#include "qbnn/trainer.hpp"

namespace {

using nlohmann::json;
using namespace qbnn;

struct AnnealerFlags {
  int replicas = 1000;
  int steps = 1000;
  double tmax = 5.0;
  double tmin = 1.0 / 8.6;
  bool tune = false;
  int tune_budget = 30;
  int pilot_replicas = 200;
  int threads = 0;
  bool single_precision = false;
  std::string sweep_order = "randomized";

  void attach(CLI::App* cmd) {
    cmd->add_option("--replicas", replicas, "independent annealing replicas")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--steps", steps, "Monte Carlo sweeps per replica")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--tmax", tmax, "start temperature")->check(CLI::PositiveNumber);
    cmd->add_option("--tmin", tmin, "final temperature")->check(CLI::PositiveNumber);
    cmd->add_flag("--tune", tune, "tune temperatures with Nelder-Mead before the run");
    cmd->add_option("--tune-budget", tune_budget, "objective evaluations for tuning");
    cmd->add_option("--pilot-replicas", pilot_replicas, "replicas per tuning pilot run");
    cmd->add_option("--threads", threads, "worker threads (0 = QBNN_THREADS or hardware)");
    cmd->add_flag("--single-precision", single_precision, "anneal with 32-bit fields");
    cmd->add_option("--sweep-order", sweep_order, "randomized|sequential")
        ->check(CLI::IsMember({"randomized", "sequential"}));
  }

  SolveOptions solve_options(std::uint64_t seed) const {
    SolveOptions opts;
    opts.config.n_replicas = replicas;
    opts.config.schedule = {tmax, tmin, steps};
    opts.config.seed = seed;
    opts.config.sweep_order =
        sweep_order == "sequential" ? SweepOrder::sequential : SweepOrder::randomized;
    opts.config.precision = single_precision ? Precision::f32 : Precision::f64;
    opts.tune = tune;
    opts.tune_budget = tune_budget;
    opts.pilot_replicas = pilot_replicas;
    opts.threads = threads;
    return opts;
  }

  json to_json() const {
    return {{"replicas", replicas},       {"steps", steps},
            {"tmax", tmax},               {"tmin", tmin},
            {"tune", tune},               {"tune_budget", tune_budget},
            {"pilot_replicas", pilot_replicas}, {"threads", threads},
            {"single_precision", single_precision}, {"sweep_order", sweep_order}};
  }
};

Dataset resolve_dataset(const std::string& path, std::uint64_t seed) {
  return path.empty() ? generate_canonical(seed) : load(path);
}

json report_json(const RunResult& r) {
  return {{"train_accuracy", r.report.train_accuracy},
          {"test_accuracy", r.report.test_accuracy},
          {"s1", r.report.s1},
          {"s2", r.report.s2},
          {"unsat_fraction", r.report.unsat_fraction},
          {"unsat_activation", r.audit.unsat_activation},
          {"unsat_product", r.audit.unsat_product},
          {"total_constraints", r.total_constraints},
          {"energy", r.energy},
          {"feasible", r.feasible},
          {"seed", r.seed},
          {"schedule_used",
           {{"tmax", r.schedule_used.t_max},
            {"tmin", r.schedule_used.t_min},
            {"steps", r.schedule_used.n_steps}}}};
}

int run_cli(int argc, char** argv) {
  CLI::App app{"QUBO training and regularisation for binary neural networks"};
  app.require_subcommand(1);

  // dataset gen
  auto* dataset_cmd = app.add_subcommand("dataset", "dataset operations");
  dataset_cmd->require_subcommand(1);
  auto* gen = dataset_cmd->add_subcommand("gen", "generate the canonical dataset");
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "perturbation seed");
  gen->add_option("--out", gen_out, "output path")->required();

  // train
  auto* train = app.add_subcommand("train", "one training run, report as JSON");
  std::string train_arch;
  double train_gamma = 0.0;
  std::uint64_t train_seed = 0, train_ds_seed = 0;
  std::string train_ds_path;
  AnnealerFlags train_anneal;
  struct {
    std::optional<double> eta;
    int n_drop = 1;
    int input_drop = 5;
    double beta = 0.1;
    int iterations = 10;
    std::optional<std::uint64_t> seed;
  } drop;
  train->add_option("--arch", train_arch, "architecture string")->required();
  train->add_option("--gamma", train_gamma, "margin reward scale");
  train->add_option("--seed", train_seed, "annealer master seed");
  train->add_option("--dataset", train_ds_path, "dataset file (overrides --dataset-seed)");
  train->add_option("--dataset-seed", train_ds_seed, "canonical dataset seed");
  train_anneal.attach(train);
  train->add_option("--dropout-eta", drop.eta, "enable dropout training with this learning rate");
  train->add_option("--dropout-n", drop.n_drop, "hidden nodes dropped per iteration");
  train->add_option("--dropout-inputs", drop.input_drop, "input nodes dropped per iteration");
  train->add_option("--dropout-beta", drop.beta, "violation damping factor");
  train->add_option("--dropout-iters", drop.iterations, "dropout iterations");
  train->add_option("--dropout-seed", drop.seed, "node subset seed (defaults to --seed)");

  // matrix
  auto* matrix = app.add_subcommand("matrix", "run an experiment matrix from a JSON spec");
  std::string matrix_spec, matrix_out = ".";
  int matrix_threads = -1;
  int matrix_runs = -1;
  matrix->add_option("--spec", matrix_spec, "experiment spec file")->required();
  matrix->add_option("--out-dir", matrix_out, "output directory for CSVs");
  matrix->add_option("--threads", matrix_threads, "worker threads (overrides the spec)");
  matrix->add_option("--runs", matrix_runs, "runs per cell (overrides the spec)");

  // oracle verify
  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force reference checks");
  oracle_cmd->require_subcommand(1);
  auto* verify = oracle_cmd->add_subcommand(
      "verify", "equivalence of parameter fits and zero-energy QUBO states");
  int v_inputs = 2, v_hidden = 2, v_outputs = 1, v_batch = 3, v_instances = 5;
  std::uint64_t v_seed = 0;
  verify->add_option("--inputs", v_inputs)->check(CLI::PositiveNumber);
  verify->add_option("--hidden", v_hidden)->check(CLI::PositiveNumber);
  verify->add_option("--outputs", v_outputs)->check(CLI::PositiveNumber);
  verify->add_option("--batch", v_batch, "data points per instance")->check(CLI::PositiveNumber);
  verify->add_option("--instances", v_instances, "random instances to verify")
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", v_seed);

  // export-qubo
  auto* export_cmd = app.add_subcommand("export-qubo", "write a training QUBO as sparse text");
  std::string ex_arch, ex_out, ex_topology, ex_ds_path;
  double ex_gamma = 0.0;
  std::uint64_t ex_ds_seed = 0;
  export_cmd->add_option("--arch", ex_arch, "architecture string")->required();
  export_cmd->add_option("--gamma", ex_gamma, "margin reward scale");
  export_cmd->add_option("--dataset", ex_ds_path, "dataset file");
  export_cmd->add_option("--dataset-seed", ex_ds_seed, "canonical dataset seed");
  export_cmd->add_option("--out", ex_out, "model output path")->required();
  export_cmd->add_option("--topology", ex_topology, "also dump the topology as JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (gen->parsed()) {
    const Dataset ds = generate_canonical(gen_seed);
    save(ds, gen_out);
    std::cout << json{{"out", gen_out}, {"seed", gen_seed}, {"train", ds.train.size()},
                      {"test", ds.test.size()}}
              << '\n';
    return 0;
  }

  if (train->parsed()) {
    const Dataset ds = resolve_dataset(train_ds_path, train_ds_seed);
    const Topology t = parse_architecture(train_arch);
    const SolveOptions opts = train_anneal.solve_options(train_seed);
    json config{{"arch", train_arch},
                {"gamma", train_gamma},
                {"seed", train_seed},
                {"dataset", train_ds_path.empty() ? json(train_ds_seed) : json(train_ds_path)},
                {"annealer", train_anneal.to_json()}};
    RunResult result;
    if (drop.eta) {
      DropoutParams dp;
      dp.eta = *drop.eta;
      dp.beta = drop.beta;
      dp.iterations = drop.iterations;
      dp.input_drop_count = drop.input_drop;
      dp.n_drop = drop.n_drop;
      dp.seed = drop.seed.value_or(train_seed);
      config["dropout"] = {{"eta", dp.eta},
                           {"beta", dp.beta},
                           {"iterations", dp.iterations},
                           {"input_drop_count", dp.input_drop_count},
                           {"n_drop", dp.n_drop},
                           {"seed", dp.seed}};
      result = train_dropout(t, ds, dp, opts);
    } else {
      result = train_once(t, ds, train_gamma, opts);
    }
    std::cout << json{{"config", config}, {"report", report_json(result)}}.dump(2) << '\n';
    return 0;
  }

  if (matrix->parsed()) {
    std::ifstream spec_file(matrix_spec);
    if (!spec_file) throw std::runtime_error("cannot open spec: " + matrix_spec);
    ExperimentSpec spec = ExperimentSpec::from_json(json::parse(spec_file));
    if (matrix_threads >= 0) spec.solve.threads = matrix_threads;  // flags beat the spec file
    if (matrix_runs > 0) spec.runs = matrix_runs;
    std::filesystem::create_directories(matrix_out);
    const auto runs_path = std::filesystem::path(matrix_out) / "runs.csv";
    const auto summary_path = std::filesystem::path(matrix_out) / "summary.csv";
    const auto config_path = std::filesystem::path(matrix_out) / "config.json";
    std::ofstream runs_csv(runs_path), summary_csv(summary_path), config_out(config_path);
    if (!runs_csv || !summary_csv || !config_out)
      throw std::runtime_error("cannot write into: " + matrix_out);
    config_out << spec.to_json().dump(2) << '\n';
    run_experiment_matrix(spec, runs_csv, summary_csv, &std::cerr);
    std::cout << json{{"runs_csv", runs_path.string()},
                      {"summary_csv", summary_path.string()},
                      {"config", config_path.string()}}
              << '\n';
    return 0;
  }

  if (verify->parsed()) {
    Xoshiro256 rng(derive_seed(v_seed, 0x0badc0de));
    const Topology t = fully_connected(v_inputs, v_hidden, v_outputs);
    json instances = json::array();
    bool all_equivalent = true;
    for (int i = 0; i < v_instances; ++i) {
      std::vector<TrainSample> batch;
      for (int k = 0; k < v_batch; ++k) {
        TrainSample s;
        for (int p = 0; p < v_inputs; ++p) s.inputs.push_back(rng.coin() ? 1 : -1);
        for (int o = 0; o < v_outputs; ++o) s.outputs.push_back(rng.coin() ? 1 : -1);
        batch.push_back(s);
      }
      const EquivalenceReport rep = verify_equivalence_report(t, batch);
      all_equivalent = all_equivalent && rep.equivalent;
      instances.push_back({{"equivalent", rep.equivalent},
                           {"exists_fit", rep.exists_fit},
                           {"zero_energy_found", rep.zero_energy_found},
                           {"exhaustive_reverse", rep.exhaustive_reverse},
                           {"fits_checked", rep.fits_checked},
                           {"zero_states_checked", rep.zero_states_checked}});
    }
    std::cout << json{{"instances", instances}, {"all_equivalent", all_equivalent}}.dump(2)
              << '\n';
    return all_equivalent ? 0 : 2;
  }

  if (export_cmd->parsed()) {
    const Dataset ds = resolve_dataset(ex_ds_path, ex_ds_seed);
    const Topology t = parse_architecture(ex_arch);
    BuildParams params;
    params.gamma = ex_gamma;
    auto [model, vm] = build(t, training_batch(ds), params);
    std::ofstream out(ex_out);
    if (!out) throw std::runtime_error("cannot open for writing: " + ex_out);
    write_sparse(model, out,
                 {"arch " + ex_arch,
                  "binary " + std::to_string(vm.binary_variable_count()) + " chi_groups " +
                      std::to_string(vm.chi_group_count()) + " slack_bits " +
                      std::to_string(vm.slack_bit_count()),
                  "constraints " + std::to_string(vm.constraint_count())});
    if (!ex_topology.empty()) {
      std::ofstream topo(ex_topology);
      if (!topo) throw std::runtime_error("cannot open for writing: " + ex_topology);
      topo << topology_to_json(t).dump(2) << '\n';
    }
    std::cout << json{{"out", ex_out},
                      {"arch", ex_arch},
                      {"variables_total", vm.size()},
                      {"binary_variables", vm.binary_variable_count()},
                      {"chi_groups", vm.chi_group_count()},
                      {"slack_bits", vm.slack_bit_count()},
                      {"activation_constraints", vm.activation_constraint_count()},
                      {"product_constraints", vm.product_constraint_count()}}
                     .dump(2)
              << '\n';
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
