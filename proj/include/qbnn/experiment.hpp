#pragma once

// Experiment-matrix harness: a JSON spec names architectures, a gamma list
// and/or a dropout grid, and per-cell run counts; the harness executes every
// cell with derived seeds and writes one CSV row per run plus one summary
// row per cell. Identical spec + seed give byte-identical CSVs.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qbnn/trainer.hpp"

namespace qbnn {

struct ExperimentSpec {
  std::vector<std::string> architectures;
  std::vector<double> gammas;  // one cell per (architecture, gamma)

  struct DropoutGrid {
    std::vector<double> etas;
    std::vector<int> n_drops;
    int input_drop_count = 5;
    double beta = 0.1;
    int iterations = 10;
  };
  std::optional<DropoutGrid> dropout;  // extra cells per (arch, eta, n_drop)

  int runs = 1;
  std::uint64_t seed = 0;
  std::uint64_t dataset_seed = 0;
  std::string dataset_path;  // when set, overrides dataset_seed

  SolveOptions solve{};

  static ExperimentSpec from_json(const nlohmann::json& j) {
    ExperimentSpec spec;
    spec.architectures = j.at("architectures").get<std::vector<std::string>>();
    if (j.contains("gammas")) spec.gammas = j.at("gammas").get<std::vector<double>>();
    if (j.contains("dropout")) {
      const auto& d = j.at("dropout");
      DropoutGrid grid;
      grid.etas = d.at("etas").get<std::vector<double>>();
      grid.n_drops = d.at("n_drops").get<std::vector<int>>();
      grid.input_drop_count = d.value("input_drop_count", 5);
      grid.beta = d.value("beta", 0.1);
      grid.iterations = d.value("iterations", 10);
      spec.dropout = grid;
    }
    if (spec.gammas.empty() && !spec.dropout) spec.gammas.push_back(0.0);
    spec.runs = j.value("runs", 1);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.dataset_seed = j.value("dataset_seed", std::uint64_t{0});
    spec.dataset_path = j.value("dataset_path", std::string{});
    if (j.contains("annealer")) {
      const auto& a = j.at("annealer");
      spec.solve.config.n_replicas = a.value("replicas", spec.solve.config.n_replicas);
      spec.solve.config.schedule.n_steps = a.value("steps", spec.solve.config.schedule.n_steps);
      spec.solve.config.schedule.t_max = a.value("tmax", spec.solve.config.schedule.t_max);
      spec.solve.config.schedule.t_min = a.value("tmin", spec.solve.config.schedule.t_min);
      spec.solve.tune = a.value("tune", false);
      spec.solve.tune_budget = a.value("tune_budget", spec.solve.tune_budget);
      spec.solve.pilot_replicas = a.value("pilot_replicas", spec.solve.pilot_replicas);
      if (a.value("single_precision", false)) spec.solve.config.precision = Precision::f32;
    }
    if (spec.runs < 1) throw std::invalid_argument("runs must be >= 1");
    return spec;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"architectures", architectures},
                     {"gammas", gammas},
                     {"runs", runs},
                     {"seed", seed},
                     {"dataset_seed", dataset_seed},
                     {"annealer",
                      {{"replicas", solve.config.n_replicas},
                       {"steps", solve.config.schedule.n_steps},
                       {"tmax", solve.config.schedule.t_max},
                       {"tmin", solve.config.schedule.t_min},
                       {"tune", solve.tune},
                       {"tune_budget", solve.tune_budget},
                       {"pilot_replicas", solve.pilot_replicas},
                       {"single_precision", solve.config.precision == Precision::f32}}}};
    if (!dataset_path.empty()) j["dataset_path"] = dataset_path;
    if (dropout) {
      j["dropout"] = {{"etas", dropout->etas},
                      {"n_drops", dropout->n_drops},
                      {"input_drop_count", dropout->input_drop_count},
                      {"beta", dropout->beta},
                      {"iterations", dropout->iterations}};
    }
    return j;
  }
};

namespace detail {

struct Cell {
  std::string arch;
  double gamma = 0.0;
  std::optional<DropoutParams> dropout;  // seed filled per run
};

inline std::vector<Cell> enumerate_cells(const ExperimentSpec& spec) {
  std::vector<Cell> cells;
  for (const std::string& arch : spec.architectures) {
    for (double gamma : spec.gammas) cells.push_back({arch, gamma, {}});
    if (spec.dropout) {
      for (double eta : spec.dropout->etas)
        for (int n_drop : spec.dropout->n_drops) {
          DropoutParams dp;
          dp.eta = eta;
          dp.beta = spec.dropout->beta;
          dp.iterations = spec.dropout->iterations;
          dp.input_drop_count = spec.dropout->input_drop_count;
          dp.n_drop = n_drop;
          cells.push_back({arch, 0.0, dp});
        }
    }
  }
  return cells;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string number(double v) { return qbnn::detail::format_double(v); }

}  // namespace detail

inline const char* kRunsCsvHeader =
    "network,gamma,eta,n_drop,seed,train_acc,test_acc,s1,s2,unsat_frac,energy,feasible";
inline const char* kSummaryCsvHeader =
    "network,gamma,eta,n_drop,runs,test_min,test_max,test_mean,test_median,"
    "train_mean,unsat_mean_frac,s1_mean,s2_mean";

/// Executes every cell of the spec. Per cell, temperatures are tuned once
/// (when enabled) on that cell's full-network Hamiltonian and reused for all
/// of the cell's runs; run seeds derive from (spec seed, cell index, run).
inline void run_experiment_matrix(const ExperimentSpec& spec, std::ostream& runs_csv,
                                  std::ostream& summary_csv,
                                  std::ostream* progress = nullptr) {
  const Dataset ds = spec.dataset_path.empty() ? generate_canonical(spec.dataset_seed)
                                               : load(spec.dataset_path);
  const auto cells = detail::enumerate_cells(spec);
  runs_csv << kRunsCsvHeader << '\n';
  summary_csv << kSummaryCsvHeader << '\n';

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const detail::Cell& cell = cells[ci];
    const Topology t = parse_architecture(cell.arch);
    const std::uint64_t cell_seed = derive_seed(spec.seed, ci);

    SolveOptions opts = spec.solve;
    if (opts.tune) {
      // tune once per cell on the plain cell Hamiltonian, reuse across runs
      BuildParams params;
      params.gamma = cell.gamma;
      auto [model, vm] = build(t, training_batch(ds), params);
      AnnealConfig pilot = opts.config;
      pilot.n_replicas = std::max(1, opts.pilot_replicas);
      pilot.seed = cell_seed;
      opts.config.schedule = tune_temperatures(model, pilot, opts.tune_budget, opts.threads);
      opts.tune = false;
      if (progress)
        *progress << "cell " << ci + 1 << "/" << cells.size() << " " << cell.arch
                  << ": tuned t_max=" << opts.config.schedule.t_max
                  << " t_min=" << opts.config.schedule.t_min << '\n';
    }

    std::vector<RunResult> results;
    for (int run = 0; run < spec.runs; ++run) {
      const std::uint64_t run_seed = derive_seed(cell_seed, static_cast<std::uint64_t>(run) + 1);
      opts.config.seed = run_seed;
      RunResult rr;
      if (cell.dropout) {
        DropoutParams dp = *cell.dropout;
        dp.seed = derive_seed(run_seed, 0xd09dULL);
        rr = train_dropout(t, ds, dp, opts);
      } else {
        rr = train_once(t, ds, cell.gamma, opts);
      }
      results.push_back(rr);

      const std::string eta_field = cell.dropout ? detail::number(cell.dropout->eta) : "";
      const std::string drop_field = cell.dropout ? std::to_string(cell.dropout->n_drop) : "";
      runs_csv << cell.arch << ',' << detail::number(cell.gamma) << ',' << eta_field << ','
               << drop_field << ',' << run_seed << ',' << detail::fixed(rr.report.train_accuracy, 4)
               << ',' << detail::fixed(rr.report.test_accuracy, 4) << ',' << rr.report.s1 << ','
               << rr.report.s2 << ',' << detail::fixed(rr.report.unsat_fraction, 6) << ','
               << detail::number(rr.energy) << ',' << (rr.feasible ? 1 : 0) << '\n';
    }

    std::vector<double> test_accs;
    double test_sum = 0, train_sum = 0, unsat_sum = 0, s1_sum = 0, s2_sum = 0;
    for (const RunResult& rr : results) {
      test_accs.push_back(rr.report.test_accuracy);
      test_sum += rr.report.test_accuracy;
      train_sum += rr.report.train_accuracy;
      unsat_sum += rr.report.unsat_fraction;
      s1_sum += rr.report.s1;
      s2_sum += rr.report.s2;
    }
    std::sort(test_accs.begin(), test_accs.end());
    const std::size_t n = test_accs.size();
    const double median =
        n % 2 ? test_accs[n / 2] : (test_accs[n / 2 - 1] + test_accs[n / 2]) / 2.0;
    const std::string eta_field = cell.dropout ? detail::number(cell.dropout->eta) : "";
    const std::string drop_field = cell.dropout ? std::to_string(cell.dropout->n_drop) : "";
    summary_csv << cell.arch << ',' << detail::number(cell.gamma) << ',' << eta_field << ','
                << drop_field << ',' << n << ',' << detail::fixed(test_accs.front(), 4) << ','
                << detail::fixed(test_accs.back(), 4) << ',' << detail::fixed(test_sum / n, 4)
                << ',' << detail::fixed(median, 4) << ',' << detail::fixed(train_sum / n, 4) << ','
                << detail::fixed(unsat_sum / n, 6) << ',' << detail::fixed(s1_sum / n, 4) << ','
                << detail::fixed(s2_sum / n, 4) << '\n';
    if (progress)
      *progress << "cell " << ci + 1 << "/" << cells.size() << " " << cell.arch
                << ": mean test " << detail::fixed(test_sum / n, 4) << '\n';
  }
}

}  // namespace qbnn
