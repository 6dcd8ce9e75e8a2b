#pragma once

// Experiment orchestration: plain training, margin-regularised training, and
// the dropout-style iterative scheme that trains reduced subnetworks and
// accumulates linear parameter biases from their solutions.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbnn/annealer.hpp"
#include "qbnn/dataset.hpp"
#include "qbnn/evaluator.hpp"
#include "qbnn/oracle.hpp"
#include "qbnn/qubo_builder.hpp"
#include "qbnn/rng.hpp"
#include "qbnn/topology.hpp"

namespace qbnn {

struct SolveOptions {
  AnnealConfig config{};
  bool tune = false;        // Nelder-Mead temperature tuning before the run
  int tune_budget = 30;     // objective evaluations for the tuner
  int pilot_replicas = 200; // replica count of the tuner's pilot runs
  int threads = 0;          // 0 = QBNN_THREADS env var or hardware default
};

struct RunResult {
  EvalReport report;
  double energy = 0.0;
  bool feasible = false;
  AuditCounts audit;
  int total_constraints = 0;
  Schedule schedule_used;
  std::uint64_t seed = 0;
};

inline std::vector<TrainSample> training_batch(const Dataset& ds) {
  std::vector<TrainSample> batch;
  for (const Image& img : ds.train) batch.push_back(as_sample(img));
  return batch;
}

namespace detail {

inline Schedule resolve_schedule(const QuboModel& model, const SolveOptions& opts) {
  if (!opts.tune) return opts.config.schedule;
  AnnealConfig pilot = opts.config;
  pilot.n_replicas = std::max(1, opts.pilot_replicas);
  return tune_temperatures(model, pilot, opts.tune_budget, opts.threads);
}

inline RunResult solve_and_evaluate(const QuboModel& model, const VariableMap& vm,
                                    const Dataset& ds, const SolveOptions& opts,
                                    const Schedule& schedule, std::uint64_t seed,
                                    double gamma, double eta) {
  AnnealConfig cfg = opts.config;
  cfg.schedule = schedule;
  cfg.seed = seed;
  const AnnealOutcome outcome = anneal(model, cfg, opts.threads);

  TrainedNetwork net = decode(vm, outcome.best_state);
  net.provenance.seed = seed;
  net.provenance.gamma = gamma;
  net.provenance.eta = eta;

  RunResult run;
  run.audit = audit_constraints(vm, outcome.best_state);
  run.total_constraints = vm.constraint_count();
  run.report = evaluate(net, ds, run.audit.total(), run.total_constraints);
  run.energy = outcome.best_energy;
  run.feasible = run.audit.total() == 0;
  run.schedule_used = schedule;
  run.seed = seed;
  return run;
}

}  // namespace detail

/// One training run: build H1 + H2 - gamma*H_margin on the 4-image batch,
/// anneal, decode the best state, and evaluate on the whole dataset.
inline RunResult train_once(const Topology& t, const Dataset& ds, double gamma,
                            const SolveOptions& opts) {
  BuildParams params;
  params.gamma = gamma;
  auto [model, vm] = build(t, training_batch(ds), params);
  const Schedule schedule = detail::resolve_schedule(model, opts);
  return detail::solve_and_evaluate(model, vm, ds, opts, schedule, opts.config.seed,
                                    gamma, 0.0);
}

struct DropoutParams {
  double eta = 0.01;        // learning rate of the factor update
  double beta = 0.1;        // per-unsatisfied-constraint damping, in (0, 1]
  int iterations = 10;      // reduced-network training rounds before the final run
  int input_drop_count = 5; // input nodes removed per iteration
  int n_drop = 1;           // hidden nodes removed per iteration
  std::uint64_t seed = 0;   // stream for the node subsets

  void validate() const {
    if (eta < 0.0) throw std::invalid_argument("eta must be >= 0");
    if (!(beta > 0.0) || beta > 1.0) throw std::invalid_argument("beta must be in (0, 1]");
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (input_drop_count < 0 || n_drop < 0)
      throw std::invalid_argument("drop counts must be >= 0");
  }
};

/// Accumulated linear parameter biases, indexed like the full topology's
/// weight groups and nodes. Starts at zero.
struct FactorState {
  std::vector<double> weight;
  std::vector<double> bias;

  explicit FactorState(const Topology& t)
      : weight(t.group_count(), 0.0), bias(t.node_slots(), 0.0) {}

  /// Factor update c <- c + eta * beta^n_usc * parameter for every parameter
  /// that survives in `reduced`. With beta = 1 the damping disappears and the
  /// update is c <- c + eta * parameter regardless of n_usc.
  void update(const Topology& reduced, const TrainedNetwork& net, double eta,
              double beta, int n_usc) {
    const double scale = eta * std::pow(beta, n_usc);
    for (GroupId g = 0; g < reduced.group_count(); ++g)
      if (reduced.group_active(g)) weight[g] += scale * net.weights[g];
    for (NodeId j = 0; j < reduced.node_slots(); ++j)
      if (reduced.is_active(j) && !reduced.is_input(j)) bias[j] += scale * net.biases[j];
  }
};

/// Iterative dropout training. Every iteration removes a random node subset
/// (never outputs), trains the reduced network under the current factors at
/// the fixed intermediate temperatures, and updates the factors damped by
/// the number of unsatisfied constraints of that solution. The final phase
/// trains the full network with the accumulated factors; only this phase
/// uses temperature tuning when enabled.
inline RunResult train_dropout(const Topology& t, const Dataset& ds,
                               const DropoutParams& dp, const SolveOptions& opts) {
  dp.validate();
  const auto batch = training_batch(ds);
  const auto inputs = t.input_nodes();
  const auto hidden = t.hidden_nodes();
  if (dp.input_drop_count > static_cast<int>(inputs.size()))
    throw std::invalid_argument("input_drop_count exceeds the input layer");
  if (dp.n_drop > static_cast<int>(hidden.size()))
    throw std::invalid_argument("n_drop exceeds the hidden layer");

  FactorState factors(t);
  Xoshiro256 drop_rng(derive_seed(dp.seed, 0xd209ULL));
  auto sample_without_replacement = [&drop_rng](std::vector<NodeId> pool, int count) {
    for (int i = 0; i < count; ++i) {
      const auto j = i + drop_rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
  };

  for (int iter = 1; iter <= dp.iterations; ++iter) {
    std::vector<NodeId> drop = sample_without_replacement(inputs, dp.input_drop_count);
    for (NodeId j : sample_without_replacement(hidden, dp.n_drop)) drop.push_back(j);
    const Topology reduced = t.remove_nodes(drop);

    BuildParams params;
    params.weight_factors = factors.weight;
    params.bias_factors = factors.bias;
    auto [model, vm] = build(reduced, batch, params);

    AnnealConfig cfg = opts.config;
    // intermediate iterations always run at the fixed default temperatures;
    // tuning, when enabled, applies to the final full-network phase only
    cfg.schedule = Schedule{5.0, 1.0 / 8.6, opts.config.schedule.n_steps};
    cfg.seed = derive_seed(opts.config.seed, static_cast<std::uint64_t>(iter));
    const AnnealOutcome outcome = anneal(model, cfg, opts.threads);
    const TrainedNetwork net = decode(vm, outcome.best_state);
    const int n_usc = audit_constraints(vm, outcome.best_state).total();
    factors.update(reduced, net, dp.eta, dp.beta, n_usc);
  }

  BuildParams params;
  params.weight_factors = factors.weight;
  params.bias_factors = factors.bias;
  auto [model, vm] = build(t, batch, params);
  const Schedule schedule = detail::resolve_schedule(model, opts);
  return detail::solve_and_evaluate(model, vm, ds, opts, schedule, opts.config.seed,
                                    0.0, dp.eta);
}

}  // namespace qbnn
