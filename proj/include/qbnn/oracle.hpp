#pragma once

// Independent brute-force reference for small instances: exhaustive
// enumeration of bipolar parameter assignments, constructive encoding of a
// fitting assignment into a zero-energy QUBO state, and the equivalence
// check between "some parameters fit the batch" and "the training QUBO has a
// zero-energy state".

#include <algorithm>
#include <bit>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbnn/annealer.hpp"
#include "qbnn/dataset.hpp"
#include "qbnn/evaluator.hpp"
#include "qbnn/qubo_builder.hpp"
#include "qbnn/topology.hpp"

namespace qbnn {

/// Instance too large for exhaustive enumeration.
class capacity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Enumeration bound: weight groups + biases. 2^22 forward passes stay in the
// seconds range at desk scale.
inline constexpr int kOracleMaxParameters = 22;

namespace detail {

struct ParameterSpace {
  std::vector<GroupId> groups;  // active weight groups
  std::vector<NodeId> biased;   // active non-input nodes

  int size() const { return static_cast<int>(groups.size() + biased.size()); }

  static ParameterSpace of(const Topology& t) {
    ParameterSpace ps;
    for (GroupId g = 0; g < t.group_count(); ++g)
      if (t.group_active(g)) ps.groups.push_back(g);
    for (NodeId j : t.active_nodes())
      if (!t.is_input(j)) ps.biased.push_back(j);
    return ps;
  }

  TrainedNetwork materialise(const Topology& t, std::uint64_t mask) const {
    TrainedNetwork net{t, std::vector<std::int8_t>(t.group_count(), 0),
                       std::vector<std::int8_t>(t.node_slots(), 0),
                       {}};
    std::size_t bit = 0;
    for (GroupId g : groups) net.weights[g] = (mask >> bit++) & 1 ? 1 : -1;
    for (NodeId j : biased) net.biases[j] = (mask >> bit++) & 1 ? 1 : -1;
    return net;
  }
};

inline bool fits(const TrainedNetwork& net, const std::vector<TrainSample>& batch,
                 int* correct_samples = nullptr) {
  const auto outputs = net.topology.output_nodes();
  int hits = 0;
  for (const TrainSample& s : batch) {
    const auto x = forward(net, s.inputs);
    bool ok = true;
    for (std::size_t o = 0; o < outputs.size(); ++o)
      ok = ok && x[outputs[o]] == s.outputs[o];
    hits += ok;
  }
  if (correct_samples) *correct_samples = hits;
  return hits == static_cast<int>(batch.size());
}

}  // namespace detail

struct FitResult {
  bool exists_fit = false;
  double best_train_accuracy = 0.0;
};

/// Exhaustively tries every bipolar (weights, biases) assignment and reports
/// whether any reproduces all labels, plus the best achievable fraction.
inline FitResult enumerate_fit(const Topology& t, const std::vector<TrainSample>& batch) {
  const auto ps = detail::ParameterSpace::of(t);
  if (ps.size() > kOracleMaxParameters)
    throw capacity_error("enumerate_fit: instance has " + std::to_string(ps.size()) +
                         " parameters, bound is " + std::to_string(kOracleMaxParameters));
  if (batch.empty()) return {true, 1.0};
  FitResult result;
  int best_hits = 0;
  const std::uint64_t limit = 1ULL << ps.size();
  for (std::uint64_t mask = 0; mask < limit; ++mask) {
    const TrainedNetwork net = ps.materialise(t, mask);
    int hits = 0;
    if (detail::fits(net, batch, &hits)) result.exists_fit = true;
    best_hits = std::max(best_hits, hits);
  }
  result.best_train_accuracy = static_cast<double>(best_hits) / batch.size();
  return result;
}

/// Encodes a parameter assignment into the full QUBO state it induces:
/// activations from forward passes, slack bits from the binary expansion of
/// the shifted pre-activation count, and every product variable set to the
/// product of its factors. For a fitting assignment the result has energy 0.
inline std::vector<std::uint8_t> encode_feasible_state(
    const VariableMap& vm, const std::vector<TrainSample>& batch,
    const TrainedNetwork& net) {
  const Topology& t = vm.topology();
  const BitWidths& w = vm.widths();
  std::vector<std::uint8_t> z(vm.size(), 0);
  for (GroupId g = 0; g < t.group_count(); ++g)
    if (int v = vm.weight_index(g); v >= 0) z[v] = net.weights[g] > 0;
  for (NodeId j = 0; j < t.node_slots(); ++j)
    if (int d = vm.bias_index(j); d >= 0) z[d] = net.biases[j] > 0;

  for (int k = 0; k < vm.datapoint_count(); ++k) {
    const auto x = forward(net, batch[k].inputs);
    for (NodeId j : t.active_nodes()) {
      if (t.is_input(j)) continue;
      if (!vm.activation_clamped(j, k)) z[vm.activation_index(j, k)] = x[j] > 0;
      // shifted binary count of positive pre-activation contributions
      int rho = (net.biases[j] + 1) / 2;
      for (ConnId c : t.active_incoming(j)) {
        const Connection& cn = t.connection(c);
        rho += (net.weights[cn.group] * x[cn.src] + 1) / 2;
      }
      const int expansion = rho + w.offset[j] / 2;
      for (int l = 0; l < w.slack_bits[j]; ++l)
        z[vm.slack_index(j, k, l)] = (expansion >> l) & 1;
      if (((expansion >> w.slack_bits[j]) & 1) != (x[j] > 0 ? 1 : 0))
        throw std::logic_error("encode_feasible_state: expansion bit disagrees with activation");
    }
    for (ConnId c = 0; c < t.connection_slots(); ++c) {
      const int psi = vm.product_index(c, k);
      if (psi < 0) continue;
      const Connection& cn = t.connection(c);
      z[psi] = z[vm.weight_index(cn.group)] & z[vm.activation_index(cn.src, k)];
    }
  }
  return z;
}

struct EquivalenceReport {
  bool equivalent = false;
  bool exists_fit = false;
  bool zero_energy_found = false;
  bool exhaustive_reverse = false;  // reverse direction checked by full enumeration
  long fits_checked = 0;            // fitting assignments encoded and verified at E = 0
  long zero_states_checked = 0;     // E = 0 states decoded and verified to fit
};

struct VerifyOptions {
  // Reverse direction: exhaustive over all QUBO states up to this many
  // variables, annealed search beyond it.
  int exhaustive_variable_limit = 23;
  int search_replicas = 400;
  int search_steps = 400;
  std::uint64_t search_seed = 17;
};

/// Checks both directions of the training-QUBO equivalence on one instance:
/// every fitting assignment must induce an exact E = 0 state, and every
/// E = 0 state found must decode to a perfect training fit.
inline EquivalenceReport verify_equivalence_report(const Topology& t,
                                                   const std::vector<TrainSample>& batch,
                                                   const VerifyOptions& opts = {}) {
  const auto ps = detail::ParameterSpace::of(t);
  if (ps.size() > kOracleMaxParameters)
    throw capacity_error("verify_equivalence: instance has " + std::to_string(ps.size()) +
                         " parameters, bound is " + std::to_string(kOracleMaxParameters));
  if (batch.empty()) throw std::invalid_argument("verify_equivalence: batch must be non-empty");

  auto [model, vm] = build(t, batch, {});
  EquivalenceReport report;
  bool all_ok = true;

  const std::uint64_t limit = 1ULL << ps.size();
  for (std::uint64_t mask = 0; mask < limit; ++mask) {
    const TrainedNetwork net = ps.materialise(t, mask);
    if (!detail::fits(net, batch)) continue;
    report.exists_fit = true;
    const auto z = encode_feasible_state(vm, batch, net);
    ++report.fits_checked;
    if (model.energy(z) != 0.0) all_ok = false;
  }

  auto check_zero_state = [&](std::span<const std::uint8_t> z) {
    report.zero_energy_found = true;
    ++report.zero_states_checked;
    const TrainedNetwork net = decode(vm, z);
    if (!detail::fits(net, batch)) all_ok = false;
    const AuditCounts audit = audit_constraints(vm, z);
    if (audit.total() != 0) all_ok = false;
  };

  if (vm.size() <= opts.exhaustive_variable_limit) {
    report.exhaustive_reverse = true;
    std::vector<std::uint8_t> z(vm.size(), 0);
    const std::uint64_t states = 1ULL << vm.size();
    for (std::uint64_t s = 0; s < states; ++s) {
      for (int b = 0; b < vm.size(); ++b) z[b] = (s >> b) & 1;
      if (model.energy(z) == 0.0) check_zero_state(z);
    }
  } else {
    // annealed search: every distinct zero-energy record state gets checked
    Schedule schedule;
    schedule.n_steps = opts.search_steps;
    const QuboAdjacency adj = QuboAdjacency::build(model);
    std::vector<double> temps(schedule.n_steps);
    for (int s = 0; s < schedule.n_steps; ++s) temps[s] = schedule.temperature(s);
    std::set<std::vector<std::uint8_t>> seen;
    for (int r = 0; r < opts.search_replicas; ++r) {
      auto run = detail::run_replica<double>(model, adj, temps,
                                             replica_seed(opts.search_seed, r),
                                             SweepOrder::randomized);
      if (run.best_energy == 0.0 && seen.insert(run.best_state).second)
        check_zero_state(run.best_state);
    }
  }

  report.equivalent = all_ok && (report.exists_fit == report.zero_energy_found);
  return report;
}

inline bool verify_equivalence(const Topology& t, const std::vector<TrainSample>& batch,
                               const VerifyOptions& opts = {}) {
  return verify_equivalence_report(t, batch, opts).equivalent;
}

/// Exhaustive statement check for one term count m >= 1: the top bit of the
/// (n+1)-bit expansion of (count of +1 entries) + floor(kappa/2) is 1 exactly
/// when the bipolar sum is >= 1, with n = floor(log2 m) and
/// kappa = 2^(n+1) - (m+1).
inline bool msb_activation_rule_holds(int m) {
  if (m < 1 || m > 30) throw std::invalid_argument("m out of range");
  const int n = std::bit_width(static_cast<unsigned>(m)) - 1;
  const int kappa = (1 << (n + 1)) - (m + 1);
  for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
    const int positives = std::popcount(mask);
    const int bipolar_sum = 2 * positives - m;
    const int expansion = positives + kappa / 2;
    if (expansion >= (1 << (n + 1))) return false;  // must fit in n+1 bits
    const bool top_bit = (expansion >> n) & 1;
    if (top_bit != (bipolar_sum >= 1)) return false;
  }
  return true;
}

}  // namespace qbnn
