#pragma once

// Decoding of annealer states into bipolar networks, forward inference, and
// the accuracy / margin / constraint-audit report.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbnn/dataset.hpp"
#include "qbnn/qubo_builder.hpp"
#include "qbnn/topology.hpp"

namespace qbnn {

/// Forward inference is defined for acyclic (active) graphs only; cyclic
/// topologies are representable but refused at inference time.
class inference_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainedNetwork {
  Topology topology;
  std::vector<std::int8_t> weights;  // per weight group, -1/+1 (0 = inactive)
  std::vector<std::int8_t> biases;   // per node, -1/+1 for active non-inputs

  struct Provenance {
    std::uint64_t seed = 0;
    double gamma = 0.0;
    double eta = 0.0;
    std::string run_id;
  } provenance;
};

/// Reads weights and biases out of a QUBO state: w = 2v - 1, b = 2d - 1.
/// States are decoded regardless of whether their constraints are satisfied.
inline TrainedNetwork decode(const VariableMap& vm, std::span<const std::uint8_t> z) {
  if (static_cast<int>(z.size()) != vm.size())
    throw std::invalid_argument("decode: state size mismatch");
  const Topology& t = vm.topology();
  TrainedNetwork net{t, std::vector<std::int8_t>(t.group_count(), 0),
                     std::vector<std::int8_t>(t.node_slots(), 0),
                     {}};
  for (GroupId g = 0; g < t.group_count(); ++g)
    if (int v = vm.weight_index(g); v >= 0)
      net.weights[g] = static_cast<std::int8_t>(2 * z[v] - 1);
  for (NodeId j = 0; j < t.node_slots(); ++j)
    if (int d = vm.bias_index(j); d >= 0)
      net.biases[j] = static_cast<std::int8_t>(2 * z[d] - 1);
  return net;
}

namespace detail {

// Topological order of the active subgraph; throws on cycles.
inline std::vector<NodeId> topological_order(const Topology& t) {
  std::vector<int> degree(t.node_slots(), 0);
  for (NodeId j : t.active_nodes()) degree[j] = t.in_degree(j);
  std::vector<NodeId> order;
  std::vector<NodeId> frontier;
  for (NodeId j : t.active_nodes())
    if (degree[j] == 0) frontier.push_back(j);
  std::vector<std::vector<NodeId>> successors(t.node_slots());
  for (ConnId c = 0; c < t.connection_slots(); ++c)
    if (t.connection_active(c))
      successors[t.connection(c).src].push_back(t.connection(c).dst);
  while (!frontier.empty()) {
    NodeId j = frontier.back();
    frontier.pop_back();
    order.push_back(j);
    for (NodeId s : successors[j])
      if (--degree[s] == 0) frontier.push_back(s);
  }
  if (static_cast<int>(order.size()) != t.node_count())
    throw inference_error("forward inference requires an acyclic topology");
  return order;
}

}  // namespace detail

/// Bipolar activations of every active node for the given inputs, evaluated
/// in topological order with x_j = sign(b_j + sum w_ij x_i), sign(0) = -1.
/// Entries of inactive nodes are 0.
inline std::vector<std::int8_t> forward(const TrainedNetwork& net,
                                        std::span<const std::int8_t> inputs) {
  const Topology& t = net.topology;
  if (static_cast<int>(inputs.size()) != t.input_slot_count())
    throw std::invalid_argument("forward: input size does not match the input layer");
  std::vector<std::int8_t> x(t.node_slots(), 0);
  for (NodeId j : detail::topological_order(t)) {
    if (t.is_input(j)) {
      x[j] = inputs[t.input_ordinal(j)] > 0 ? 1 : -1;
      continue;
    }
    int pre = net.biases[j];
    for (ConnId c : t.active_incoming(j)) {
      const Connection& cn = t.connection(c);
      pre += net.weights[cn.group] * x[cn.src];
    }
    x[j] = pre > 0 ? 1 : -1;
  }
  return x;
}

/// Predicted label of a 2-output network.
inline Label predict(const TrainedNetwork& net, const Image& img) {
  const auto outputs = net.topology.output_nodes();
  if (outputs.size() != 2)
    throw std::invalid_argument("predict: expected exactly 2 output nodes");
  const auto x = forward(net, img.pixels);
  return outputs_to_label(x[outputs[0]], x[outputs[1]]);
}

struct Margins {
  long s1 = 0;  // sum over nodes of the minimum |pre-activation| over the batch
  long s2 = 0;  // sum over nodes and data points of |pre-activation|
};

/// Margin indicators computed by forward passes over the batch.
inline Margins margins(const TrainedNetwork& net, const std::vector<TrainSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("margins: batch must be non-empty");
  const Topology& t = net.topology;
  Margins m;
  std::vector<long> node_min(t.node_slots(), std::numeric_limits<long>::max());
  for (const TrainSample& sample : batch) {
    const auto x = forward(net, sample.inputs);
    for (NodeId j : t.active_nodes()) {
      if (t.is_input(j)) continue;
      long pre = net.biases[j];
      for (ConnId c : t.active_incoming(j)) {
        const Connection& cn = t.connection(c);
        pre += net.weights[cn.group] * x[cn.src];
      }
      const long mag = pre < 0 ? -pre : pre;
      m.s2 += mag;
      node_min[j] = std::min(node_min[j], mag);
    }
  }
  for (NodeId j : t.active_nodes())
    if (!t.is_input(j)) m.s1 += node_min[j];
  return m;
}

struct EvalReport {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  long s1 = 0;
  long s2 = 0;
  double unsat_fraction = 0.0;
};

/// Accuracy over the dataset plus margins over the training batch; the
/// constraint audit of the producing QUBO state is folded in as a fraction.
inline EvalReport evaluate(const TrainedNetwork& net, const Dataset& ds,
                           int unsat_constraints, int total_constraints) {
  EvalReport report;
  int train_hits = 0;
  for (const Image& img : ds.train) train_hits += predict(net, img) == img.label;
  int test_hits = 0;
  for (const Image& img : ds.test) test_hits += predict(net, img) == img.label;
  report.train_accuracy = ds.train.empty() ? 0.0 : static_cast<double>(train_hits) / ds.train.size();
  report.test_accuracy = ds.test.empty() ? 0.0 : static_cast<double>(test_hits) / ds.test.size();
  std::vector<TrainSample> batch;
  for (const Image& img : ds.train) batch.push_back(as_sample(img));
  const Margins m = margins(net, batch);
  report.s1 = m.s1;
  report.s2 = m.s2;
  report.unsat_fraction =
      total_constraints > 0 ? static_cast<double>(unsat_constraints) / total_constraints : 0.0;
  return report;
}

}  // namespace qbnn
