#pragma once

// Compiles (topology, training batch, parameters) into a QUBO Hamiltonian.
//
// For every non-input node j and data point k the activation equality
//
//   d_j + sum_{i in preds(j)} (2 psi_ij - v_ij - y_i + 1)
//     = 2^n_j y_j + chi_j - floor(kappa_j / 2)
//
// is enforced by squaring its residual (the H1 part), and every product
// variable psi = v*y is enforced by the standard penalty
// v y - 2(v psi + y psi) + 3 psi (the H2 part, scaled by alpha). Activations
// of input nodes and of output nodes are clamped to constants and
// substituted, which also eliminates the psi variable of any connection
// whose source activation is a constant. Optional terms: a margin reward
// subtracting gamma * H_margin and a linear parameter bias subtracting
// H_ext = sum c_b (2d - 1) + sum c_w (2v - 1).

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qbnn/dataset.hpp"
#include "qbnn/qubo.hpp"
#include "qbnn/topology.hpp"

namespace qbnn {

struct BuildParams {
  double alpha = 1.0;  // scale of the product penalty; must be > 0
  double gamma = 0.0;  // scale of the margin reward; >= 0
  // Linear parameter biases, indexed by weight-group id and node id of the
  // (full) topology. Empty vectors mean all zeros. Entries of inactive
  // parameters are ignored.
  std::vector<double> weight_factors;
  std::vector<double> bias_factors;
};

/// Bijection between model symbols and dense QUBO variable indices, plus the
/// clamped-constant table for fixed activations (inputs and outputs).
class VariableMap {
 public:
  VariableMap(const Topology& t, const std::vector<TrainSample>& batch)
      : topology_(t), widths_(bit_widths(t)), k_(static_cast<int>(batch.size())) {
    if (batch.empty()) throw std::invalid_argument("batch must be non-empty");
    const int slots = t.node_slots();
    const auto outputs = t.output_nodes();
    for (const TrainSample& s : batch) {
      if (static_cast<int>(s.inputs.size()) != t.input_slot_count())
        throw std::invalid_argument("sample input size does not match the input layer");
      if (static_cast<int>(s.outputs.size()) != static_cast<int>(outputs.size()))
        throw std::invalid_argument("sample output size does not match the output layer");
      for (std::int8_t v : s.inputs)
        if (v != -1 && v != 1) throw std::invalid_argument("inputs must be bipolar");
      for (std::int8_t v : s.outputs)
        if (v != -1 && v != 1) throw std::invalid_argument("outputs must be bipolar");
    }

    int next = 0;
    weight_index_.assign(t.group_count(), -1);
    for (GroupId g = 0; g < t.group_count(); ++g)
      if (t.group_active(g)) weight_index_[g] = next++;
    n_weights_ = next;

    bias_index_.assign(slots, -1);
    for (NodeId j : t.active_nodes())
      if (!t.is_input(j)) bias_index_[j] = next++;
    n_biases_ = next - n_weights_;

    activation_index_.assign(static_cast<std::size_t>(slots) * k_, -1);
    clamped_.assign(static_cast<std::size_t>(slots) * k_, 0);
    slack_base_.assign(static_cast<std::size_t>(slots) * k_, -1);
    product_index_.assign(static_cast<std::size_t>(t.connection_slots()) * k_, -1);
    n_activations_ = n_slack_ = n_products_ = 0;
    chi_groups_ = 0;
    for (int k = 0; k < k_; ++k) {
      for (NodeId j : t.active_nodes()) {
        const std::size_t cell = static_cast<std::size_t>(k) * slots + j;
        if (t.is_input(j)) {
          clamped_[cell] = batch[k].inputs[t.input_ordinal(j)] > 0 ? 1 : 0;
        } else if (t.is_output(j)) {
          int ord = 0;
          for (NodeId o : outputs) {
            if (o == j) break;
            ++ord;
          }
          clamped_[cell] = batch[k].outputs[ord] > 0 ? 1 : 0;
        } else {
          activation_index_[cell] = next++;
          ++n_activations_;
        }
      }
      for (NodeId j : t.active_nodes()) {
        if (t.is_input(j)) continue;
        const std::size_t cell = static_cast<std::size_t>(k) * slots + j;
        const int bits = widths_.slack_bits[j];
        if (bits > 0) {
          slack_base_[cell] = next;
          next += bits;
          n_slack_ += bits;
          ++chi_groups_;
        }
      }
      for (ConnId c = 0; c < t.connection_slots(); ++c) {
        if (!t.connection_active(c)) continue;
        const Connection& cn = t.connection(c);
        const std::size_t src_cell = static_cast<std::size_t>(k) * slots + cn.src;
        if (activation_index_[src_cell] < 0) continue;  // constant source folds
        product_index_[static_cast<std::size_t>(k) * t.connection_slots() + c] = next++;
        ++n_products_;
      }
    }
    size_ = next;
  }

  const Topology& topology() const { return topology_; }
  const BitWidths& widths() const { return widths_; }
  int datapoint_count() const { return k_; }

  /// Total number of QUBO variables, slack bits included.
  int size() const { return size_; }

  int weight_index(GroupId g) const { return weight_index_.at(g); }
  int bias_index(NodeId j) const { return bias_index_.at(j); }

  bool activation_clamped(NodeId j, int k) const {
    return activation_index_[cell(j, k)] < 0;
  }
  int activation_index(NodeId j, int k) const { return activation_index_[cell(j, k)]; }
  /// Clamped activation value in {0,1}; only meaningful when clamped.
  int activation_constant(NodeId j, int k) const { return clamped_[cell(j, k)]; }

  int slack_index(NodeId j, int k, int bit) const {
    const int base = slack_base_[cell(j, k)];
    if (base < 0 || bit < 0 || bit >= widths_.slack_bits[j])
      throw std::out_of_range("slack_index: no such slack bit");
    return base + bit;
  }

  /// QUBO index of the product variable of connection c for data point k,
  /// or -1 when the source activation is a constant and the product folds.
  int product_index(ConnId c, int k) const {
    return product_index_[static_cast<std::size_t>(k) * topology_.connection_slots() + c];
  }

  // Model-size accounting. "Binary" counts weight, bias, activation, and
  // product variables; slack bits are tallied separately as chi groups.
  int weight_count() const { return n_weights_; }
  int bias_count() const { return n_biases_; }
  int activation_count() const { return n_activations_; }
  int product_count() const { return n_products_; }
  int binary_variable_count() const {
    return n_weights_ + n_biases_ + n_activations_ + n_products_;
  }
  int chi_group_count() const { return chi_groups_; }
  int slack_bit_count() const { return n_slack_; }
  int activation_constraint_count() const {
    int non_input = 0;
    for (NodeId j : topology_.active_nodes()) non_input += !topology_.is_input(j);
    return non_input * k_;
  }
  int product_constraint_count() const { return n_products_; }
  int constraint_count() const {
    return activation_constraint_count() + product_constraint_count();
  }

 private:
  std::size_t cell(NodeId j, int k) const {
    if (j < 0 || j >= topology_.node_slots() || k < 0 || k >= k_)
      throw std::out_of_range("VariableMap: node or datapoint out of range");
    return static_cast<std::size_t>(k) * topology_.node_slots() + j;
  }

  Topology topology_;
  BitWidths widths_;
  int k_;
  int size_ = 0;
  int n_weights_ = 0, n_biases_ = 0, n_activations_ = 0, n_products_ = 0;
  int n_slack_ = 0, chi_groups_ = 0;
  std::vector<int> weight_index_;
  std::vector<int> bias_index_;
  std::vector<int> activation_index_;
  std::vector<std::uint8_t> clamped_;
  std::vector<int> slack_base_;
  std::vector<int> product_index_;
};

/// Value of the standard product penalty x*y - 2(x*psi + y*psi) + 3*psi.
/// Zero exactly when psi == x*y, strictly positive otherwise.
inline int product_penalty(int x, int y, int psi) {
  return x * y - 2 * (x * psi + y * psi) + 3 * psi;
}

namespace detail {

// Sparse linear form c0 + sum coeff_i z_i with duplicate indices combined.
struct LinearForm {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  void add(int index, double coeff) {
    for (auto& [i, c] : terms) {
      if (i == index) {
        c += coeff;
        return;
      }
    }
    terms.emplace_back(index, coeff);
  }

  double value(std::span<const std::uint8_t> z) const {
    double v = constant;
    for (const auto& [i, c] : terms)
      if (z[i]) v += c;
    return v;
  }
};

// Residual of the activation equality at (node j, data point k), as a linear
// form over QUBO variables. Zero exactly when the constraint holds.
inline LinearForm activation_residual(const VariableMap& vm, NodeId j, int k) {
  const Topology& t = vm.topology();
  const BitWidths& w = vm.widths();
  LinearForm r;
  r.add(vm.bias_index(j), 1.0);
  for (ConnId c : t.active_incoming(j)) {
    const Connection& cn = t.connection(c);
    const int v = vm.weight_index(cn.group);
    if (vm.activation_clamped(cn.src, k)) {
      const int ys = vm.activation_constant(cn.src, k);
      // 2*v*ys - v - ys + 1 with ys constant
      r.add(v, 2.0 * ys - 1.0);
      r.constant += 1.0 - ys;
    } else {
      r.add(vm.product_index(c, k), 2.0);
      r.add(v, -1.0);
      r.add(vm.activation_index(cn.src, k), -1.0);
      r.constant += 1.0;
    }
  }
  const double top = static_cast<double>(1 << w.slack_bits[j]);
  if (vm.activation_clamped(j, k))
    r.constant -= top * vm.activation_constant(j, k);
  else
    r.add(vm.activation_index(j, k), -top);
  for (int l = 0; l < w.slack_bits[j]; ++l)
    r.add(vm.slack_index(j, k, l), -static_cast<double>(1 << l));
  r.constant += w.offset[j] / 2;
  return r;
}

inline void add_square(QuboAccumulator& acc, const LinearForm& f, double scale) {
  acc.add_constant(scale * f.constant * f.constant);
  for (std::size_t a = 0; a < f.terms.size(); ++a) {
    const auto& [ia, ca] = f.terms[a];
    acc.add_linear(ia, scale * (2.0 * f.constant * ca + ca * ca));
    for (std::size_t b = a + 1; b < f.terms.size(); ++b) {
      const auto& [ib, cb] = f.terms[b];
      acc.add_quadratic(ia, ib, scale * 2.0 * ca * cb);
    }
  }
}

// Margin summand at (j, k): (2y - 1) * (2^(n+1) y + 2 chi + C) with
// C = -2*floor(kappa/2) - |preds| - 1. Equals |pre-activation| whenever the
// activation equality at (j, k) holds.
inline void add_margin_summand(QuboAccumulator& acc, const VariableMap& vm,
                               NodeId j, int k, double scale) {
  const Topology& t = vm.topology();
  const BitWidths& w = vm.widths();
  const int n = w.slack_bits[j];
  const double c0 = -2.0 * (w.offset[j] / 2) - t.in_degree(j) - 1.0;
  if (vm.activation_clamped(j, k)) {
    const double a = 2.0 * vm.activation_constant(j, k) - 1.0;
    acc.add_constant(scale * a * ((1 << (n + 1)) * vm.activation_constant(j, k) + c0));
    for (int l = 0; l < n; ++l)
      acc.add_linear(vm.slack_index(j, k, l), scale * a * 2.0 * (1 << l));
  } else {
    const int y = vm.activation_index(j, k);
    acc.add_linear(y, scale * ((1 << (n + 2)) - (1 << (n + 1)) + 2.0 * c0));
    for (int l = 0; l < n; ++l) {
      const int s = vm.slack_index(j, k, l);
      acc.add_quadratic(y, s, scale * 4.0 * (1 << l));
      acc.add_linear(s, scale * -2.0 * (1 << l));
    }
    acc.add_constant(scale * -c0);
  }
}

inline void add_margin_terms(QuboAccumulator& acc, const VariableMap& vm, double gamma) {
  if (gamma == 0.0) return;
  const Topology& t = vm.topology();
  for (int k = 0; k < vm.datapoint_count(); ++k)
    for (NodeId j : t.active_nodes())
      if (!t.is_input(j)) add_margin_summand(acc, vm, j, k, -gamma);
}

inline void add_external_bias_terms(QuboAccumulator& acc, const VariableMap& vm,
                                    std::span<const double> weight_factors,
                                    std::span<const double> bias_factors) {
  const Topology& t = vm.topology();
  if (!weight_factors.empty()) {
    if (static_cast<int>(weight_factors.size()) != t.group_count())
      throw std::invalid_argument("weight factor vector length must equal the group count");
    for (GroupId g = 0; g < t.group_count(); ++g) {
      const int v = vm.weight_index(g);
      if (v < 0 || weight_factors[g] == 0.0) continue;
      // subtract c * (2v - 1)
      acc.add_linear(v, -2.0 * weight_factors[g]);
      acc.add_constant(weight_factors[g]);
    }
  }
  if (!bias_factors.empty()) {
    if (static_cast<int>(bias_factors.size()) != t.node_slots())
      throw std::invalid_argument("bias factor vector length must equal the node count");
    for (NodeId j = 0; j < t.node_slots(); ++j) {
      const int d = vm.bias_index(j);
      if (d < 0 || bias_factors[j] == 0.0) continue;
      acc.add_linear(d, -2.0 * bias_factors[j]);
      acc.add_constant(bias_factors[j]);
    }
  }
}

}  // namespace detail

struct BuildResult {
  QuboModel model;
  VariableMap vars;
};

/// Builds the training Hamiltonian H1 + alpha*H2 - gamma*H_margin - H_ext
/// over the given topology and batch.
inline BuildResult build(const Topology& t, const std::vector<TrainSample>& batch,
                         const BuildParams& params = {}) {
  if (params.alpha <= 0.0) throw std::invalid_argument("alpha must be > 0");
  if (params.gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
  VariableMap vm(t, batch);
  QuboAccumulator acc(vm.size());
  for (int k = 0; k < vm.datapoint_count(); ++k) {
    for (NodeId j : t.active_nodes()) {
      if (t.is_input(j)) continue;
      detail::add_square(acc, detail::activation_residual(vm, j, k), 1.0);
      for (ConnId c : t.active_incoming(j)) {
        const int psi = vm.product_index(c, k);
        if (psi < 0) continue;
        const int v = vm.weight_index(t.connection(c).group);
        const int y = vm.activation_index(t.connection(c).src, k);
        acc.add_quadratic(v, y, params.alpha);
        acc.add_quadratic(v, psi, -2.0 * params.alpha);
        acc.add_quadratic(y, psi, -2.0 * params.alpha);
        acc.add_linear(psi, 3.0 * params.alpha);
      }
    }
  }
  detail::add_margin_terms(acc, vm, params.gamma);
  detail::add_external_bias_terms(acc, vm, params.weight_factors, params.bias_factors);
  return {acc.finalize(), std::move(vm)};
}

/// Returns q with the margin reward gamma * H_margin subtracted.
inline QuboModel add_margin_term(const QuboModel& q, const VariableMap& vm, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
  if (gamma == 0.0) return q;
  QuboAccumulator acc(q);
  detail::add_margin_terms(acc, vm, gamma);
  return acc.finalize();
}

/// Returns q with H_ext subtracted: each factor c pulls its bipolar
/// parameter toward sign(c).
inline QuboModel add_external_bias(const QuboModel& q, const VariableMap& vm,
                                   std::span<const double> weight_factors,
                                   std::span<const double> bias_factors) {
  QuboAccumulator acc(q);
  detail::add_external_bias_terms(acc, vm, weight_factors, bias_factors);
  return acc.finalize();
}

struct AuditCounts {
  int unsat_activation = 0;
  int unsat_product = 0;

  int total() const { return unsat_activation + unsat_product; }
};

/// Counts violated activation equalities and violated product constraints in
/// a QUBO state. (0, 0) exactly when H1 = H2 = 0 at that state.
inline AuditCounts audit_constraints(const VariableMap& vm,
                                     std::span<const std::uint8_t> z) {
  if (static_cast<int>(z.size()) != vm.size())
    throw std::invalid_argument("audit_constraints: state size mismatch");
  const Topology& t = vm.topology();
  AuditCounts counts;
  for (int k = 0; k < vm.datapoint_count(); ++k) {
    for (NodeId j : t.active_nodes()) {
      if (t.is_input(j)) continue;
      if (detail::activation_residual(vm, j, k).value(z) != 0.0) ++counts.unsat_activation;
      for (ConnId c : t.active_incoming(j)) {
        const int psi = vm.product_index(c, k);
        if (psi < 0) continue;
        const int v = z[vm.weight_index(t.connection(c).group)];
        const int y = z[vm.activation_index(t.connection(c).src, k)];
        if (z[psi] != v * y) ++counts.unsat_product;
      }
    }
  }
  return counts;
}

/// Margin summand value at (j, k) evaluated on a QUBO state; equals the
/// absolute pre-activation of node j for data point k when the activation
/// equality at (j, k) is satisfied.
inline double margin_summand_value(const VariableMap& vm,
                                   std::span<const std::uint8_t> z, NodeId j, int k) {
  QuboAccumulator acc(vm.size());
  detail::add_margin_summand(acc, vm, j, k, 1.0);
  return acc.finalize().energy(z);
}

}  // namespace qbnn
