#pragma once

// Network topology as a directed graph with input/output designations and
// weight-sharing groups. Node and group ids are assigned densely at
// construction and stay stable under node removal: removed nodes keep their
// id but become inactive, so parameters of a reduced network line up with the
// parameters of the network it was derived from.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace qbnn {

enum class NodeKind : std::uint8_t { input, hidden, output };

using NodeId = int;
using ConnId = int;
using GroupId = int;

struct Connection {
  NodeId src;
  NodeId dst;
  GroupId group;  // connections sharing a group share one weight parameter
};

/// Per-node slack expansion widths: a node with in-degree p uses
/// slack_bits = floor(log2(p+1)) low-order bits plus one activation bit,
/// shifted by offset = 2^(slack_bits+1) - p - 2 >= 0.
struct BitWidths {
  std::vector<int> slack_bits;
  std::vector<int> offset;
};

class Topology {
 public:
  Topology(std::vector<NodeKind> kinds, std::vector<Connection> connections)
      : kinds_(std::move(kinds)),
        active_(kinds_.size(), 1),
        connections_(std::move(connections)) {
    group_count_ = 0;
    bool any_output = false;
    for (NodeKind k : kinds_) any_output = any_output || k == NodeKind::output;
    if (!any_output) throw std::invalid_argument("topology needs at least one output node");
    for (const Connection& c : connections_) {
      if (c.src < 0 || c.src >= node_slots() || c.dst < 0 || c.dst >= node_slots())
        throw std::invalid_argument("connection endpoint out of range");
      if (c.src == c.dst) throw std::invalid_argument("self-loops are not allowed");
      if (kinds_[c.dst] == NodeKind::input)
        throw std::invalid_argument("input nodes cannot have incoming connections");
      if (c.group < 0) throw std::invalid_argument("negative weight group");
      group_count_ = std::max(group_count_, c.group + 1);
    }
    incoming_.assign(node_slots(), {});
    for (ConnId c = 0; c < static_cast<ConnId>(connections_.size()); ++c)
      incoming_[connections_[c].dst].push_back(c);
  }

  int node_slots() const { return static_cast<int>(kinds_.size()); }
  int connection_slots() const { return static_cast<int>(connections_.size()); }
  int group_count() const { return group_count_; }

  NodeKind kind(NodeId j) const { return kinds_.at(j); }
  bool is_active(NodeId j) const { return active_.at(j) != 0; }
  bool is_input(NodeId j) const { return kinds_.at(j) == NodeKind::input; }
  bool is_output(NodeId j) const { return kinds_.at(j) == NodeKind::output; }

  const Connection& connection(ConnId c) const { return connections_.at(c); }
  bool connection_active(ConnId c) const {
    const Connection& cn = connections_.at(c);
    return is_active(cn.src) && is_active(cn.dst);
  }

  /// Ids of active incoming connections of node j (the predecessor list).
  std::vector<ConnId> active_incoming(NodeId j) const {
    std::vector<ConnId> out;
    for (ConnId c : incoming_.at(j))
      if (connection_active(c)) out.push_back(c);
    return out;
  }

  int in_degree(NodeId j) const {
    int d = 0;
    for (ConnId c : incoming_.at(j)) d += connection_active(c);
    return d;
  }

  int node_count() const {
    int n = 0;
    for (std::uint8_t a : active_) n += a;
    return n;
  }

  int connection_count() const {
    int n = 0;
    for (ConnId c = 0; c < connection_slots(); ++c) n += connection_active(c);
    return n;
  }

  bool group_active(GroupId g) const {
    for (ConnId c = 0; c < connection_slots(); ++c)
      if (connections_[c].group == g && connection_active(c)) return true;
    return false;
  }

  std::vector<NodeId> active_nodes(std::optional<NodeKind> kind = {}) const {
    std::vector<NodeId> out;
    for (NodeId j = 0; j < node_slots(); ++j)
      if (is_active(j) && (!kind || kinds_[j] == *kind)) out.push_back(j);
    return out;
  }

  std::vector<NodeId> input_nodes() const { return active_nodes(NodeKind::input); }
  std::vector<NodeId> hidden_nodes() const { return active_nodes(NodeKind::hidden); }
  std::vector<NodeId> output_nodes() const { return active_nodes(NodeKind::output); }

  /// Number of input slots, counting removed ones. Sample input vectors are
  /// indexed by input ordinal over slots, so they keep their meaning after
  /// input nodes are dropped.
  int input_slot_count() const {
    int n = 0;
    for (NodeKind k : kinds_) n += k == NodeKind::input;
    return n;
  }

  /// Position of input node j among all input slots (active or not).
  int input_ordinal(NodeId j) const {
    if (!is_input(j)) throw std::invalid_argument("input_ordinal of a non-input node");
    int ord = 0;
    for (NodeId i = 0; i < j; ++i) ord += kinds_[i] == NodeKind::input;
    return ord;
  }

  /// Returns a copy with the given nodes deactivated. Output nodes are never
  /// removed. Connections with a removed endpoint become inactive; in-degrees
  /// and bit widths of the result reflect the reduced graph.
  Topology remove_nodes(const std::vector<NodeId>& drop) const {
    Topology t = *this;
    for (NodeId j : drop) {
      if (j < 0 || j >= node_slots()) throw std::invalid_argument("remove_nodes: id out of range");
      if (is_output(j)) throw std::invalid_argument("remove_nodes: output nodes cannot be removed");
      t.active_[j] = 0;
    }
    return t;
  }

 private:
  std::vector<NodeKind> kinds_;
  std::vector<std::uint8_t> active_;
  std::vector<Connection> connections_;
  std::vector<std::vector<ConnId>> incoming_;
  int group_count_ = 0;
};

inline BitWidths bit_widths(const Topology& t) {
  BitWidths w;
  w.slack_bits.assign(t.node_slots(), 0);
  w.offset.assign(t.node_slots(), 0);
  for (NodeId j = 0; j < t.node_slots(); ++j) {
    if (!t.is_active(j) || t.is_input(j)) continue;
    int p = t.in_degree(j);
    int n = std::bit_width(static_cast<unsigned>(p + 1)) - 1;
    w.slack_bits[j] = n;
    w.offset[j] = (1 << (n + 1)) - p - 2;
  }
  return w;
}

/// Complete bipartite input->hidden->output network; every connection gets
/// its own weight group.
inline Topology fully_connected(int input_count, int hidden_count, int output_count) {
  if (input_count < 1 || hidden_count < 1 || output_count < 1)
    throw std::invalid_argument("fully_connected: all layer sizes must be >= 1");
  std::vector<NodeKind> kinds;
  for (int i = 0; i < input_count; ++i) kinds.push_back(NodeKind::input);
  for (int i = 0; i < hidden_count; ++i) kinds.push_back(NodeKind::hidden);
  for (int i = 0; i < output_count; ++i) kinds.push_back(NodeKind::output);
  std::vector<Connection> conns;
  GroupId g = 0;
  for (int h = 0; h < hidden_count; ++h)
    for (int i = 0; i < input_count; ++i)
      conns.push_back({i, input_count + h, g++});
  for (int o = 0; o < output_count; ++o)
    for (int h = 0; h < hidden_count; ++h)
      conns.push_back({input_count + h, input_count + hidden_count + o, g++});
  return Topology(std::move(kinds), std::move(conns));
}

/// Convolutional network on a square input grid: `n_filters` filters of size
/// filter x filter, stride 1, no padding. Filter weights are shared across
/// positions; biases are per neuron. An optional fully-connected layer of
/// `fc_tail` neurons is inserted between the convolutional layer and the
/// 2-neuron output layer; without it the output layer connects to every
/// convolutional neuron directly.
inline Topology convolutional(int input_side, int filter, int n_filters,
                              std::optional<int> fc_tail = {}) {
  if (input_side < 1 || n_filters < 1) throw std::invalid_argument("convolutional: bad sizes");
  if (filter < 1 || filter > input_side)
    throw std::invalid_argument("convolutional: filter must satisfy 1 <= filter <= input_side");
  if (fc_tail && *fc_tail < 1) throw std::invalid_argument("convolutional: fc tail must be >= 1");
  const int positions = input_side - filter + 1;
  const int n_inputs = input_side * input_side;
  const int n_conv = n_filters * positions * positions;

  std::vector<NodeKind> kinds;
  for (int i = 0; i < n_inputs; ++i) kinds.push_back(NodeKind::input);
  for (int i = 0; i < n_conv; ++i) kinds.push_back(NodeKind::hidden);
  const int tail_base = n_inputs + n_conv;
  const int n_tail = fc_tail.value_or(0);
  for (int i = 0; i < n_tail; ++i) kinds.push_back(NodeKind::hidden);
  const int out_base = tail_base + n_tail;
  kinds.push_back(NodeKind::output);
  kinds.push_back(NodeKind::output);

  std::vector<Connection> conns;
  // one shared group per filter cell
  for (int f = 0; f < n_filters; ++f)
    for (int pr = 0; pr < positions; ++pr)
      for (int pc = 0; pc < positions; ++pc) {
        NodeId conv_node = n_inputs + (f * positions + pr) * positions + pc;
        for (int dr = 0; dr < filter; ++dr)
          for (int dc = 0; dc < filter; ++dc) {
            NodeId in_node = (pr + dr) * input_side + (pc + dc);
            GroupId g = (f * filter + dr) * filter + dc;
            conns.push_back({in_node, conv_node, g});
          }
      }
  GroupId g = n_filters * filter * filter;
  const int last_hidden_base = n_tail > 0 ? tail_base : n_inputs;
  const int last_hidden_count = n_tail > 0 ? n_tail : n_conv;
  for (int t = 0; t < n_tail; ++t)
    for (int c = 0; c < n_conv; ++c)
      conns.push_back({n_inputs + c, tail_base + t, g++});
  for (int o = 0; o < 2; ++o)
    for (int h = 0; h < last_hidden_count; ++h)
      conns.push_back({last_hidden_base + h, out_base + o, g++});
  return Topology(std::move(kinds), std::move(conns));
}

struct CatalogEntry {
  std::string name;
  Topology (*build)();
};

/// The 18 catalogued network architectures over the 5x5 image task, in the
/// standard numbering (0..7 convolutional, 8..17 fully connected).
inline const std::vector<CatalogEntry>& network_catalog() {
  static const std::vector<CatalogEntry> catalog = {
      {"conv2x2", [] { return convolutional(5, 2, 1); }},
      {"conv2x2+fc4", [] { return convolutional(5, 2, 1, 4); }},
      {"conv3x3", [] { return convolutional(5, 3, 1); }},
      {"conv3x3x2", [] { return convolutional(5, 3, 2); }},
      {"conv3x3+fc4", [] { return convolutional(5, 3, 1, 4); }},
      {"conv4x4", [] { return convolutional(5, 4, 1); }},
      {"conv4x4x2", [] { return convolutional(5, 4, 2); }},
      {"conv4x4x2+fc4", [] { return convolutional(5, 4, 2, 4); }},
      {"fc1", [] { return fully_connected(25, 1, 2); }},
      {"fc2", [] { return fully_connected(25, 2, 2); }},
      {"fc3", [] { return fully_connected(25, 3, 2); }},
      {"fc4", [] { return fully_connected(25, 4, 2); }},
      {"fc5", [] { return fully_connected(25, 5, 2); }},
      {"fc6", [] { return fully_connected(25, 6, 2); }},
      {"fc7", [] { return fully_connected(25, 7, 2); }},
      {"fc8", [] { return fully_connected(25, 8, 2); }},
      {"fc9", [] { return fully_connected(25, 9, 2); }},
      {"fc10", [] { return fully_connected(25, 10, 2); }},
  };
  return catalog;
}

namespace detail {
// strict non-negative integer parse of a whole string
inline bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoi(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size() && out >= 0;
}
}  // namespace detail

/// Parses an architecture string over a 5x5 input grid with 2 output
/// neurons: "fcH", "convAxA", "convAxAx2", optionally "+fcT" after a
/// convolutional layer, and "netI" for the I-th catalogued network.
inline Topology parse_architecture(const std::string& arch) {
  auto fail = [&arch]() -> Topology {
    throw std::invalid_argument("unrecognised architecture: '" + arch + "'");
  };
  if (arch.rfind("net", 0) == 0) {
    int idx = -1;
    if (!detail::parse_int(arch.substr(3), idx)) return fail();
    const auto& cat = network_catalog();
    if (idx >= static_cast<int>(cat.size())) return fail();
    return cat[idx].build();
  }
  if (arch.rfind("fc", 0) == 0) {
    int h = 0;
    if (!detail::parse_int(arch.substr(2), h)) return fail();
    return fully_connected(25, h, 2);
  }
  if (arch.rfind("conv", 0) == 0) {
    std::string body = arch.substr(4);
    std::optional<int> tail;
    if (auto plus = body.find('+'); plus != std::string::npos) {
      std::string tail_str = body.substr(plus + 1);
      int tail_size = 0;
      if (tail_str.rfind("fc", 0) != 0 || !detail::parse_int(tail_str.substr(2), tail_size))
        return fail();
      tail = tail_size;
      body = body.substr(0, plus);
    }
    int a = 0, b = 0, f = 1;
    char x1 = 0, x2 = 0;
    std::istringstream ss(body);
    if (!(ss >> a >> x1 >> b) || x1 != 'x') return fail();
    if (ss >> x2) {
      if (x2 != 'x' || !(ss >> f)) return fail();
    }
    if (!ss.eof() || a != b) return fail();
    return convolutional(5, a, f, tail);
  }
  return fail();
}

inline nlohmann::json topology_to_json(const Topology& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (NodeId j = 0; j < t.node_slots(); ++j) {
    const char* kind = t.is_input(j) ? "input" : (t.is_output(j) ? "output" : "hidden");
    nodes.push_back({{"id", j}, {"kind", kind}, {"active", t.is_active(j)}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (ConnId c = 0; c < t.connection_slots(); ++c) {
    const Connection& cn = t.connection(c);
    edges.push_back({{"src", cn.src},
                     {"dst", cn.dst},
                     {"group", cn.group},
                     {"active", t.connection_active(c)}});
  }
  return nlohmann::json{{"nodes", nodes},
                        {"edges", edges},
                        {"groups", t.group_count()},
                        {"inputs", t.input_nodes().size()},
                        {"outputs", t.output_nodes().size()}};
}

}  // namespace qbnn
