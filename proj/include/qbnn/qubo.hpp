#pragma once

// Sparse QUBO model: E(z) = constant + sum_i linear_i z_i
//                         + sum_{i<j} quad_ij z_i z_j,  z in {0,1}^V.
// Quadratic terms are stored upper-triangular with exact zeros pruned.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace qbnn {

struct QuadTerm {
  int i;  // i < j
  int j;
  double coeff;
};

class QuboModel {
 public:
  explicit QuboModel(int variable_count = 0)
      : linear_(variable_count, 0.0) {}

  int variable_count() const { return static_cast<int>(linear_.size()); }
  double constant() const { return constant_; }
  const std::vector<double>& linear() const { return linear_; }
  const std::vector<QuadTerm>& quadratic() const { return quadratic_; }

  double energy(std::span<const std::uint8_t> z) const {
    check_state(z);
    double e = constant_;
    for (int i = 0; i < variable_count(); ++i)
      if (z[i]) e += linear_[i];
    for (const QuadTerm& t : quadratic_)
      if (z[t.i] && z[t.j]) e += t.coeff;
    return e;
  }

  /// Energy change of flipping bit `flip_index`, computed from the current
  /// state without re-evaluating the whole model.
  double delta_energy(std::span<const std::uint8_t> z, int flip_index) const {
    check_state(z);
    if (flip_index < 0 || flip_index >= variable_count())
      throw std::out_of_range("delta_energy: flip index out of range");
    double field = linear_[flip_index];
    for (const QuadTerm& t : quadratic_) {
      if (t.i == flip_index && z[t.j]) field += t.coeff;
      if (t.j == flip_index && z[t.i]) field += t.coeff;
    }
    return z[flip_index] ? -field : field;
  }

 private:
  void check_state(std::span<const std::uint8_t> z) const {
    if (static_cast<int>(z.size()) != variable_count())
      throw std::invalid_argument("state size does not match variable count");
  }

  friend class QuboAccumulator;
  double constant_ = 0.0;
  std::vector<double> linear_;
  std::vector<QuadTerm> quadratic_;  // sorted by (i, j)
};

/// Mutable builder for QuboModel. Folds diagonal terms into linear ones
/// (z*z = z for binary z) and canonicalises i < j.
class QuboAccumulator {
 public:
  explicit QuboAccumulator(int variable_count)
      : n_(variable_count), linear_(variable_count, 0.0) {}

  explicit QuboAccumulator(const QuboModel& m)
      : n_(m.variable_count()), constant_(m.constant()), linear_(m.linear()) {
    for (const QuadTerm& t : m.quadratic())
      quad_[key(t.i, t.j)] = t.coeff;
  }

  int variable_count() const { return n_; }

  void add_constant(double c) { constant_ += c; }

  void add_linear(int i, double c) {
    check_index(i);
    linear_[i] += c;
  }

  void add_quadratic(int i, int j, double c) {
    check_index(i);
    check_index(j);
    if (i == j) {
      linear_[i] += c;
      return;
    }
    if (i > j) std::swap(i, j);
    quad_[key(i, j)] += c;
  }

  QuboModel finalize() const {
    QuboModel m(n_);
    m.constant_ = constant_;
    m.linear_ = linear_;
    m.quadratic_.reserve(quad_.size());
    for (const auto& [k, c] : quad_)
      if (c != 0.0)
        m.quadratic_.push_back({static_cast<int>(k >> 32),
                                static_cast<int>(k & 0xffffffffu), c});
    std::sort(m.quadratic_.begin(), m.quadratic_.end(),
              [](const QuadTerm& a, const QuadTerm& b) {
                return a.i != b.i ? a.i < b.i : a.j < b.j;
              });
    return m;
  }

 private:
  static std::uint64_t key(int i, int j) {
    return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j);
  }
  void check_index(int i) const {
    if (i < 0 || i >= n_) throw std::out_of_range("variable index out of range");
  }
  int n_;
  double constant_ = 0.0;
  std::vector<double> linear_;
  std::unordered_map<std::uint64_t, double> quad_;
};

/// Symmetric adjacency view of the quadratic terms in CSR form, for O(deg)
/// local-field updates in the annealer.
struct QuboAdjacency {
  std::vector<int> offsets;    // size V+1
  std::vector<int> neighbor;   // column index
  std::vector<double> coeff;

  static QuboAdjacency build(const QuboModel& q) {
    const int n = q.variable_count();
    QuboAdjacency a;
    a.offsets.assign(n + 1, 0);
    for (const QuadTerm& t : q.quadratic()) {
      ++a.offsets[t.i + 1];
      ++a.offsets[t.j + 1];
    }
    for (int i = 0; i < n; ++i) a.offsets[i + 1] += a.offsets[i];
    a.neighbor.resize(a.offsets[n]);
    a.coeff.resize(a.offsets[n]);
    std::vector<int> cursor(a.offsets.begin(), a.offsets.end() - 1);
    for (const QuadTerm& t : q.quadratic()) {
      a.neighbor[cursor[t.i]] = t.j;
      a.coeff[cursor[t.i]++] = t.coeff;
      a.neighbor[cursor[t.j]] = t.i;
      a.coeff[cursor[t.j]++] = t.coeff;
    }
    return a;
  }
};

namespace detail {
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}
}  // namespace detail

/// Writes the model in the sparse text exchange format:
///   # optional comment lines
///   V <variable count>
///   const <constant>
///   <i> <coeff>        linear term
///   <i> <j> <coeff>    quadratic term (i < j)
/// Numbers use shortest round-trip formatting, so the file reproduces the
/// model bit-exactly.
inline void write_sparse(const QuboModel& q, std::ostream& out,
                         const std::vector<std::string>& comments = {}) {
  for (const std::string& c : comments) out << "# " << c << '\n';
  out << "V " << q.variable_count() << '\n';
  out << "const " << detail::format_double(q.constant()) << '\n';
  for (int i = 0; i < q.variable_count(); ++i)
    if (q.linear()[i] != 0.0)
      out << i << ' ' << detail::format_double(q.linear()[i]) << '\n';
  for (const QuadTerm& t : q.quadratic())
    out << t.i << ' ' << t.j << ' ' << detail::format_double(t.coeff) << '\n';
}

}  // namespace qbnn
