#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "qbnn/qubo.hpp"
#include "qbnn/rng.hpp"

using namespace qbnn;

namespace {

QuboModel random_model(int n, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  QuboAccumulator acc(n);
  acc.add_constant(rng.uniform() * 10 - 5);
  for (int i = 0; i < n; ++i) acc.add_linear(i, rng.uniform() * 4 - 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.3) acc.add_quadratic(i, j, rng.uniform() * 4 - 2);
  return acc.finalize();
}

}  // namespace

TEST_CASE("empty model energy is the constant") {
  QuboAccumulator acc(0);
  acc.add_constant(3.25);
  const QuboModel q = acc.finalize();
  REQUIRE(q.energy({}) == 3.25);
}

TEST_CASE("diagonal terms fold into linear ones") {
  QuboAccumulator acc(2);
  acc.add_quadratic(1, 1, 2.5);
  acc.add_quadratic(0, 1, 1.0);
  acc.add_quadratic(1, 0, 1.0);  // merges with (0,1)
  const QuboModel q = acc.finalize();
  REQUIRE(q.linear()[1] == 2.5);
  REQUIRE(q.quadratic().size() == 1);
  REQUIRE(q.quadratic()[0].coeff == 2.0);
}

TEST_CASE("exact zero quadratic entries are pruned") {
  QuboAccumulator acc(3);
  acc.add_quadratic(0, 1, 1.5);
  acc.add_quadratic(0, 1, -1.5);
  acc.add_quadratic(1, 2, 0.5);
  const QuboModel q = acc.finalize();
  REQUIRE(q.quadratic().size() == 1);
  REQUIRE(q.quadratic()[0].i == 1);
  REQUIRE(q.quadratic()[0].j == 2);
}

TEST_CASE("delta energy equals the energy difference of the flip") {
  const QuboModel q = random_model(30, 99);
  Xoshiro256 rng(1234);
  std::vector<std::uint8_t> z(30);
  for (auto& b : z) b = rng.coin();
  for (int trial = 0; trial < 1000; ++trial) {
    const int i = static_cast<int>(rng.below(30));
    const double before = q.energy(z);
    const double delta = q.delta_energy(z, i);
    z[i] ^= 1;
    REQUIRE_THAT(q.energy(z) - before, Catch::Matchers::WithinAbs(delta, 1e-9));
  }
}

TEST_CASE("flip and flip back cancels") {
  const QuboModel q = random_model(12, 5);
  Xoshiro256 rng(6);
  std::vector<std::uint8_t> z(12);
  for (auto& b : z) b = rng.coin();
  for (int i = 0; i < 12; ++i) {
    const double d1 = q.delta_energy(z, i);
    z[i] ^= 1;
    const double d2 = q.delta_energy(z, i);
    z[i] ^= 1;
    REQUIRE(d1 + d2 == 0.0);
  }
}

TEST_CASE("index errors are rejected") {
  const QuboModel q = random_model(4, 0);
  std::vector<std::uint8_t> z(4, 0);
  REQUIRE_THROWS_AS(q.delta_energy(z, 4), std::out_of_range);
  REQUIRE_THROWS_AS(q.delta_energy(z, -1), std::out_of_range);
  std::vector<std::uint8_t> wrong(3, 0);
  REQUIRE_THROWS_AS(q.energy(wrong), std::invalid_argument);
}

TEST_CASE("adjacency mirrors the quadratic terms symmetrically") {
  const QuboModel q = random_model(10, 3);
  const QuboAdjacency adj = QuboAdjacency::build(q);
  std::size_t half_edges = 0;
  for (const QuadTerm& t : q.quadratic()) half_edges += 2;
  REQUIRE(adj.neighbor.size() == half_edges);
  // field check: delta_energy from adjacency equals the model's
  std::vector<std::uint8_t> z(10, 1);
  for (int i = 0; i < 10; ++i) {
    double field = q.linear()[i];
    for (int e = adj.offsets[i]; e < adj.offsets[i + 1]; ++e)
      if (z[adj.neighbor[e]]) field += adj.coeff[e];
    REQUIRE_THAT(q.delta_energy(z, i), Catch::Matchers::WithinAbs(-field, 1e-12));
  }
}

TEST_CASE("sparse text export is parseable and bit-exact") {
  const QuboModel q = random_model(8, 77);
  std::stringstream out;
  write_sparse(q, out, {"test model"});

  // parse it back with the format documented in the README
  std::string line;
  REQUIRE(std::getline(out, line));
  REQUIRE(line == "# test model");
  REQUIRE(std::getline(out, line));
  REQUIRE(line == "V 8");
  QuboAccumulator acc(8);
  while (std::getline(out, line)) {
    std::istringstream ls(line);
    std::string first;
    ls >> first;
    if (first == "const") {
      double c;
      ls >> c;
      acc.add_constant(c);
    } else {
      const int i = std::stoi(first);
      std::string second;
      ls >> second;
      if (double c; ls >> c) {
        acc.add_quadratic(i, std::stoi(second), c);
      } else {
        acc.add_linear(i, std::stod(second));
      }
    }
  }
  const QuboModel back = acc.finalize();
  REQUIRE(back.constant() == q.constant());
  REQUIRE(back.linear() == q.linear());
  REQUIRE(back.quadratic().size() == q.quadratic().size());
  for (std::size_t i = 0; i < back.quadratic().size(); ++i) {
    REQUIRE(back.quadratic()[i].i == q.quadratic()[i].i);
    REQUIRE(back.quadratic()[i].j == q.quadratic()[i].j);
    REQUIRE(back.quadratic()[i].coeff == q.quadratic()[i].coeff);
  }
}
