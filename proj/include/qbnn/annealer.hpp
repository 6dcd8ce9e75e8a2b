#pragma once

// Replica-parallel simulated annealing over a QuboModel. Every replica is an
// independent Metropolis chain with its own RNG stream derived from the
// master seed, so the outcome is a pure function of (model, config) and does
// not depend on how replicas are distributed over worker threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qbnn/nelder_mead.hpp"
#include "qbnn/qubo.hpp"
#include "qbnn/rng.hpp"

namespace qbnn {

/// Geometric cooling schedule T(t) = t_max * (t_min/t_max)^(t/(n_steps-1)).
struct Schedule {
  double t_max = 5.0;
  double t_min = 1.0 / 8.6;
  int n_steps = 1000;

  void validate() const {
    if (!(t_max > 0.0)) throw std::invalid_argument("t_max must be > 0");
    if (!(t_min > 0.0) || t_min > t_max)
      throw std::invalid_argument("t_min must be in (0, t_max]");
    if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  }

  double temperature(int step) const {
    if (n_steps <= 1) return t_max;
    return t_max * std::pow(t_min / t_max,
                            static_cast<double>(step) / static_cast<double>(n_steps - 1));
  }
};

enum class SweepOrder : std::uint8_t { randomized, sequential };
enum class Precision : std::uint8_t { f64, f32 };

struct AnnealConfig {
  int n_replicas = 1000;
  Schedule schedule{};
  std::uint64_t seed = 0;
  SweepOrder sweep_order = SweepOrder::randomized;
  Precision precision = Precision::f64;  // f32 mimics single-precision hardware
};

struct AnnealOutcome {
  std::vector<std::uint8_t> best_state;
  double best_energy = 0.0;
  std::vector<double> per_replica_energies;  // best energy seen by each replica
  int replica_of_best = -1;
};

/// Seed of the RNG stream that drives replica `replica` of a run seeded with
/// `master`. Exposed so replica trajectories can be reproduced in isolation.
inline std::uint64_t replica_seed(std::uint64_t master, int replica) {
  return derive_seed(master, static_cast<std::uint64_t>(replica));
}

namespace detail {

struct ReplicaResult {
  double best_energy;
  std::vector<std::uint8_t> best_state;
};

// One full annealing trajectory: each Monte Carlo step is a sweep proposing
// a single-bit flip for every variable, accepted with probability
// min(1, exp(-dE/T)). The running energy is maintained incrementally from
// per-variable local fields.
template <typename Real>
ReplicaResult run_replica(const QuboModel& q, const QuboAdjacency& adj,
                          const std::vector<double>& temps,
                          std::uint64_t seed, SweepOrder order) {
  const int n = q.variable_count();
  Xoshiro256 rng(seed);

  std::vector<std::uint8_t> state(n);
  for (int i = 0; i < n; ++i) state[i] = rng.coin() ? 1 : 0;

  std::vector<Real> field(n);
  for (int i = 0; i < n; ++i) field[i] = static_cast<Real>(q.linear()[i]);
  for (int i = 0; i < n; ++i) {
    if (!state[i]) continue;
    for (int e = adj.offsets[i]; e < adj.offsets[i + 1]; ++e)
      field[adj.neighbor[e]] += static_cast<Real>(adj.coeff[e]);
  }

  double energy = q.energy(state);
  double best_energy = energy;
  std::vector<std::uint8_t> best_state = state;

  std::vector<int> visit(n);
  for (int i = 0; i < n; ++i) visit[i] = i;

  for (std::size_t step = 0; step < temps.size(); ++step) {
    const double inv_t = 1.0 / temps[step];
    if (order == SweepOrder::randomized) {
      for (int i = n - 1; i > 0; --i)
        std::swap(visit[i], visit[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    for (int p = 0; p < n; ++p) {
      const int i = visit[p];
      const Real d_e = state[i] ? -field[i] : field[i];
      if (d_e > 0) {
        const double x = static_cast<double>(d_e) * inv_t;
        if (x > 45.0) continue;
        if (rng.uniform() >= std::exp(-x)) continue;
      }
      state[i] ^= 1u;
      energy += static_cast<double>(d_e);
      const Real delta = state[i] ? Real(1) : Real(-1);
      for (int e = adj.offsets[i]; e < adj.offsets[i + 1]; ++e)
        field[adj.neighbor[e]] += static_cast<Real>(adj.coeff[e]) * delta;
      if (energy < best_energy) {
        best_energy = energy;
        best_state = state;
      }
    }
  }
  return {best_energy, std::move(best_state)};
}

inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QBNN_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace detail

/// Runs `cfg.n_replicas` independent annealing trajectories and returns the
/// best record state over all of them; ties go to the lowest replica index.
/// Deterministic for fixed (q, cfg) regardless of `n_threads`.
inline AnnealOutcome anneal(const QuboModel& q, const AnnealConfig& cfg,
                            int n_threads = 0) {
  if (q.variable_count() < 1)
    throw std::invalid_argument("anneal: model must have at least one variable");
  if (cfg.n_replicas < 1) throw std::invalid_argument("anneal: n_replicas must be >= 1");
  cfg.schedule.validate();

  const QuboAdjacency adj = QuboAdjacency::build(q);
  std::vector<double> temps(cfg.schedule.n_steps);
  for (int t = 0; t < cfg.schedule.n_steps; ++t) temps[t] = cfg.schedule.temperature(t);

  AnnealOutcome outcome;
  outcome.per_replica_energies.assign(cfg.n_replicas, 0.0);

  struct ThreadBest {
    double energy = 0.0;
    int replica = -1;
    std::vector<std::uint8_t> state;
  };
  const int threads = std::min(detail::resolve_thread_count(n_threads), cfg.n_replicas);
  std::vector<ThreadBest> bests(threads);

  auto work = [&](int tid, int lo, int hi) {
    ThreadBest local;
    for (int r = lo; r < hi; ++r) {
      auto run = cfg.precision == Precision::f32
                     ? detail::run_replica<float>(q, adj, temps, replica_seed(cfg.seed, r),
                                                  cfg.sweep_order)
                     : detail::run_replica<double>(q, adj, temps, replica_seed(cfg.seed, r),
                                                   cfg.sweep_order);
      outcome.per_replica_energies[r] = run.best_energy;
      if (local.replica < 0 || run.best_energy < local.energy) {
        local.energy = run.best_energy;
        local.replica = r;
        local.state = std::move(run.best_state);
      }
    }
    bests[tid] = std::move(local);
  };

  if (threads == 1) {
    work(0, 0, cfg.n_replicas);
  } else {
    const int chunk = (cfg.n_replicas + threads - 1) / threads;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      const int lo = t * chunk;
      const int hi = std::min(cfg.n_replicas, lo + chunk);
      pool.emplace_back(work, t, lo, hi);
    }
    for (std::thread& t : pool) t.join();
  }

  for (const ThreadBest& b : bests) {
    if (b.replica < 0) continue;
    if (outcome.replica_of_best < 0 || b.energy < outcome.best_energy ||
        (b.energy == outcome.best_energy && b.replica < outcome.replica_of_best)) {
      outcome.best_energy = b.energy;
      outcome.replica_of_best = b.replica;
      outcome.best_state = b.state;
    }
  }
  return outcome;
}

/// Tunes (t_max, t_min) by Nelder-Mead in log-temperature space, minimising
/// the mean best energy over three pilot runs with fixed derived seeds. The
/// ordering of the two coordinates is irrelevant: the larger one becomes
/// t_max. Spends at most `budget` objective evaluations (>= 5) and returns
/// the best schedule seen.
inline Schedule tune_temperatures(const QuboModel& q, const AnnealConfig& base,
                                  int budget, int n_threads = 0) {
  if (budget < 5) throw std::invalid_argument("tune_temperatures: budget must be >= 5");
  base.schedule.validate();

  auto schedule_at = [&](const std::array<double, 2>& log_t) {
    double a = std::exp(std::clamp(log_t[0], -14.0, 14.0));
    double b = std::exp(std::clamp(log_t[1], -14.0, 14.0));
    Schedule s;
    s.t_max = std::max(a, b);
    s.t_min = std::min(a, b);
    s.n_steps = base.schedule.n_steps;
    return s;
  };
  auto objective = [&](const std::array<double, 2>& log_t) {
    AnnealConfig cfg = base;
    cfg.schedule = schedule_at(log_t);
    double total = 0.0;
    for (int pilot = 0; pilot < 3; ++pilot) {
      cfg.seed = derive_seed(base.seed, 0x70694c4f54ULL + pilot);  // pilot stream
      total += anneal(q, cfg, n_threads).best_energy;
    }
    return total / 3.0;
  };

  const std::array<double, 2> start{std::log(base.schedule.t_max),
                                    std::log(base.schedule.t_min)};
  const NelderMeadResult r = nelder_mead_2d(objective, start, 0.7, budget);
  return schedule_at(r.best_point);
}

}  // namespace qbnn
