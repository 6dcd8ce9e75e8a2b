#pragma once

// Derivative-free 2-D Nelder-Mead minimisation with the standard
// reflection / expansion / contraction / shrink moves.

#include <array>
#include <cstdint>
#include <utility>

namespace qbnn {

struct NelderMeadResult {
  std::array<double, 2> best_point{};
  double best_value = 0.0;
  int evaluations = 0;
};

template <typename F>
NelderMeadResult nelder_mead_2d(F&& objective, std::array<double, 2> start,
                                double step, int max_evaluations) {
  using Point = std::array<double, 2>;
  struct Vertex {
    Point x;
    double value;
  };

  NelderMeadResult result;
  auto eval = [&](const Point& x) {
    double v = objective(x);
    ++result.evaluations;
    if (result.evaluations == 1 || v < result.best_value) {
      result.best_value = v;
      result.best_point = x;
    }
    return v;
  };
  auto budget_left = [&] { return result.evaluations < max_evaluations; };

  std::array<Vertex, 3> simplex{
      Vertex{start, 0.0},
      Vertex{{start[0] + step, start[1]}, 0.0},
      Vertex{{start[0], start[1] + step}, 0.0}};
  for (Vertex& v : simplex) {
    if (!budget_left() && result.evaluations > 0) return result;
    v.value = eval(v.x);
  }

  constexpr double kReflect = 1.0, kExpand = 2.0, kContract = 0.5, kShrink = 0.5;
  while (budget_left()) {
    std::sort(simplex.begin(), simplex.end(),
              [](const Vertex& a, const Vertex& b) { return a.value < b.value; });
    const Point centroid{(simplex[0].x[0] + simplex[1].x[0]) / 2.0,
                         (simplex[0].x[1] + simplex[1].x[1]) / 2.0};
    auto along = [&](double factor) {
      return Point{centroid[0] + factor * (centroid[0] - simplex[2].x[0]),
                   centroid[1] + factor * (centroid[1] - simplex[2].x[1])};
    };

    const Point reflected = along(kReflect);
    const double fr = eval(reflected);
    if (fr < simplex[0].value) {
      if (!budget_left()) return result;
      const Point expanded = along(kReflect * kExpand);
      const double fe = eval(expanded);
      simplex[2] = fe < fr ? Vertex{expanded, fe} : Vertex{reflected, fr};
      continue;
    }
    if (fr < simplex[1].value) {
      simplex[2] = {reflected, fr};
      continue;
    }
    if (!budget_left()) return result;
    const bool outside = fr < simplex[2].value;
    const Point contracted = along(outside ? kReflect * kContract : -kContract);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : simplex[2].value)) {
      simplex[2] = {contracted, fc};
      continue;
    }
    // shrink toward the best vertex
    for (int i = 1; i < 3; ++i) {
      if (!budget_left()) return result;
      for (int d = 0; d < 2; ++d)
        simplex[i].x[d] = simplex[0].x[d] + kShrink * (simplex[i].x[d] - simplex[0].x[d]);
      simplex[i].value = eval(simplex[i].x);
    }
  }
  return result;
}

}  // namespace qbnn
