#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "arbary/common.hpp"

namespace arbary {

/// Uniform angular-frequency grid on [-pi, pi).
template <typename Scalar>
struct FrequencyGrid {
  Index n_bins = 0;
  VectorX<Scalar> points;
  Scalar spacing = Scalar(0);

  friend bool operator==(const FrequencyGrid& a, const FrequencyGrid& b) {
    return a.n_bins == b.n_bins;
  }
};

/// Nonnegative spectral mass vector on a grid. `normalized` means
/// |sum(mass) - 1| <= 1e-12.
template <typename Scalar>
struct Psd {
  FrequencyGrid<Scalar> grid;
  VectorX<Scalar> mass;
  bool normalized = false;
};

/// Pairwise squared circular distances between grid points.
template <typename Scalar>
struct GroundCost {
  FrequencyGrid<Scalar> grid;
  MatrixX<Scalar> matrix;
};

template <typename Scalar>
FrequencyGrid<Scalar> make_grid(Index n_bins) {
  if (n_bins < 2) throw InvalidArgument("make_grid: n_bins must be >= 2");
  const Scalar pi = std::numbers::pi_v<Scalar>;
  FrequencyGrid<Scalar> grid;
  grid.n_bins = n_bins;
  grid.spacing = Scalar(2) * pi / Scalar(n_bins);
  grid.points.resize(n_bins);
  for (Index i = 0; i < n_bins; ++i) grid.points[i] = -pi + Scalar(i) * grid.spacing;
  return grid;
}

/// Squared distance on the circle, c(w1, w2) = min(|dw|, 2pi - |dw|)^2.
template <typename Scalar>
Scalar circular_cost(Scalar omega1, Scalar omega2) {
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  Scalar d = std::fmod(std::abs(omega1 - omega2), two_pi);
  d = std::min(d, two_pi - d);
  return d * d;
}

template <typename Scalar>
GroundCost<Scalar> build_cost(const FrequencyGrid<Scalar>& grid) {
  GroundCost<Scalar> cost;
  cost.grid = grid;
  cost.matrix.resize(grid.n_bins, grid.n_bins);
  for (Index i = 0; i < grid.n_bins; ++i) {
    cost.matrix(i, i) = Scalar(0);
    for (Index j = 0; j < i; ++j) {
      const Scalar c = circular_cost(grid.points[i], grid.points[j]);
      cost.matrix(i, j) = c;
      cost.matrix(j, i) = c;
    }
  }
  return cost;
}

template <typename Scalar>
Psd<Scalar> normalize(const Psd<Scalar>& psd) {
  const Scalar total = psd.mass.sum();
  if (!(total > Scalar(0)))
    throw DegenerateInput("normalize: total mass must be positive");
  Psd<Scalar> out;
  out.grid = psd.grid;
  out.mass = psd.mass / total;
  out.normalized = true;
  return out;
}

enum class BaselineKind { L2, KL, IS };

/// Pointwise spectral divergences. L2 integrates with the grid spacing;
/// KL (generalized form) and IS act on the mass vectors directly, with a
/// 1e-12 floor inside every log/ratio argument.
template <typename Scalar>
Scalar baseline_distance(BaselineKind kind, const Psd<Scalar>& p, const Psd<Scalar>& q) {
  if (!(p.grid == q.grid))
    throw InvalidArgument("baseline_distance: PSDs on different grids");
  constexpr Scalar kDivFloor = Scalar(1e-12);
  const Index n = p.grid.n_bins;
  Scalar acc = Scalar(0);
  switch (kind) {
    case BaselineKind::L2:
      acc = (p.mass - q.mass).squaredNorm() * p.grid.spacing;
      break;
    case BaselineKind::KL:
      for (Index i = 0; i < n; ++i) {
        const Scalar pi = p.mass[i], qi = q.mass[i];
        acc += pi * std::log(std::max(pi, kDivFloor) / std::max(qi, kDivFloor)) - pi + qi;
      }
      break;
    case BaselineKind::IS:
      for (Index i = 0; i < n; ++i) {
        const Scalar r = std::max(p.mass[i], kDivFloor) / std::max(q.mass[i], kDivFloor);
        acc += r - std::log(r) - Scalar(1);
      }
      break;
  }
  return acc;
}

template <typename Scalar>
Psd<Scalar> arithmetic_mean_centroid(const std::vector<Psd<Scalar>>& set) {
  if (set.empty())
    throw InvalidArgument("arithmetic_mean_centroid: empty set");
  Psd<Scalar> out;
  out.grid = set.front().grid;
  out.mass = VectorX<Scalar>::Zero(out.grid.n_bins);
  for (const auto& psd : set) {
    if (!(psd.grid == out.grid))
      throw InvalidArgument("arithmetic_mean_centroid: mixed grids");
    out.mass += psd.mass;
  }
  out.mass /= Scalar(set.size());
  out.normalized = std::abs(out.mass.sum() - Scalar(1)) <= Scalar(1e-12);
  return out;
}

}  // namespace arbary
