#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "topofuse/error.hpp"

namespace topofuse {

/// Integer vertex of an n x n grid; i runs along the first histogram axis.
struct GridPoint {
  std::int32_t i = 0;
  std::int32_t j = 0;
  friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

/// Continuous point in histogram grid coordinates (vertex (i,j) sits at (i,j)).
struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

/// Scalar field on an n x n vertex grid, stored with i fastest
/// (linear index j * n + i). Vertices are totally ordered by
/// (value, linear index), a symbolic perturbation that removes ties.
struct GridField {
  std::size_t n = 0;
  std::vector<double> values;

  GridField() = default;
  GridField(std::size_t n_, std::vector<double> v) : n(n_), values(std::move(v)) {
    if (values.size() != n * n) throw InputError("GridField: values length must be n*n");
  }

  std::size_t size() const { return values.size(); }
  std::size_t index(std::size_t i, std::size_t j) const { return j * n + i; }
  GridPoint point(std::size_t v) const {
    return {static_cast<std::int32_t>(v % n), static_cast<std::int32_t>(v / n)};
  }
  double operator[](std::size_t v) const { return values[v]; }

  /// Strict total order on vertices: true iff a is above b.
  bool higher(std::size_t a, std::size_t b) const {
    return values[a] > values[b] || (values[a] == values[b] && a > b);
  }
};

/// A density field is the log-normalized histogram seen as a grid field.
using DensityField = GridField;

/// Link of a vertex in the fixed-diagonal triangulation (each quad split
/// along lower-left to upper-right). Offsets are in counter-clockwise
/// order; consecutive entries span a triangle with the center vertex.
inline constexpr std::array<std::array<int, 2>, 6> kLinkOffsets = {{
    {1, 0}, {1, 1}, {0, 1}, {-1, 0}, {-1, -1}, {0, -1},
}};

inline constexpr std::size_t kNoVertex = static_cast<std::size_t>(-1);

/// The six link slots of vertex v; slots outside the grid hold kNoVertex.
inline std::array<std::size_t, 6> link_of(std::size_t n, std::size_t v) {
  std::array<std::size_t, 6> out{};
  const auto i = static_cast<std::ptrdiff_t>(v % n);
  const auto j = static_cast<std::ptrdiff_t>(v / n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
  for (std::size_t k = 0; k < 6; ++k) {
    const auto ni = i + kLinkOffsets[k][0];
    const auto nj = j + kLinkOffsets[k][1];
    out[k] = (ni < 0 || nj < 0 || ni >= sn || nj >= sn) ? kNoVertex : static_cast<std::size_t>(nj * sn + ni);
  }
  return out;
}

}  // namespace topofuse
