#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "topofuse/error.hpp"

namespace topofuse {

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// A 3D scalar grid, x-fastest. Values are always held as doubles regardless
/// of the storage type they were read from.
struct Volume {
  Dims dims;
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<double> values;
  double vmin = 0.0;
  double vmax = 0.0;
  std::string name;

  std::size_t size() const { return values.size(); }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (k * dims.ny + j) * dims.nx + i;
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return values[index(i, j, k)]; }
};

/// (min, max) of a non-empty span.
inline std::pair<double, double> value_extent(std::span<const double> values) {
  if (values.empty()) throw InputError("value_extent: empty value array");
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {*lo, *hi};
}

/// Throws InputError if any invariant of `v` is broken.
inline void validate(const Volume& v) {
  if (v.dims.nx == 0 || v.dims.ny == 0 || v.dims.nz == 0)
    throw InputError("volume '" + v.name + "': dims must be positive");
  if (v.values.size() != v.dims.count())
    throw InputError("volume '" + v.name + "': values length does not match dims");
  for (double s : v.spacing)
    if (!(s > 0.0) || !std::isfinite(s))
      throw InputError("volume '" + v.name + "': spacing must be positive and finite");
  if (!(v.vmin <= v.vmax)) throw InputError("volume '" + v.name + "': vmin > vmax");
  for (double x : v.values) {
    if (!std::isfinite(x)) throw InputError("volume '" + v.name + "': non-finite value");
    if (x < v.vmin || x > v.vmax)
      throw InputError("volume '" + v.name + "': value outside declared range");
  }
}

/// Builds a validated volume whose value range is the data extent.
inline Volume make_volume(Dims dims, std::vector<double> values, std::string name = {}) {
  Volume v;
  v.dims = dims;
  v.values = std::move(values);
  v.name = std::move(name);
  if (!v.values.empty()) std::tie(v.vmin, v.vmax) = value_extent(v.values);
  validate(v);
  return v;
}

}  // namespace topofuse
