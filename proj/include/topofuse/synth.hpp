#pragma once

// Synthetic inputs: volume pairs whose joint histogram is a ring of
// Gaussian blobs, and analytic bump fields for topology fixtures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "topofuse/error.hpp"
#include "topofuse/grid.hpp"
#include "topofuse/volume.hpp"

namespace topofuse {

/// SplitMix64 evaluated at (key, counter). Every draw is a pure function
/// of the key and its position, so streams are reproducible on any
/// platform and can be split per block without coordination.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  /// Key for an independent sub-stream.
  static std::uint64_t derive(std::uint64_t key, std::uint64_t stream) { return mix(key ^ mix(stream + kGolden)); }

  std::uint64_t at(std::uint64_t counter) const { return mix(key_ + (counter + 1) * kGolden); }
  std::uint64_t next() { return at(counter_++); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound == 0 ? 0 : (~std::uint64_t{0} - bound + 1) % bound;
    for (;;) {
      const std::uint64_t x = next();
      if (x >= limit) return x % bound;
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct GaussianSpec {
  Point2 center;
  double sigma = 1.0;
  double weight = 1.0;
};

/// Sum of weight * exp(-|x - c|^2 / (2 sigma^2)) sampled at grid vertices.
inline GridField generate_bump_field(const std::vector<GaussianSpec>& specs, std::size_t n) {
  if (n < 8) throw InputError("bump field needs n >= 8");
  for (const auto& s : specs)
    if (!(s.sigma > 0.0) || !(s.weight > 0.0)) throw InputError("bump sigma and weight must be positive");
  std::vector<double> values(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const auto& s : specs) {
        const double d2 = squared_distance({static_cast<double>(i), static_cast<double>(j)}, s.center);
        acc += s.weight * std::exp(-d2 / (2.0 * s.sigma * s.sigma));
      }
      values[j * n + i] = acc;
    }
  return GridField(n, std::move(values));
}

/// Ring-of-blobs fixture. Attribute values live in [0, 1] on both axes;
/// blob m sits at angle 2 pi m / k around `center`, snapped to the nearest
/// lattice cell center. On a regular octagon the outer and diagonal blobs
/// share nearby coordinates, so with sigma / radius near 0.22 the axis
/// marginals merge them and show three peaks each.
struct CircularGaussiansParams {
  std::size_t k = 8;
  double radius = 0.045;
  double sigma = 0.01;
  std::size_t voxels_per_blob = 500'000;
  std::uint64_t seed = 42;
  /// Values are placed on this lattice per axis; it matches a histogram of
  /// the same resolution over [0, 1] so every value falls inside its cell.
  std::size_t resolution = 1000;
  /// Blob support radius in sigmas. Each profile is lowered by its value at
  /// this radius so it reaches zero continuously.
  double truncation = 2.5;
  Point2 center{0.5, 0.5};
};

struct SynthPair {
  Volume v1;
  Volume v2;
  std::vector<GaussianSpec> blobs;  // attribute-space blobs
  std::vector<std::size_t> block_sizes;
  std::vector<std::string> warnings;
};

/// The expected mixture mass per lattice cell is turned into integer
/// voxel counts by largest-remainder apportionment, so counts never
/// decrease where the mixture increases and the joint histogram carries no
/// sampling noise. Each cell's count is split among the blobs in
/// proportion to their share. The spatial domain is cut into k contiguous
/// blocks (in linear voxel order); block m holds the voxels drawn from blob
/// m with random positions inside their cells, in random order.
inline SynthPair generate_circular_gaussians(const CircularGaussiansParams& p) {
  if (p.k < 2) throw InputError("circular Gaussians need k >= 2");
  if (!(p.radius > 0.0) || !(p.sigma > 0.0) || !(p.truncation > 0.0))
    throw InputError("radius, sigma and truncation must be positive");
  if (p.resolution < 8) throw InputError("lattice resolution must be >= 8");
  const double reach = p.radius + p.truncation * p.sigma;
  if (p.center.x - reach < 0.0 || p.center.x + reach > 1.0 || p.center.y - reach < 0.0 || p.center.y + reach > 1.0)
    throw InputError("blobs extend outside the [0, 1] attribute range");
  if (p.voxels_per_blob == 0) throw InputError("domain too small for k blocks");

  SynthPair out;
  if (p.sigma >= p.radius * std::sin(std::numbers::pi / static_cast<double>(p.k)))
    out.warnings.push_back("sigma >= radius * sin(pi / k): neighboring blobs may not be distinct");

  const std::size_t total = p.k * p.voxels_per_blob;
  const auto side = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(total)))));
  const std::size_t nz = (total + side * side - 1) / (side * side);
  const Dims dims{side, side, nz};
  const std::size_t count = dims.count();

  const double res = static_cast<double>(p.resolution);
  const auto lattice = [&](double x) { return std::min(res - 0.5, std::floor(x * res) + 0.5) / res; };
  for (std::size_t m = 0; m < p.k; ++m) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(p.k);
    out.blobs.push_back({{lattice(p.center.x + p.radius * std::cos(angle)), lattice(p.center.y + p.radius * std::sin(angle))},
                         p.sigma, 1.0});
  }

  // expected mass per cell, per blob
  struct Cell {
    std::uint32_t i, j;
    std::vector<double> share;  // per blob
    double quota = 0.0;
  };
  std::vector<Cell> cells;
  const double cut = p.truncation * p.sigma;
  const double floor_value = std::exp(-0.5 * p.truncation * p.truncation);
  const auto lo = [&](double x) { return static_cast<std::size_t>(std::max(0.0, std::floor((x - cut) * res))); };
  const auto hi = [&](double x) { return std::min(p.resolution - 1, static_cast<std::size_t>(std::ceil((x + cut) * res))); };
  double mx0 = 1.0, mx1 = 0.0, my0 = 1.0, my1 = 0.0;
  for (const auto& b : out.blobs) {
    mx0 = std::min(mx0, b.center.x);
    mx1 = std::max(mx1, b.center.x);
    my0 = std::min(my0, b.center.y);
    my1 = std::max(my1, b.center.y);
  }
  for (std::size_t j = lo(my0); j <= hi(my1); ++j)
    for (std::size_t i = lo(mx0); i <= hi(mx1); ++i) {
      const Point2 x{(static_cast<double>(i) + 0.5) / res, (static_cast<double>(j) + 0.5) / res};
      Cell cell{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), std::vector<double>(p.k, 0.0)};
      for (std::size_t m = 0; m < p.k; ++m) {
        const double d2 = squared_distance(x, out.blobs[m].center);
        if (d2 >= cut * cut) continue;
        cell.share[m] = std::exp(-d2 / (2.0 * p.sigma * p.sigma)) - floor_value;
        cell.quota += cell.share[m];
      }
      if (cell.quota > 0.0) cells.push_back(std::move(cell));
    }

  // largest remainder; ties go to the earlier cell
  auto apportion = [](std::uint64_t amount, std::vector<double>& quota, std::vector<std::uint64_t>& result) {
    const double sum = std::accumulate(quota.begin(), quota.end(), 0.0);
    result.assign(quota.size(), 0);
    std::uint64_t given = 0;
    std::vector<double> rem(quota.size());
    for (std::size_t c = 0; c < quota.size(); ++c) {
      const double q = quota[c] / sum * static_cast<double>(amount);
      result[c] = static_cast<std::uint64_t>(q);
      rem[c] = q - static_cast<double>(result[c]);
      given += result[c];
    }
    std::vector<std::size_t> order(quota.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t r = 0; given < amount; ++r, ++given) ++result[order[r % order.size()]];
  };

  std::vector<double> quota(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) quota[c] = cells[c].quota;
  std::vector<std::uint64_t> counts;
  apportion(count, quota, counts);

  // split each cell among blobs, then lay blocks out in blob order
  std::vector<std::vector<std::uint64_t>> per_blob(cells.size());
  out.block_sizes.assign(p.k, 0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (counts[c] == 0) continue;
    apportion(counts[c], cells[c].share, per_blob[c]);
    for (std::size_t m = 0; m < p.k; ++m) out.block_sizes[m] += per_blob[c][m];
  }

  out.v1.dims = out.v2.dims = dims;
  out.v1.values.assign(count, 0.0);
  out.v2.values.assign(count, 0.0);
  out.v1.name = "synth_v1";
  out.v2.name = "synth_v2";
  out.v1.vmin = out.v2.vmin = 0.0;
  out.v1.vmax = out.v2.vmax = 1.0;

  std::size_t begin = 0;
  for (std::size_t m = 0; m < p.k; ++m) {
    CounterRng rng(CounterRng::derive(p.seed, m));
    std::size_t t = begin;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (counts[c] == 0) continue;
      for (std::uint64_t q = 0; q < per_blob[c][m]; ++q, ++t) {
        out.v1.values[t] = (cells[c].i + 0.05 + 0.9 * rng.uniform()) / res;
        out.v2.values[t] = (cells[c].j + 0.05 + 0.9 * rng.uniform()) / res;
      }
    }
    const std::size_t block = out.block_sizes[m];
    for (std::size_t a = block; a > 1; --a) {
      const std::size_t b = static_cast<std::size_t>(rng.below(a));
      std::swap(out.v1.values[begin + a - 1], out.v1.values[begin + b]);
      std::swap(out.v2.values[begin + a - 1], out.v2.values[begin + b]);
    }
    begin += block;
  }
  return out;
}

}  // namespace topofuse
