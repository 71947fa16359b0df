#pragma once

// Arc-length parameterization of the histogram grid, pullback of that
// parameterization to voxels, and 1D diagnostic histograms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "topofuse/error.hpp"
#include "topofuse/grid.hpp"
#include "topofuse/histogram.hpp"
#include "topofuse/parallel.hpp"
#include "topofuse/projection.hpp"
#include "topofuse/spline.hpp"
#include "topofuse/volume.hpp"

namespace topofuse {

enum class FusionMode { single, merged };

inline const char* to_string(FusionMode m) { return m == FusionMode::single ? "single" : "merged"; }

/// F over the histogram cells (j * n + i). Single mode holds values in
/// [0, 1]; merged mode holds branch + arc length in [0, k).
struct FusedField {
  std::size_t n = 0;
  std::vector<double> values;
  std::size_t branch_count = 1;
  std::vector<std::int32_t> branch_assignment;
  FusionMode mode = FusionMode::single;

  double upper() const { return mode == FusionMode::single ? 1.0 : static_cast<double>(branch_count); }
};

/// F(p) = arc length of the sample nearest to cell center p.
inline FusedField parameterize_grid(const DensityField& d, const SplineSamples& samples, const ProjectionIndex& idx,
                                    unsigned threads = 0) {
  FusedField f;
  f.n = d.n;
  f.values.assign(d.size(), 0.0);
  f.branch_assignment.assign(d.size(), 0);
  parallel_for(0, d.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t c = lo; c < hi; ++c) {
      const Point2 q{static_cast<double>(c % d.n), static_cast<double>(c / d.n)};
      f.values[c] = project_point(idx, samples, q).ell;
    }
  });
  return f;
}

namespace detail {

/// k + ell, kept strictly below k + 1 so floor() names the branch.
inline double merged_value(std::size_t branch, double ell) {
  const double k = static_cast<double>(branch);
  const double v = k + ell;
  return v < k + 1.0 ? v : std::nextafter(k + 1.0, k);
}

inline std::pair<std::size_t, double> nearest_branch(std::span<const SplineSamples> branches,
                                                     std::span<const ProjectionIndex> idxs, Point2 q) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_ell = 0.0;
  for (std::size_t b = 0; b < branches.size(); ++b) {
    const auto hit = idxs[b].nearest(q);
    if (hit.squared_distance < best_d2) {
      best = b;
      best_d2 = hit.squared_distance;
      const auto& s = branches[b];
      best_ell = s.total_length > 0.0 ? std::min(1.0, s.cum_length[hit.index] / s.total_length) : 0.0;
    }
  }
  return {best, best_ell};
}

}  // namespace detail

/// Each cell goes to its nearest branch (ties to the lower branch id) and
/// takes F = branch + arc length on that branch.
inline FusedField parameterize_multibranch(const DensityField& d, std::span<const SplineSamples> branches,
                                           std::span<const ProjectionIndex> idxs, unsigned threads = 0) {
  if (branches.empty()) throw InputError("no branches to parameterize");
  if (branches.size() != idxs.size()) throw InputError("one projection index per branch is required");
  FusedField f;
  f.n = d.n;
  f.mode = FusionMode::merged;
  f.branch_count = branches.size();
  f.values.assign(d.size(), 0.0);
  f.branch_assignment.assign(d.size(), 0);
  parallel_for(0, d.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t c = lo; c < hi; ++c) {
      const Point2 q{static_cast<double>(c % d.n), static_cast<double>(c / d.n)};
      const auto [b, ell] = detail::nearest_branch(branches, idxs, q);
      f.values[c] = detail::merged_value(b, ell);
      f.branch_assignment[c] = static_cast<std::int32_t>(b);
    }
  });
  return f;
}

namespace detail {

inline Volume fused_shell(const Volume& v1, const Volume& v2, double upper) {
  require_same_dims(v1, v2);
  Volume out;
  out.dims = v1.dims;
  out.spacing = v1.spacing;
  out.values.assign(v1.size(), 0.0);
  out.vmin = 0.0;
  out.vmax = upper;
  out.name = "fused";
  return out;
}

}  // namespace detail

/// V_f(t) = F at the histogram cell of (V1(t), V2(t)), using the
/// histogram's own binning.
inline Volume fuse_volumes(const Volume& v1, const Volume& v2, const FusedField& f, const Histogram2D& h,
                           unsigned threads = 0) {
  if (f.n != h.n() || f.values.size() != h.counts.size())
    throw InputError("fused field and histogram have different grid sizes");
  Volume out = detail::fused_shell(v1, v2, f.upper());
  parallel_for(0, v1.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) out.values[t] = f.values[h.binning.cell(v1.values[t], v2.values[t])];
  });
  return out;
}

/// Projects each voxel's exact (V1, V2) position instead of its cell center.
inline Volume fuse_volumes_continuous(const Volume& v1, const Volume& v2, const Histogram2D& h,
                                      std::span<const SplineSamples> branches,
                                      std::span<const ProjectionIndex> idxs, FusionMode mode,
                                      unsigned threads = 0) {
  if (branches.empty() || branches.size() != idxs.size()) throw InputError("one projection index per branch is required");
  const double upper = mode == FusionMode::single ? 1.0 : static_cast<double>(branches.size());
  Volume out = detail::fused_shell(v1, v2, upper);
  parallel_for(0, v1.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      const Point2 q{h.binning.coord1(v1.values[t]), h.binning.coord2(v2.values[t])};
      const auto [b, ell] = detail::nearest_branch(branches, idxs, q);
      out.values[t] = mode == FusionMode::single ? ell : detail::merged_value(b, ell);
    }
  });
  return out;
}

struct Histogram1D {
  std::vector<double> edges;    // bins + 1, strictly increasing
  std::vector<double> weights;  // bins
  std::string label;

  std::size_t bins() const { return weights.size(); }
  double center(std::size_t b) const { return 0.5 * (edges[b] + edges[b + 1]); }
  double total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
};

inline std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  std::vector<double> e(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) e[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  e.back() = hi;
  return e;
}

/// Histogram mass aggregated by F value: every cell's count lands in the
/// bin of its F over [0, 1] (single) or [0, k] (merged).
inline Histogram1D spline_density_histogram(const Histogram2D& h, const FusedField& f, std::size_t bins) {
  if (bins == 0) throw InputError("histogram needs at least one bin");
  if (f.values.size() != h.counts.size()) throw InputError("fused field and histogram have different grid sizes");
  const double upper = f.upper();
  Histogram1D out;
  out.label = "spline_density";
  out.edges = uniform_edges(0.0, upper, bins);
  out.weights.assign(bins, 0.0);
  for (std::size_t c = 0; c < h.counts.size(); ++c) {
    if (h.counts[c] == 0) continue;
    const double t = f.values[c] / upper * static_cast<double>(bins);
    const std::size_t b = t <= 0.0 ? 0 : std::min(static_cast<std::size_t>(t), bins - 1);
    out.weights[b] += static_cast<double>(h.counts[c]);
  }
  return out;
}

/// Marginal of the joint histogram along axis 1 (sum over j) or axis 2.
inline Histogram1D axis_projection_histogram(const Histogram2D& h, int axis) {
  if (axis != 1 && axis != 2) throw InputError("axis must be 1 or 2");
  const std::size_t n = h.n();
  Histogram1D out;
  const AxisRange& r = axis == 1 ? h.binning.range1() : h.binning.range2();
  out.edges = uniform_edges(r.min, r.max, n);
  out.weights.assign(n, 0.0);
  out.label = "axis" + std::to_string(axis) + ":" + h.axis_names[axis - 1];
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) out.weights[axis == 1 ? i : j] += static_cast<double>(h.counts[j * n + i]);
  return out;
}

struct Peak {
  std::size_t bin = 0;
  double center = 0.0;
  double weight = 0.0;
  double persistence = 0.0;  // the global peak reports its full weight
};

struct PeakReport {
  std::size_t count = 0;
  std::vector<Peak> peaks;  // counted peaks, by bin
};

/// 1D superlevel persistence: sweeping weights downward (ties by bin
/// index), a peak dies where its run merges into a run with a higher peak.
/// The global peak counts whenever the histogram has mass; any other peak
/// counts when its persistence exceeds min_persistence * max(weights).
inline PeakReport count_peaks(const Histogram1D& h, double min_persistence) {
  const std::size_t n = h.bins();
  if (n < 3) throw InputError("peak counting needs at least 3 bins");
  if (!(min_persistence >= 0.0)) throw InputError("min_persistence must be >= 0");
  const auto& w = h.weights;
  auto higher = [&](std::size_t a, std::size_t b) { return w[a] > w[b] || (w[a] == w[b] && a > b); };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return higher(a, b); });

  // runs of swept bins are intervals; track each run's peak at both ends
  std::vector<std::size_t> peak_of(n, kNoVertex), left_end(n), right_end(n);
  std::vector<double> persistence(n, -1.0);
  for (std::size_t v : order) {
    const bool l = v > 0 && peak_of[v - 1] != kNoVertex;
    const bool r = v + 1 < n && peak_of[v + 1] != kNoVertex;
    std::size_t lo = v, hi = v, peak = v;
    if (l && r) {
      const std::size_t pl = peak_of[v - 1], pr = peak_of[v + 1];
      const std::size_t loser = higher(pl, pr) ? pr : pl;
      peak = loser == pl ? pr : pl;
      persistence[loser] = w[loser] - w[v];
      lo = left_end[v - 1];
      hi = right_end[v + 1];
    } else if (l) {
      peak = peak_of[v - 1];
      lo = left_end[v - 1];
    } else if (r) {
      peak = peak_of[v + 1];
      hi = right_end[v + 1];
    }
    peak_of[v] = peak_of[lo] = peak_of[hi] = peak;
    right_end[lo] = hi;
    left_end[hi] = lo;
  }
  const std::size_t global = order.front();
  persistence[global] = w[global];

  PeakReport out;
  const double max_w = w[global];
  if (!(max_w > 0.0)) return out;
  const double limit = min_persistence * max_w;
  for (std::size_t b = 0; b < n; ++b) {
    if (persistence[b] < 0.0) continue;
    const bool counted = b == global || (persistence[b] > 0.0 && persistence[b] > limit);
    if (counted) out.peaks.push_back({b, h.center(b), w[b], persistence[b]});
  }
  out.count = out.peaks.size();
  return out;
}

}  // namespace topofuse
