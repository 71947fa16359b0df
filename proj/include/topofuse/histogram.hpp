#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topofuse/error.hpp"
#include "topofuse/grid.hpp"
#include "topofuse/volume.hpp"

namespace topofuse {

struct AxisRange {
  double min = 0.0;
  double max = 1.0;
  double width() const { return max - min; }
  friend bool operator==(const AxisRange&, const AxisRange&) = default;
};

/// The binning rule shared by histogram construction and the voxel
/// pullback: half-open bins with a closed top, out-of-range values clamp.
class Binning {
 public:
  Binning() = default;
  Binning(std::size_t n, AxisRange r1, AxisRange r2) : n_(n), r1_(r1), r2_(r2) {
    if (n < 2) throw InputError("histogram needs at least 2 bins per axis");
    if (!(r1.max > r1.min) || !(r2.max > r2.min) || !std::isfinite(r1.width()) || !std::isfinite(r2.width()))
      throw InputError("degenerate histogram range (max must exceed min)");
  }

  std::size_t bins() const { return n_; }
  const AxisRange& range1() const { return r1_; }
  const AxisRange& range2() const { return r2_; }

  std::size_t bin1(double v) const { return bin_of(v, r1_); }
  std::size_t bin2(double v) const { return bin_of(v, r2_); }
  /// Linear cell index j * n + i.
  std::size_t cell(double v1, double v2) const { return bin2(v2) * n_ + bin1(v1); }

  /// Continuous grid coordinate of a value; cell centers sit at integers.
  double coord1(double v) const { return (v - r1_.min) / r1_.width() * static_cast<double>(n_) - 0.5; }
  double coord2(double v) const { return (v - r2_.min) / r2_.width() * static_cast<double>(n_) - 0.5; }

  friend bool operator==(const Binning&, const Binning&) = default;

 private:
  std::size_t bin_of(double v, const AxisRange& r) const {
    const double t = (v - r.min) / (r.max - r.min) * static_cast<double>(n_);
    if (!(t >= 0.0)) return 0;
    if (t >= static_cast<double>(n_)) return n_ - 1;
    return std::min(static_cast<std::size_t>(t), n_ - 1);
  }

  std::size_t n_ = 0;
  AxisRange r1_;
  AxisRange r2_;
};

struct Histogram2D {
  Binning binning;
  std::vector<std::uint64_t> counts;  // j * n + i
  std::array<std::string, 2> axis_names;
  std::uint64_t total_count = 0;

  std::size_t n() const { return binning.bins(); }
  std::uint64_t at(std::size_t i, std::size_t j) const { return counts[j * n() + i]; }
};

using AxisRanges = std::pair<AxisRange, AxisRange>;

inline void require_same_dims(const Volume& a, const Volume& b) {
  if (!(a.dims == b.dims) || a.values.size() != b.values.size())
    throw InputError("volumes '" + a.name + "' and '" + b.name + "' have different dimensions");
}

/// Joint histogram of co-registered volumes. Default axis ranges are each
/// volume's declared value range.
inline Histogram2D compute_joint_histogram(const Volume& v1, const Volume& v2, std::size_t n,
                                           std::optional<AxisRanges> ranges = std::nullopt) {
  require_same_dims(v1, v2);
  const AxisRanges r = ranges.value_or(AxisRanges{{v1.vmin, v1.vmax}, {v2.vmin, v2.vmax}});
  Histogram2D h;
  h.binning = Binning(n, r.first, r.second);
  h.counts.assign(n * n, 0);
  h.axis_names = {v1.name, v2.name};
  for (std::size_t t = 0; t < v1.values.size(); ++t) ++h.counts[h.binning.cell(v1.values[t], v2.values[t])];
  h.total_count = v1.values.size();
  return h;
}

/// log(bin + 1) / log(max_bin + 1); all zeros when the histogram is empty.
inline DensityField log_normalize(const Histogram2D& h) {
  const std::size_t n = h.n();
  std::vector<double> values(n * n, 0.0);
  const std::uint64_t max_bin = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
  if (max_bin > 0) {
    const double denom = std::log(static_cast<double>(max_bin) + 1.0);
    for (std::size_t c = 0; c < values.size(); ++c)
      values[c] = std::log(static_cast<double>(h.counts[c]) + 1.0) / denom;
  }
  return GridField(n, std::move(values));
}

/// Sample Pearson coefficient, single pass with Welford co-moment updates.
inline double pearson_correlation(const Volume& v1, const Volume& v2) {
  require_same_dims(v1, v2);
  double mean_x = 0.0, mean_y = 0.0, cxx = 0.0, cyy = 0.0, cxy = 0.0;
  const std::size_t count = v1.values.size();
  for (std::size_t t = 0; t < count; ++t) {
    const double k = static_cast<double>(t + 1);
    const double dx = v1.values[t] - mean_x;
    const double dy = v2.values[t] - mean_y;
    mean_x += dx / k;
    mean_y += dy / k;
    const double dx2 = v1.values[t] - mean_x;
    const double dy2 = v2.values[t] - mean_y;
    cxx += dx * dx2;
    cyy += dy * dy2;
    cxy += dx * dy2;
  }
  if (!(cxx > 0.0) || !(cyy > 0.0))
    throw InputError("correlation is undefined for a constant volume");
  return std::clamp(cxy / std::sqrt(cxx * cyy), -1.0, 1.0);
}

struct PairReport {
  std::size_t first = 0;
  std::size_t second = 0;
  double correlation = 0.0;
  Histogram2D histogram;
};

/// All volume pairs ranked by ascending correlation (ties keep pair order).
inline std::vector<PairReport> pair_selection_report(std::span<const Volume> volumes, std::size_t n) {
  if (volumes.size() < 2) throw InputError("pair selection needs at least two volumes");
  std::vector<PairReport> out;
  for (std::size_t a = 0; a < volumes.size(); ++a)
    for (std::size_t b = a + 1; b < volumes.size(); ++b)
      out.push_back({a, b, pearson_correlation(volumes[a], volumes[b]),
                     compute_joint_histogram(volumes[a], volumes[b], n)});
  std::stable_sort(out.begin(), out.end(),
                   [](const PairReport& x, const PairReport& y) { return x.correlation < y.correlation; });
  return out;
}

}  // namespace topofuse
