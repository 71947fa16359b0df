#pragma once

// Planar smoothing B-splines fitted to grid paths, and arc-length sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "topofuse/error.hpp"
#include "topofuse/grid.hpp"
#include "topofuse/pathfind.hpp"

namespace topofuse {

/// Clamped planar B-spline on [0, 1].
struct BSplineCurve {
  int degree = 3;
  std::vector<double> knots;   // coeffs.size() + degree + 1 entries
  std::vector<Point2> coeffs;
  double residual = 0.0;       // summed squared distance to the fitted vertices
  double max_residual = 0.0;   // largest distance to a fitted vertex
  std::size_t data_count = 0;

  std::size_t interior_knots() const { return knots.size() - 2 * static_cast<std::size_t>(degree + 1); }

  /// Index l with knots[l] <= u < knots[l+1], clamped to the last nonempty span.
  std::size_t span(double u) const {
    const std::size_t last = coeffs.size() - 1;
    if (u >= knots[last + 1]) return last;
    if (u <= knots[degree]) return static_cast<std::size_t>(degree);
    auto it = std::upper_bound(knots.begin() + degree, knots.begin() + static_cast<std::ptrdiff_t>(last) + 1, u);
    return static_cast<std::size_t>(it - knots.begin()) - 1;
  }

  /// The degree+1 nonzero basis values at u on span l.
  void basis(std::size_t l, double u, std::span<double> out) const {
    std::array<double, 8> left{}, right{};
    out[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[j] = u - knots[l + 1 - j];
      right[j] = knots[l + j] - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double denom = right[r + 1] + left[j - r];
        const double temp = denom == 0.0 ? 0.0 : out[r] / denom;
        out[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      out[j] = saved;
    }
  }

  Point2 eval(double u) const {
    if (degree == 0) return coeffs.front();
    // clamped ends interpolate their coefficient; skip the rounding in the basis sum
    if (u <= knots.front()) return coeffs.front();
    if (u >= knots.back()) return coeffs.back();
    const std::size_t l = span(u);
    std::array<double, 8> n{};
    basis(l, u, n);
    Point2 p{0.0, 0.0};
    for (int r = 0; r <= degree; ++r) {
      const Point2& c = coeffs[l - degree + r];
      p.x += n[r] * c.x;
      p.y += n[r] * c.y;
    }
    return p;
  }

  /// Derivative as a curve of one lower degree.
  BSplineCurve derivative() const {
    BSplineCurve d;
    d.degree = degree - 1;
    d.knots.assign(knots.begin() + 1, knots.end() - 1);
    for (std::size_t i = 0; i + 1 < coeffs.size(); ++i) {
      const double h = knots[i + degree + 1] - knots[i + 1];
      const double s = h > 0.0 ? degree / h : 0.0;
      d.coeffs.push_back({s * (coeffs[i + 1].x - coeffs[i].x), s * (coeffs[i + 1].y - coeffs[i].y)});
    }
    return d;
  }
};

namespace detail {

/// Schoenberg-Whitney check for the free coefficients 1..K-2 against the
/// interior data parameters.
inline bool well_posed(const std::vector<double>& knots, int degree, std::span<const double> u) {
  const std::size_t k = knots.size() - static_cast<std::size_t>(degree) - 1;
  std::size_t i = 1;
  for (std::size_t j = 1; j + 1 < k; ++j) {
    while (i + 1 < u.size() && !(u[i] > knots[j])) ++i;
    if (i + 1 >= u.size() || !(u[i] < knots[j + degree + 1])) return false;
    ++i;
  }
  return true;
}

inline std::vector<double> clamped_knots(int degree, const std::vector<double>& interior) {
  std::vector<double> t(static_cast<std::size_t>(degree + 1), 0.0);
  t.insert(t.end(), interior.begin(), interior.end());
  t.insert(t.end(), static_cast<std::size_t>(degree + 1), 1.0);
  return t;
}

/// Least-squares fit with both end coefficients pinned to the end points.
/// Rows are folded into a banded upper-triangular factor by Givens rotations.
inline BSplineCurve solve_fixed_ends(std::span<const Point2> pts, std::span<const double> u, int degree,
                                     std::vector<double> knots) {
  BSplineCurve c;
  c.degree = degree;
  c.knots = std::move(knots);
  const std::size_t k = c.knots.size() - static_cast<std::size_t>(degree) - 1;
  c.coeffs.assign(k, Point2{});
  c.coeffs.front() = pts.front();
  c.coeffs.back() = pts.back();
  c.data_count = pts.size();
  const std::size_t free = k >= 2 ? k - 2 : 0;
  const std::size_t w = static_cast<std::size_t>(degree) + 1;

  std::vector<double> r(free * w, 0.0);
  std::vector<Point2> rhs(free);
  std::vector<bool> used(free, false);
  std::array<double, 8> basis{};
  std::array<double, 8> h{};
  for (std::size_t i = 1; i + 1 < pts.size() && free > 0; ++i) {
    const std::size_t l = c.span(u[i]);
    c.basis(l, u[i], basis);
    const std::size_t first_col = l - static_cast<std::size_t>(degree);
    Point2 b = pts[i];
    std::size_t j0 = kNoVertex;
    h.fill(0.0);
    for (std::size_t q = 0; q < w; ++q) {
      const std::size_t col = first_col + q;
      if (col == 0 || col == k - 1) {
        b.x -= basis[q] * c.coeffs[col].x;
        b.y -= basis[q] * c.coeffs[col].y;
      } else {
        if (j0 == kNoVertex) j0 = col - 1;
        h[col - 1 - j0] = basis[q];
      }
    }
    if (j0 == kNoVertex) continue;
    for (std::size_t q = 0; q < w && j0 + q < free; ++q) {
      if (h[q] == 0.0) continue;
      const std::size_t row = j0 + q;
      double* rr = &r[row * w];
      if (!used[row]) {
        used[row] = true;
        for (std::size_t m = 0; m + q < w; ++m) rr[m] = h[q + m];
        rhs[row] = b;
        break;
      }
      const double piv = rr[0];
      const double rad = std::hypot(piv, h[q]);
      const double cs = piv / rad;
      const double sn = h[q] / rad;
      rr[0] = rad;
      h[q] = 0.0;
      for (std::size_t m = 1; m + q < w; ++m) {
        const double a = rr[m];
        const double bb = h[q + m];
        rr[m] = cs * a + sn * bb;
        h[q + m] = -sn * a + cs * bb;
      }
      const Point2 a = rhs[row];
      rhs[row] = {cs * a.x + sn * b.x, cs * a.y + sn * b.y};
      b = {-sn * a.x + cs * b.x, -sn * a.y + cs * b.y};
    }
  }
  for (std::size_t row = free; row-- > 0;) {
    const double* rr = &r[row * w];
    if (!used[row] || rr[0] == 0.0) throw Error("spline fit is rank deficient");
    Point2 x = rhs[row];
    for (std::size_t m = 1; m < w && row + m < free; ++m) {
      x.x -= rr[m] * c.coeffs[row + m + 1].x;
      x.y -= rr[m] * c.coeffs[row + m + 1].y;
    }
    c.coeffs[row + 1] = {x.x / rr[0], x.y / rr[0]};
  }

  c.residual = 0.0;
  c.max_residual = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d2 = squared_distance(c.eval(u[i]), pts[i]);
    c.residual += d2;
    c.max_residual = std::max(c.max_residual, std::sqrt(d2));
  }
  return c;
}

}  // namespace detail

/// Smoothing spline through a polyline, parameterized by chord length. The
/// end points are interpolated exactly. Residuals are measured in units of
/// `unit` (pass the histogram size to work in unit-square coordinates).
/// Starting with no interior knots, knots are added in the spans with the
/// largest residual until the summed squared residual is at most s. The
/// knot sequence does not depend on s, so larger s never uses more knots.
/// s = 0 interpolates every vertex.
inline BSplineCurve fit_smoothing_spline(std::span<const Point2> polyline, double s, double unit = 1.0) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw InputError("smoothing factor must be >= 0");
  if (!(unit > 0.0) || !std::isfinite(unit)) throw InputError("residual unit must be positive");
  std::vector<Point2> pts;
  for (const Point2& p : polyline)
    if (pts.empty() || !(pts.back() == p)) pts.push_back(p);
  if (pts.size() < 2) throw InputError("path too short: fewer than 2 distinct vertices");
  const std::size_t m = pts.size();
  const int degree = static_cast<int>(std::min<std::size_t>(3, m - 1));

  std::vector<double> u(m, 0.0);
  for (std::size_t i = 1; i < m; ++i) u[i] = u[i - 1] + std::sqrt(squared_distance(pts[i - 1], pts[i]));
  const double total = u.back();
  for (double& x : u) x /= total;
  u.back() = 1.0;

  // averaged parameters always satisfy the interpolation conditions
  auto interpolating = [&]() {
    std::vector<double> interior;
    for (std::size_t j = 1; j + static_cast<std::size_t>(degree) < m; ++j) {
      double acc = 0.0;
      for (int q = 0; q < degree; ++q) acc += u[j + static_cast<std::size_t>(q)];
      interior.push_back(acc / degree);
    }
    return detail::solve_fixed_ends(pts, u, degree, detail::clamped_knots(degree, interior));
  };
  if (s == 0.0) return interpolating();

  const std::size_t max_interior = m - static_cast<std::size_t>(degree) - 1;
  std::vector<double> interior;
  const double budget = s * unit * unit;
  for (;;) {
    BSplineCurve c = detail::solve_fixed_ends(pts, u, degree, detail::clamped_knots(degree, interior));
    if (c.residual <= budget) return c;
    if (interior.size() >= max_interior) return interpolating();

    // residual per knot span, and the data indices each span holds
    std::vector<double> bounds{0.0};
    bounds.insert(bounds.end(), interior.begin(), interior.end());
    bounds.push_back(1.0);
    const std::size_t spans = bounds.size() - 1;
    std::vector<double> err(spans, 0.0);
    std::vector<std::vector<std::size_t>> members(spans);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t sp = std::min<std::size_t>(
          spans - 1, static_cast<std::size_t>(std::upper_bound(bounds.begin(), bounds.end(), u[i]) - bounds.begin()) - 1);
      err[sp] += squared_distance(c.eval(u[i]), pts[i]);
      members[sp].push_back(i);
    }
    std::vector<std::size_t> order(spans);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return err[a] > err[b]; });

    const std::size_t batch = std::max<std::size_t>(1, interior.size() / 8);
    std::size_t added = 0;
    for (std::size_t sp : order) {
      if (added == batch || interior.size() >= max_interior) break;
      const auto& mem = members[sp];
      if (mem.size() < 2 || err[sp] == 0.0) continue;
      const std::size_t mid = mem.size() / 2;
      const double knot = 0.5 * (u[mem[mid - 1]] + u[mem[mid]]);
      if (!(knot > bounds[sp] && knot < bounds[sp + 1])) continue;
      std::vector<double> trial = interior;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), knot), knot);
      if (!detail::well_posed(detail::clamped_knots(degree, trial), degree, u)) continue;
      interior = std::move(trial);
      ++added;
    }
    if (added == 0) return interpolating();
  }
}

/// Fits the path polyline of an n x n histogram with residuals measured in
/// unit-square coordinates.
inline BSplineCurve fit_smoothing_spline(const TreePath& p, double s, std::size_t n) {
  return fit_smoothing_spline(p.polyline, s, static_cast<double>(n));
}

/// Equal-arc-length samples of a curve.
struct SplineSamples {
  std::vector<Point2> points;
  std::vector<double> cum_length;  // cum_length[0] = 0, cum_length.back() = total_length
  double total_length = 0.0;
  int branch_id = 0;

  std::size_t size() const { return points.size(); }
};

namespace detail {

inline constexpr std::array<double, 5> kGaussNodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                                      0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                        0.4786286704993665, 0.2369268850561891};

inline double speed(const BSplineCurve& d, double u) {
  const Point2 v = d.eval(u);
  return std::hypot(v.x, v.y);
}

inline double gauss_length(const BSplineCurve& d, double a, double b) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double acc = 0.0;
  for (std::size_t q = 0; q < 5; ++q) acc += kGaussWeights[q] * speed(d, mid + half * kGaussNodes[q]);
  return acc * half;
}

inline void refine_table(const BSplineCurve& d, double a, double b, double whole, int depth,
                         std::vector<double>& us, std::vector<double>& ss) {
  const double mid = 0.5 * (a + b);
  const double left = gauss_length(d, a, mid);
  const double right = gauss_length(d, mid, b);
  if (depth >= 40 || std::abs(left + right - whole) <= 1e-13 * std::max(1.0, left + right)) {
    us.push_back(mid);
    ss.push_back(ss.back() + left);
    us.push_back(b);
    ss.push_back(ss.back() + right);
    return;
  }
  refine_table(d, a, mid, left, depth + 1, us, ss);
  refine_table(d, mid, b, right, depth + 1, us, ss);
}

}  // namespace detail

/// `count` points at equal arc-length increments, located by inverting an
/// adaptive Gauss-Legendre length table with safeguarded Newton steps.
inline SplineSamples sample_arclength(const BSplineCurve& c, std::size_t count = 1'000'000, int branch_id = 0) {
  if (count < 2) throw InputError("sample count must be >= 2");
  if (c.coeffs.empty()) throw InputError("empty spline");
  SplineSamples out;
  out.branch_id = branch_id;
  if (c.degree == 0) throw InputError("degenerate spline: zero length");
  const BSplineCurve d = c.derivative();

  std::vector<double> us{0.0}, ss{0.0};
  for (std::size_t k = static_cast<std::size_t>(c.degree); k + 1 < c.knots.size(); ++k) {
    const double a = c.knots[k], b = c.knots[k + 1];
    if (!(b > a)) continue;
    // start from quarter spans so the table is never coarser than that
    for (int q = 0; q < 4; ++q) {
      const double x0 = a + (b - a) * q / 4.0;
      const double x1 = q == 3 ? b : a + (b - a) * (q + 1) / 4.0;
      detail::refine_table(d, x0, x1, detail::gauss_length(d, x0, x1), 0, us, ss);
    }
  }
  const double total = ss.back();
  if (!(total > 0.0)) throw InputError("degenerate spline: zero length");

  out.points.resize(count);
  out.cum_length.resize(count);
  out.total_length = total;
  std::size_t seg = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double target = k + 1 == count ? total : total * static_cast<double>(k) / static_cast<double>(count - 1);
    while (seg + 2 < us.size() && ss[seg + 1] < target) ++seg;
    double lo = us[seg], hi = us[seg + 1];
    const double base = ss[seg];
    const double span_len = ss[seg + 1] - ss[seg];
    double x = span_len > 0.0 ? lo + (hi - lo) * (target - base) / span_len : lo;
    if (k == 0) x = 0.0;
    else if (k + 1 == count) x = 1.0;
    else {
      for (int it = 0; it < 50; ++it) {
        const double g = base + detail::gauss_length(d, us[seg], x) - target;
        if (std::abs(g) <= 1e-14 * total) break;
        if (g > 0.0) hi = x; else lo = x;
        const double v = detail::speed(d, x);
        double next = v > 0.0 ? x - g / v : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x) break;
        x = next;
      }
    }
    out.points[k] = c.eval(x);
    out.cum_length[k] = target;
  }
  return out;
}

}  // namespace topofuse
