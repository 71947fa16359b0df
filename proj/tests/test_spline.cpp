#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "topofuse/spline.hpp"

using namespace topofuse;

namespace {

std::vector<Point2> arc(std::size_t m, double radius) {
  std::vector<Point2> out;
  for (std::size_t k = 0; k < m; ++k) {
    const double t = std::numbers::pi * static_cast<double>(k) / static_cast<double>(m - 1);
    out.push_back({radius * std::cos(t), radius * std::sin(t)});
  }
  return out;
}

double dense_length(const BSplineCurve& c, std::size_t steps) {
  double acc = 0.0;
  Point2 prev = c.eval(0.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    const Point2 p = c.eval(static_cast<double>(k) / static_cast<double>(steps));
    acc += std::sqrt(squared_distance(prev, p));
    prev = p;
  }
  return acc;
}

}  // namespace

TEST(Spline, ZeroSmoothingInterpolates) {
  std::mt19937_64 rng(300);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = oracle::random_polyline(rng, 5 + trial * 3, 50.0);
    const BSplineCurve c = fit_smoothing_spline(pts, 0.0);
    EXPECT_LT(c.max_residual, 1e-8);
    EXPECT_EQ(c.knots.size(), c.coeffs.size() + c.degree + 1);
  }
}

TEST(Spline, EndpointsArePinned) {
  std::mt19937_64 rng(301);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = oracle::random_polyline(rng, 30, 80.0);
    for (double s : {0.0, 1e-3, 0.1, 10.0}) {
      const BSplineCurve c = fit_smoothing_spline(pts, s, 100.0);
      EXPECT_EQ(c.eval(0.0), pts.front());
      EXPECT_EQ(c.eval(1.0), pts.back());
    }
  }
}

TEST(Spline, ResidualWithinBudgetAndKnotsMonotoneInS) {
  std::mt19937_64 rng(302);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = oracle::random_polyline(rng, 60, 100.0);
    std::size_t prev_knots = std::numeric_limits<std::size_t>::max();
    for (double s : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
      const BSplineCurve c = fit_smoothing_spline(pts, s, 100.0);
      EXPECT_TRUE(c.residual <= s * 100.0 * 100.0 || c.max_residual < 1e-8);
      EXPECT_LE(c.interior_knots(), prev_knots);
      prev_knots = c.interior_knots();
    }
  }
}

TEST(Spline, LargeSmoothingGivesSingleCubic) {
  const auto pts = arc(40, 10.0);
  const BSplineCurve c = fit_smoothing_spline(pts, 1e9);
  EXPECT_EQ(c.interior_knots(), 0u);
  EXPECT_EQ(c.degree, 3);
}

TEST(Spline, ShortPathsLowerTheDegree) {
  EXPECT_EQ(fit_smoothing_spline(std::vector<Point2>{{0, 0}, {1, 1}}, 0.0).degree, 1);
  EXPECT_EQ(fit_smoothing_spline(std::vector<Point2>{{0, 0}, {1, 1}, {2, 0}}, 0.0).degree, 2);
  EXPECT_THROW(fit_smoothing_spline(std::vector<Point2>{{1, 1}, {1, 1}}, 0.0), InputError);
  EXPECT_THROW(fit_smoothing_spline(std::vector<Point2>{{0, 0}, {1, 1}}, -1.0), InputError);
}

TEST(Spline, KnotsSatisfySchoenbergWhitney) {
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pts = oracle::random_polyline(rng, 80, 100.0);
    const BSplineCurve c = fit_smoothing_spline(pts, 1e-3, 100.0);
    std::vector<double> u{0.0};
    for (std::size_t i = 1; i < pts.size(); ++i) u.push_back(u.back() + std::sqrt(squared_distance(pts[i - 1], pts[i])));
    for (double& x : u) x /= u.back();
    EXPECT_TRUE(detail::well_posed(c.knots, c.degree, u));
    for (std::size_t k = 1; k < c.knots.size(); ++k) EXPECT_LE(c.knots[k - 1], c.knots[k]);
  }
}

TEST(Spline, ArcLengthSamplesAreEquallySpaced) {
  const auto pts = arc(50, 20.0);
  const BSplineCurve c = fit_smoothing_spline(pts, 1e-6);
  const SplineSamples s = sample_arclength(c, 2001);
  ASSERT_EQ(s.size(), 2001u);
  EXPECT_EQ(s.cum_length.front(), 0.0);
  EXPECT_EQ(s.cum_length.back(), s.total_length);
  EXPECT_NEAR(s.total_length, std::numbers::pi * 20.0, 1e-3);
  EXPECT_NEAR(s.total_length, dense_length(c, 200000), 1e-6);
  const double step = s.total_length / 2000.0;
  for (std::size_t k = 1; k < s.size(); ++k) {
    const double chord = std::sqrt(squared_distance(s.points[k - 1], s.points[k]));
    EXPECT_LE(chord, step * (1 + 1e-9));
    EXPECT_GE(chord, step * 0.999);
  }
  EXPECT_EQ(s.points.front(), pts.front());
  EXPECT_EQ(s.points.back(), pts.back());
}

TEST(Spline, SampleCountChecks) {
  const BSplineCurve c = fit_smoothing_spline(arc(10, 1.0), 0.0);
  EXPECT_THROW(sample_arclength(c, 1), InputError);
  EXPECT_EQ(sample_arclength(c, 2).size(), 2u);
}
