#pragma once

// Exact nearest-sample queries against a dense spline sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "topofuse/error.hpp"
#include "topofuse/grid.hpp"
#include "topofuse/spline.hpp"

namespace topofuse {

/// Static k-d tree over sample points with bucketed leaves. Queries return
/// exactly what a full scan would: the nearest sample, ties to the smaller
/// index.
class ProjectionIndex {
 public:
  struct Hit {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  ProjectionIndex() = default;

  explicit ProjectionIndex(std::span<const Point2> points, std::size_t bucket_size = 16) {
    if (points.empty()) throw InputError("projection index needs at least one sample");
    if (points.size() > std::numeric_limits<std::uint32_t>::max()) throw InputError("too many samples");
    bucket_ = std::max<std::size_t>(1, bucket_size);
    ids_.resize(points.size());
    std::iota(ids_.begin(), ids_.end(), std::uint32_t{0});
    source_.assign(points.begin(), points.end());
    nodes_.reserve(2 * points.size() / bucket_ + 2);
    build(0, static_cast<std::uint32_t>(points.size()));
    pts_.resize(ids_.size());
    for (std::size_t k = 0; k < ids_.size(); ++k) pts_[k] = source_[ids_[k]];
    source_.clear();
    source_.shrink_to_fit();
  }

  std::size_t size() const { return pts_.size(); }

  Hit nearest(Point2 q) const {
    Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
    std::array<std::uint32_t, 128> stack{};
    std::size_t top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[stack[--top]];
      if (box_distance(node, q) > best.squared_distance) continue;
      if (node.left < 0) {
        for (std::uint32_t k = node.begin; k < node.end; ++k) {
          const double d2 = squared_distance(pts_[k], q);
          if (d2 < best.squared_distance || (d2 == best.squared_distance && ids_[k] < best.index))
            best = {ids_[k], d2};
        }
        continue;
      }
      const auto l = static_cast<std::uint32_t>(node.left);
      const auto r = static_cast<std::uint32_t>(node.right);
      const bool left_first = box_distance(nodes_[l], q) <= box_distance(nodes_[r], q);
      stack[top++] = left_first ? r : l;
      stack[top++] = left_first ? l : r;
    }
    return best;
  }

 private:
  struct Node {
    double min_x, min_y, max_x, max_y;
    std::uint32_t begin, end;
    std::int32_t left = -1, right = -1;
  };

  static double box_distance(const Node& b, Point2 q) {
    const double dx = q.x < b.min_x ? b.min_x - q.x : (q.x > b.max_x ? q.x - b.max_x : 0.0);
    const double dy = q.y < b.min_y ? b.min_y - q.y : (q.y > b.max_y ? q.y - b.max_y : 0.0);
    return dx * dx + dy * dy;
  }

  std::int32_t build(std::uint32_t begin, std::uint32_t end) {
    Node node{};
    node.begin = begin;
    node.end = end;
    node.min_x = node.min_y = std::numeric_limits<double>::infinity();
    node.max_x = node.max_y = -std::numeric_limits<double>::infinity();
    for (std::uint32_t k = begin; k < end; ++k) {
      const Point2& p = source_[ids_[k]];
      node.min_x = std::min(node.min_x, p.x);
      node.max_x = std::max(node.max_x, p.x);
      node.min_y = std::min(node.min_y, p.y);
      node.max_y = std::max(node.max_y, p.y);
    }
    const auto self = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= bucket_) return self;
    const bool split_x = node.max_x - node.min_x >= node.max_y - node.min_y;
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(ids_.begin() + begin, ids_.begin() + mid, ids_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ka = split_x ? source_[a].x : source_[a].y;
                       const double kb = split_x ? source_[b].x : source_[b].y;
                       return ka < kb || (ka == kb && a < b);
                     });
    const std::int32_t l = build(begin, mid);
    const std::int32_t r = build(mid, end);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  std::size_t bucket_ = 16;
  std::vector<Node> nodes_;
  std::vector<Point2> pts_;  // samples in leaf order
  std::vector<std::uint32_t> ids_;
  std::vector<Point2> source_;
};

inline ProjectionIndex build_projection_index(const SplineSamples& s, std::size_t bucket_size = 16) {
  return ProjectionIndex(s.points, bucket_size);
}

struct Projection {
  std::size_t index = 0;
  double ell = 0.0;       // normalized arc length in [0, 1]
  double distance = 0.0;
};

inline Projection project_point(const ProjectionIndex& idx, const SplineSamples& s, Point2 q) {
  const auto hit = idx.nearest(q);
  const double ell = s.total_length > 0.0 ? std::min(1.0, s.cum_length[hit.index] / s.total_length) : 0.0;
  return {hit.index, ell, std::sqrt(hit.squared_distance)};
}

}  // namespace topofuse
