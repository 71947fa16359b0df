#pragma once

// Reference implementations for the tests. Each one is written from the
// definitions, deliberately slow, and shares no code with the library
// beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "topofuse/grid.hpp"
#include "topofuse/pathfind.hpp"
#include "topofuse/volume.hpp"

namespace oracle {

using topofuse::GridField;
using topofuse::Point2;

/// Neighbors in the triangulated grid, spelled out from the diagonal rule:
/// quads split from lower-left to upper-right, so (i, j) touches
/// (i+1, j+1) and (i-1, j-1) but not the other diagonal.
inline std::vector<std::size_t> neighbors(std::size_t n, std::size_t v) {
  const long i = static_cast<long>(v % n), j = static_cast<long>(v / n), sn = static_cast<long>(n);
  std::vector<std::size_t> out;
  const long d[6][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}, {-1, -1}};
  for (const auto& o : d) {
    const long a = i + o[0], b = j + o[1];
    if (a >= 0 && b >= 0 && a < sn && b < sn) out.push_back(static_cast<std::size_t>(b * sn + a));
  }
  return out;
}

/// True iff a comes after b in the descending sweep's strict order.
inline bool above(const GridField& f, std::size_t a, std::size_t b) {
  return std::make_pair(f.values[a], a) > std::make_pair(f.values[b], b);
}

struct Pair {
  std::size_t maximum;
  std::size_t saddle;
  double persistence;
  friend bool operator<(const Pair& x, const Pair& y) {
    return std::tie(x.maximum, x.saddle) < std::tie(y.maximum, y.saddle);
  }
};

/// Superlevel persistence by repeated flood fill: before inserting vertex v,
/// label the components of the already-inserted set, see which of them
/// touch v, and let all but the one with the highest peak die at v.
inline std::vector<Pair> persistence_pairs(const GridField& f) {
  const std::size_t count = f.values.size();
  std::vector<std::size_t> order(count);
  for (std::size_t v = 0; v < count; ++v) order[v] = v;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return above(f, a, b); });
  std::vector<bool> in(count, false);
  std::vector<Pair> out;
  for (std::size_t v : order) {
    // flood-fill labels of the current superlevel set
    std::vector<long> label(count, -1);
    std::vector<std::size_t> peak;
    for (std::size_t s = 0; s < count; ++s) {
      if (!in[s] || label[s] >= 0) continue;
      const long id = static_cast<long>(peak.size());
      std::size_t best = s;
      std::vector<std::size_t> stack{s};
      label[s] = id;
      while (!stack.empty()) {
        const std::size_t x = stack.back();
        stack.pop_back();
        if (above(f, x, best)) best = x;
        for (std::size_t y : neighbors(f.n, x))
          if (in[y] && label[y] < 0) {
            label[y] = id;
            stack.push_back(y);
          }
      }
      peak.push_back(best);
    }
    std::set<long> touching;
    for (std::size_t y : neighbors(f.n, v))
      if (in[y]) touching.insert(label[y]);
    if (touching.size() > 1) {
      std::size_t winner = peak[static_cast<std::size_t>(*touching.begin())];
      for (long c : touching)
        if (above(f, peak[static_cast<std::size_t>(c)], winner)) winner = peak[static_cast<std::size_t>(c)];
      for (long c : touching) {
        const std::size_t m = peak[static_cast<std::size_t>(c)];
        if (m != winner) out.push_back({m, v, f.values[m] - f.values[v]});
      }
    }
    in[v] = true;
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Edge {
  std::size_t u, v;
  double w;
};

/// Number of connected components of an undirected graph.
inline std::size_t components(std::size_t nodes, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::size_t>> adj(nodes);
  for (const auto& e : edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  std::vector<bool> seen(nodes, false);
  std::size_t c = 0;
  for (std::size_t s = 0; s < nodes; ++s) {
    if (seen[s]) continue;
    ++c;
    std::vector<std::size_t> stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      for (std::size_t y : adj[x])
        if (!seen[y]) {
          seen[y] = true;
          stack.push_back(y);
        }
    }
  }
  return c;
}

/// Minimum total weight over every edge subset that spans the same
/// components with nodes - components edges (all spanning forests).
inline double exhaustive_msf_weight(std::size_t nodes, const std::vector<Edge>& edges) {
  const std::size_t target = nodes - components(nodes, edges);
  const std::size_t m = edges.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Edge> pick;
  std::function<void(std::size_t, double)> rec = [&](std::size_t k, double w) {
    if (pick.size() == target) {
      if (components(nodes, pick) == nodes - target) best = std::min(best, w);
      return;
    }
    if (k == m || m - k < target - pick.size()) return;
    pick.push_back(edges[k]);
    rec(k + 1, w + edges[k].w);
    pick.pop_back();
    rec(k + 1, w);
  };
  rec(0, 0.0);
  return best;
}

/// Largest path weight over all node pairs of a tree, each path found by
/// its own search.
inline double all_pairs_diameter(std::size_t nodes, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(nodes);
  for (const auto& e : edges) {
    adj[e.u].push_back({e.v, e.w});
    adj[e.v].push_back({e.u, e.w});
  }
  double best = 0.0;
  for (std::size_t a = 0; a < nodes; ++a)
    for (std::size_t b = a + 1; b < nodes; ++b) {
      std::function<bool(std::size_t, std::size_t, double&)> walk = [&](std::size_t x, std::size_t from, double& acc) {
        if (x == b) return true;
        for (auto [y, w] : adj[x]) {
          if (y == from) continue;
          double sub = 0.0;
          if (walk(y, x, sub)) {
            acc = w + sub;
            return true;
          }
        }
        return false;
      };
      double w = 0.0;
      if (walk(a, nodes, w)) best = std::max(best, w);
    }
  return best;
}

/// Nearest point by full scan; ties to the smaller index.
inline std::size_t nearest_by_scan(const std::vector<Point2>& pts, Point2 q) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double dx = pts[k].x - q.x, dy = pts[k].y - q.y;
    const double d = dx * dx + dy * dy;
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

/// Bin of a value by the half-open rule with a closed top bin.
inline std::size_t bin_of(double v, double lo, double hi, std::size_t n) {
  if (v <= lo) return 0;
  if (v >= hi) return n - 1;
  const auto b = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(n)));
  return std::min(b, n - 1);
}

/// Peaks of a 1D histogram by definition: a bin run that is a strict local
/// plateau maximum, with prominence measured against the higher of the
/// two minima separating it from a taller bin on either side.
inline std::size_t count_peaks_quadratic(const std::vector<double>& w, double min_persistence) {
  const std::size_t n = w.size();
  const double mx = *std::max_element(w.begin(), w.end());
  if (!(mx > 0.0)) return 0;
  auto higher = [&](std::size_t a, std::size_t b) { return w[a] > w[b] || (w[a] == w[b] && a > b); };
  std::size_t count = 0;
  for (std::size_t p = 0; p < n; ++p) {
    // p must beat both neighbors under the tie-broken order
    if (p > 0 && higher(p - 1, p)) continue;
    if (p + 1 < n && higher(p + 1, p)) continue;
    // walk each way until a higher bin, tracking the lowest value crossed
    double left_floor = -1.0, right_floor = -1.0;
    double low = w[p];
    for (std::size_t q = p; q-- > 0;) {
      low = std::min(low, w[q]);
      if (higher(q, p)) {
        left_floor = low;
        break;
      }
    }
    low = w[p];
    for (std::size_t q = p + 1; q < n; ++q) {
      low = std::min(low, w[q]);
      if (higher(q, p)) {
        right_floor = low;
        break;
      }
    }
    if (left_floor < 0.0 && right_floor < 0.0) {
      ++count;  // global peak
      continue;
    }
    const double base = std::max(left_floor, right_floor);
    const double prom = w[p] - base;
    if (prom > 0.0 && prom > min_persistence * mx) ++count;
  }
  return count;
}

// ---------------------------------------------------------------- generators

/// Random field with many exact ties, drawn from a small value alphabet.
inline GridField random_field(std::mt19937_64& rng, std::size_t n, int levels) {
  std::uniform_int_distribution<int> pick(0, levels - 1);
  std::vector<double> v(n * n);
  for (double& x : v) x = static_cast<double>(pick(rng)) / levels;
  return GridField(n, std::move(v));
}

/// Random field of smooth bumps plus noise.
inline GridField random_smooth_field(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int bumps = 1 + static_cast<int>(u(rng) * 6);
  std::vector<std::tuple<double, double, double, double>> b;
  for (int k = 0; k < bumps; ++k)
    b.emplace_back(u(rng) * n, u(rng) * n, 1.0 + u(rng) * n / 4.0, 0.2 + u(rng));
  std::vector<double> v(n * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.01 * u(rng);
      for (auto [x, y, s, w] : b) acc += w * std::exp(-((i - x) * (i - x) + (j - y) * (j - y)) / (2 * s * s));
      v[j * n + i] = acc;
    }
  return GridField(n, std::move(v));
}

/// A weighted graph in the library's shape, with node i at grid vertex i.
inline topofuse::WeightedGraph to_weighted_graph(std::size_t nodes, const std::vector<Edge>& edges) {
  topofuse::WeightedGraph g;
  g.n = 64;
  for (std::size_t k = 0; k < nodes; ++k) {
    g.nodes.push_back({k, k % 2 ? topofuse::CriticalKind::saddle : topofuse::CriticalKind::maximum, 0.0, 0});
    g.density.push_back(0.0);
  }
  for (const auto& e : edges) g.edges.push_back({e.u, e.v, e.w, {e.u, e.v}, false});
  return g;
}

inline std::vector<Edge> random_graph(std::mt19937_64& rng, std::size_t nodes, std::size_t edge_count, bool ties) {
  std::uniform_int_distribution<std::size_t> node(0, nodes - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  std::set<std::pair<std::size_t, std::size_t>> used;
  for (std::size_t tries = 0; edges.size() < edge_count && tries < 1000; ++tries) {
    std::size_t a = node(rng), b = node(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!used.insert({a, b}).second) continue;
    edges.push_back({a, b, ties ? std::floor(u(rng) * 4.0) / 4.0 : u(rng)});
  }
  return edges;
}

inline std::vector<Edge> random_tree(std::mt19937_64& rng, std::size_t nodes) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t k = 1; k < nodes; ++k) {
    std::uniform_int_distribution<std::size_t> parent(0, k - 1);
    edges.push_back({parent(rng), k, 0.01 + u(rng)});
  }
  return edges;
}

/// Random polyline in grid coordinates, a noisy walk.
inline std::vector<Point2> random_polyline(std::mt19937_64& rng, std::size_t points, double extent) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point2> out;
  Point2 p{extent / 2 + u(rng) * extent / 4, extent / 2 + u(rng) * extent / 4};
  double heading = u(rng) * 3.14159;
  for (std::size_t k = 0; k < points; ++k) {
    out.push_back(p);
    heading += 0.6 * u(rng);
    p.x += std::cos(heading) * extent / static_cast<double>(points) + 0.2 * u(rng);
    p.y += std::sin(heading) * extent / static_cast<double>(points) + 0.2 * u(rng);
  }
  return out;
}

inline topofuse::Volume random_volume(std::mt19937_64& rng, topofuse::Dims dims, bool integers) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dims.count());
  for (double& x : v) x = integers ? std::round(100.0 * g(rng)) : g(rng);
  return topofuse::make_volume(dims, std::move(v), "random");
}

}  // namespace oracle
