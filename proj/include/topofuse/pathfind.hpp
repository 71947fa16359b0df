#pragma once

// Weighted maximum graph, its minimum spanning forest, and path selection
// on that forest (diameter, explicit endpoints, branches, density trimming).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "topofuse/error.hpp"
#include "topofuse/grid.hpp"
#include "topofuse/topology.hpp"

namespace topofuse {

struct WeightedEdge {
  std::size_t u = 0;  // saddle node
  std::size_t v = 0;  // maximum node
  double weight = 0.0;
  std::vector<std::size_t> polyline;  // grid vertices from u to v
  bool collapsed = false;
};

/// Node ids: maxima first (in extremum graph order), then saddles.
struct WeightedGraph {
  std::size_t n = 0;
  std::vector<CriticalPoint> nodes;
  std::vector<double> density;  // D at each node
  std::vector<WeightedEdge> edges;

  std::size_t node_count() const { return nodes.size(); }
  double total_weight() const {
    double w = 0.0;
    for (const auto& e : edges) w += e.weight;
    return w;
  }
};

/// Edge weight |D(maximum) - D(saddle)|. Parallel edges between the same
/// saddle and maximum keep the lighter one. With a noise floor, nodes whose
/// density is not above it are left out together with their edges; a floor
/// of 0 drops the tie-broken maxima and saddles of empty histogram cells.
inline WeightedGraph build_weighted_graph(const ExtremumGraph& eg, const DensityField& d,
                                          std::optional<double> noise_floor = std::nullopt) {
  if (eg.n != d.n) throw InputError("extremum graph and density field have different grid sizes");
  auto keep = [&](const CriticalPoint& cp) { return !noise_floor || d[cp.vertex] > *noise_floor; };
  WeightedGraph g;
  g.n = eg.n;
  std::vector<std::size_t> max_id(eg.maxima.size(), kNoVertex), saddle_id(eg.saddles.size(), kNoVertex);
  for (std::size_t k = 0; k < eg.maxima.size(); ++k)
    if (keep(eg.maxima[k])) {
      max_id[k] = g.nodes.size();
      g.nodes.push_back(eg.maxima[k]);
    }
  for (std::size_t k = 0; k < eg.saddles.size(); ++k)
    if (keep(eg.saddles[k])) {
      saddle_id[k] = g.nodes.size();
      g.nodes.push_back(eg.saddles[k]);
    }
  for (const auto& cp : g.nodes) g.density.push_back(d[cp.vertex]);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  for (const SeparatrixEdge& se : eg.edges) {
    const std::size_t u = saddle_id[se.saddle];
    const std::size_t v = max_id[se.maximum];
    if (u == kNoVertex || v == kNoVertex) continue;
    WeightedEdge e{u, v, std::abs(g.density[v] - g.density[u]), se.polyline, se.collapsed};
    auto [it, fresh] = seen.try_emplace({u, v}, g.edges.size());
    if (fresh) {
      g.edges.push_back(std::move(e));
    } else if (e.weight < g.edges[it->second].weight) {
      g.edges[it->second] = std::move(e);
    }
  }
  return g;
}

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t count) : parent(count) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

/// (neighbor, edge index) lists sorted by neighbor id.
inline std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency(const WeightedGraph& g) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(g.node_count());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    adj[g.edges[e].u].push_back({g.edges[e].v, e});
    adj[g.edges[e].v].push_back({g.edges[e].u, e});
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

}  // namespace detail

/// Kruskal per connected component. Ties order by (weight, smaller
/// endpoint, larger endpoint). Kept edges stay in input order.
inline WeightedGraph minimum_spanning_tree(const WeightedGraph& g) {
  std::vector<std::size_t> order(g.edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t e) {
    const auto& x = g.edges[e];
    return std::make_tuple(x.weight, std::min(x.u, x.v), std::max(x.u, x.v), e);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  detail::DisjointSets sets(g.node_count());
  std::vector<bool> keep(g.edges.size(), false);
  for (std::size_t e : order) keep[e] = sets.unite(g.edges[e].u, g.edges[e].v);
  WeightedGraph t;
  t.n = g.n;
  t.nodes = g.nodes;
  t.density = g.density;
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    if (keep[e]) t.edges.push_back(g.edges[e]);
  return t;
}

struct PathNode {
  std::size_t id = 0;
  GridPoint at;
  double density = 0.0;
  CriticalKind kind = CriticalKind::maximum;
};

/// A simple path in the forest with its concatenated separatrix geometry.
struct TreePath {
  std::vector<PathNode> nodes;
  std::vector<std::vector<GridPoint>> segments;  // segments[k] runs from nodes[k] to nodes[k+1]
  std::vector<Point2> polyline;                  // segments joined, with revisited loops cut out
  int branch_id = 0;
  double weight = 0.0;

  bool empty() const { return nodes.empty(); }
};

enum class PathMetric { weight, hops };

namespace detail {

inline std::vector<Point2> join_segments(const std::vector<std::vector<GridPoint>>& segments) {
  std::vector<GridPoint> pts;
  std::unordered_map<std::int64_t, std::size_t> where;
  auto key = [](GridPoint p) { return (static_cast<std::int64_t>(p.j) << 32) | static_cast<std::uint32_t>(p.i); };
  auto append = [&](GridPoint p) {
    if (!pts.empty() && pts.back() == p) return;
    if (auto it = where.find(key(p)); it != where.end()) {
      for (std::size_t k = it->second + 1; k < pts.size(); ++k) where.erase(key(pts[k]));
      pts.resize(it->second + 1);
      return;
    }
    where[key(p)] = pts.size();
    pts.push_back(p);
  };
  for (const auto& seg : segments)
    for (GridPoint p : seg) append(p);
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (GridPoint p : pts) out.push_back({static_cast<double>(p.i), static_cast<double>(p.j)});
  return out;
}

/// Builds a TreePath along consecutive node ids of a forest.
inline TreePath make_path(const WeightedGraph& t, const std::vector<std::size_t>& ids, int branch_id) {
  TreePath p;
  p.branch_id = branch_id;
  auto point = [&](std::size_t v) {
    return GridPoint{static_cast<std::int32_t>(v % t.n), static_cast<std::int32_t>(v / t.n)};
  };
  for (std::size_t id : ids) {
    const CriticalPoint& cp = t.nodes[id];
    p.nodes.push_back({id, point(cp.vertex), t.density[id], cp.kind});
  }
  const auto adj = adjacency(t);
  for (std::size_t k = 0; k + 1 < ids.size(); ++k) {
    const auto& nb = adj[ids[k]];
    auto it = std::find_if(nb.begin(), nb.end(), [&](const auto& x) { return x.first == ids[k + 1]; });
    if (it == nb.end()) throw InputError("path nodes are not adjacent in the tree");
    const WeightedEdge& e = t.edges[it->second];
    p.weight += e.weight;
    std::vector<GridPoint> seg;
    for (std::size_t v : e.polyline) seg.push_back(point(v));
    if (e.u != ids[k]) std::reverse(seg.begin(), seg.end());
    p.segments.push_back(std::move(seg));
  }
  if (ids.size() > 1) p.polyline = join_segments(p.segments);
  return p;
}

/// Distances and parents from `src` inside its tree.
inline void sweep(const WeightedGraph& t, const std::vector<std::vector<std::pair<std::size_t, std::size_t>>>& adj,
                  const std::vector<bool>& allowed, std::size_t src, PathMetric metric, std::vector<double>& dist,
                  std::vector<std::size_t>& parent) {
  dist.assign(t.node_count(), -1.0);
  parent.assign(t.node_count(), kNoVertex);
  std::vector<std::size_t> stack{src};
  dist[src] = 0.0;
  while (!stack.empty()) {
    const std::size_t x = stack.back();
    stack.pop_back();
    for (auto [y, e] : adj[x]) {
      if (!allowed[y] || dist[y] >= 0.0) continue;
      dist[y] = dist[x] + (metric == PathMetric::weight ? t.edges[e].weight : 1.0);
      parent[y] = x;
      stack.push_back(y);
    }
  }
}

inline std::size_t farthest(const std::vector<double>& dist) {
  std::size_t best = kNoVertex;
  for (std::size_t x = 0; x < dist.size(); ++x)
    if (dist[x] >= 0.0 && (best == kNoVertex || dist[x] > dist[best])) best = x;
  return best;
}

}  // namespace detail

/// Longest simple path of the forest component with the largest total edge
/// weight (ties: component holding the smaller node id), found by a double
/// sweep. Ties between equally far nodes go to the smaller node id. With
/// `exclude_hanging_saddles`, degree-one saddles cannot be endpoints.
inline TreePath tree_diameter_path(const WeightedGraph& t, PathMetric metric = PathMetric::weight,
                                   bool exclude_hanging_saddles = false) {
  if (t.node_count() == 0) throw InputError("empty forest");
  const auto adj = detail::adjacency(t);
  std::vector<std::size_t> comp(t.node_count(), kNoVertex);
  std::vector<double> comp_weight;
  for (std::size_t s = 0; s < t.node_count(); ++s) {
    if (comp[s] != kNoVertex) continue;
    const std::size_t c = comp_weight.size();
    comp_weight.push_back(0.0);
    std::vector<std::size_t> stack{s};
    comp[s] = c;
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      for (auto [y, e] : adj[x]) {
        if (comp[y] != kNoVertex) continue;
        comp[y] = c;
        comp_weight[c] += t.edges[e].weight;
        stack.push_back(y);
      }
    }
  }
  const std::size_t best_comp =
      static_cast<std::size_t>(std::max_element(comp_weight.begin(), comp_weight.end()) - comp_weight.begin());

  std::vector<bool> allowed(t.node_count());
  for (std::size_t x = 0; x < t.node_count(); ++x) allowed[x] = comp[x] == best_comp;
  if (exclude_hanging_saddles) {
    std::vector<bool> pruned = allowed;
    bool any = false;
    for (std::size_t x = 0; x < t.node_count(); ++x) {
      if (!allowed[x]) continue;
      if (t.nodes[x].kind == CriticalKind::saddle && adj[x].size() == 1)
        pruned[x] = false;
      else
        any = true;
    }
    if (any) allowed = std::move(pruned);
  }
  std::size_t start = 0;
  while (!allowed[start]) ++start;

  std::vector<double> dist;
  std::vector<std::size_t> parent;
  detail::sweep(t, adj, allowed, start, metric, dist, parent);
  const std::size_t a = detail::farthest(dist);
  detail::sweep(t, adj, allowed, a, metric, dist, parent);
  const std::size_t b = detail::farthest(dist);
  std::vector<std::size_t> ids;
  for (std::size_t x = b; x != kNoVertex; x = parent[x]) ids.push_back(x);
  std::reverse(ids.begin(), ids.end());
  return detail::make_path(t, ids, 0);
}

/// The unique forest path from a to b.
inline TreePath subpath_between(const WeightedGraph& t, std::size_t a, std::size_t b, int branch_id = 0) {
  if (a >= t.node_count() || b >= t.node_count()) throw InputError("unknown node id");
  const auto adj = detail::adjacency(t);
  std::vector<bool> allowed(t.node_count(), true);
  std::vector<double> dist;
  std::vector<std::size_t> parent;
  detail::sweep(t, adj, allowed, a, PathMetric::hops, dist, parent);
  if (dist[b] < 0.0)
    throw InputError("disconnected endpoints: nodes " + std::to_string(a) + " and " + std::to_string(b) +
                     " lie in different trees");
  std::vector<std::size_t> ids;
  for (std::size_t x = b; x != kNoVertex; x = parent[x]) ids.push_back(x);
  std::reverse(ids.begin(), ids.end());
  return detail::make_path(t, ids, branch_id);
}

/// Drops the leading and trailing runs of nodes whose density is below tau.
inline TreePath trim_low_density(const TreePath& p, const DensityField& d, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw InputError("tau must lie in [0, 1]");
  if (p.empty()) throw InputError("empty path");
  auto dens = [&](const PathNode& x) { return d[static_cast<std::size_t>(x.at.j) * d.n + static_cast<std::size_t>(x.at.i)]; };
  std::size_t first = 0;
  while (first < p.nodes.size() && dens(p.nodes[first]) < tau) ++first;
  if (first == p.nodes.size()) throw InputError("fully trimmed: every path node has density below tau");
  std::size_t last = p.nodes.size() - 1;
  while (dens(p.nodes[last]) < tau) --last;
  if (first == 0 && last + 1 == p.nodes.size()) return p;

  TreePath out;
  out.branch_id = p.branch_id;
  out.nodes.assign(p.nodes.begin() + first, p.nodes.begin() + last + 1);
  out.segments.assign(p.segments.begin() + first, p.segments.begin() + last);
  if (out.nodes.size() > 1) out.polyline = detail::join_segments(out.segments);
  // consecutive nodes alternate saddle/maximum, so edge weights are density gaps
  for (std::size_t k = 0; k + 1 < out.nodes.size(); ++k)
    out.weight += std::abs(out.nodes[k].density - out.nodes[k + 1].density);
  return out;
}

/// One path per (a, b) selection; branch ids follow selection order.
inline std::vector<TreePath> select_branches(const WeightedGraph& t,
                                             const std::vector<std::pair<std::size_t, std::size_t>>& selections) {
  if (selections.empty()) throw InputError("no branch selections");
  std::vector<TreePath> out;
  for (std::size_t k = 0; k < selections.size(); ++k)
    out.push_back(subpath_between(t, selections[k].first, selections[k].second, static_cast<int>(k)));
  return out;
}

}  // namespace topofuse
