#pragma once

// Discrete topology of a scalar field on the triangulated n x n grid:
// critical points, maximum/saddle persistence pairs of the superlevel-set
// merge tree, simplification by flattening, and the maximum graph.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "topofuse/error.hpp"
#include "topofuse/grid.hpp"

namespace topofuse {

enum class CriticalKind { minimum, saddle, maximum };

inline const char* to_string(CriticalKind k) {
  switch (k) {
    case CriticalKind::minimum: return "minimum";
    case CriticalKind::saddle: return "saddle";
    case CriticalKind::maximum: return "maximum";
  }
  return "?";
}

/// A critical vertex. Multi-saddles are split into simple saddles that share
/// the vertex and differ by `sub`.
struct CriticalPoint {
  std::size_t vertex = 0;
  CriticalKind kind = CriticalKind::maximum;
  double value = 0.0;
  std::uint32_t sub = 0;
  friend bool operator==(const CriticalPoint&, const CriticalPoint&) = default;
};

struct PersistencePair {
  CriticalPoint creator;    // maximum
  CriticalPoint destroyer;  // saddle
  double persistence = 0.0;
};

/// Components of the upper (or lower) link of one vertex.
struct LinkComponents {
  int count = 0;
  /// Component id per link slot, -1 where the slot is absent or not selected.
  /// Components are numbered by their smallest member vertex index.
  std::array<int, 6> label{-1, -1, -1, -1, -1, -1};
};

namespace detail {

inline LinkComponents link_components(const std::array<std::size_t, 6>& link, const std::array<bool, 6>& in) {
  LinkComponents out;
  int members = 0;
  for (bool b : in) members += b ? 1 : 0;
  if (members == 0) return out;
  if (members == 6) {
    out.count = 1;
    out.label.fill(0);
    return out;
  }
  std::array<std::size_t, 6> smallest{};
  for (std::size_t k = 0; k < 6; ++k) {
    if (!in[k] || in[(k + 5) % 6]) continue;
    const int c = out.count++;
    smallest[c] = kNoVertex;
    for (std::size_t s = k; in[s]; s = (s + 1) % 6) {
      out.label[s] = c;
      smallest[c] = std::min(smallest[c], link[s]);
    }
  }
  // renumber by smallest member vertex
  std::array<int, 6> order{};
  std::iota(order.begin(), order.begin() + out.count, 0);
  std::sort(order.begin(), order.begin() + out.count, [&](int a, int b) { return smallest[a] < smallest[b]; });
  std::array<int, 6> rank{};
  for (int r = 0; r < out.count; ++r) rank[order[r]] = r;
  for (auto& l : out.label)
    if (l >= 0) l = rank[l];
  return out;
}

}  // namespace detail

/// Upper link (vertices above v) split into components.
inline LinkComponents upper_link(const GridField& f, std::size_t v) {
  const auto link = link_of(f.n, v);
  std::array<bool, 6> in{};
  for (std::size_t k = 0; k < 6; ++k) in[k] = link[k] != kNoVertex && f.higher(link[k], v);
  return detail::link_components(link, in);
}

/// Lower link (vertices below v) split into components.
inline LinkComponents lower_link(const GridField& f, std::size_t v) {
  const auto link = link_of(f.n, v);
  std::array<bool, 6> in{};
  for (std::size_t k = 0; k < 6; ++k) in[k] = link[k] != kNoVertex && f.higher(v, link[k]);
  return detail::link_components(link, in);
}

inline bool is_maximum(const GridField& f, std::size_t v) {
  for (std::size_t u : link_of(f.n, v))
    if (u != kNoVertex && f.higher(u, v)) return false;
  return true;
}

/// Critical points in vertex order. A vertex is a maximum when its upper
/// link is empty, a minimum when its lower link is empty, and a saddle of
/// multiplicity c-1 when its upper link has c >= 2 components. In the
/// interior this is the classic lower-link count.
inline std::vector<CriticalPoint> classify_critical_points(const GridField& f) {
  if (f.n < 3) throw InputError("critical point classification needs n >= 3");
  std::vector<CriticalPoint> out;
  for (std::size_t v = 0; v < f.size(); ++v) {
    const LinkComponents up = upper_link(f, v);
    if (up.count == 0) {
      out.push_back({v, CriticalKind::maximum, f[v], 0});
    } else if (lower_link(f, v).count == 0) {
      out.push_back({v, CriticalKind::minimum, f[v], 0});
    } else if (up.count >= 2) {
      for (int s = 0; s + 1 < up.count; ++s)
        out.push_back({v, CriticalKind::saddle, f[v], static_cast<std::uint32_t>(s)});
    }
  }
  return out;
}

/// Vertices sorted from highest to lowest under the field's total order.
inline std::vector<std::size_t> descending_order(const GridField& f) {
  std::vector<std::size_t> order(f.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f.higher(a, b); });
  return order;
}

/// Highest vertex of the field.
inline std::size_t global_maximum(const GridField& f) {
  if (f.size() == 0) throw InputError("empty field");
  std::size_t best = 0;
  for (std::size_t v = 1; v < f.size(); ++v)
    if (f.higher(v, best)) best = v;
  return best;
}

/// Maximum/saddle pairs of the superlevel-set merge tree. When components
/// meet at a vertex, every component except the one with the highest
/// maximum dies there. The global maximum stays unpaired.
inline std::vector<PersistencePair> compute_persistence_pairs(const GridField& f) {
  const std::size_t count = f.size();
  std::vector<std::size_t> parent(count, kNoVertex);  // kNoVertex = not yet swept
  std::vector<std::size_t> top(count, kNoVertex);     // highest vertex of a root's component
  auto find = [&](std::size_t v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };

  std::vector<PersistencePair> pairs;
  for (std::size_t v : descending_order(f)) {
    std::array<std::size_t, 6> roots{};
    std::size_t nroots = 0;
    for (std::size_t u : link_of(f.n, v)) {
      if (u == kNoVertex || parent[u] == kNoVertex) continue;
      const std::size_t r = find(u);
      if (std::find(roots.begin(), roots.begin() + nroots, r) == roots.begin() + nroots) roots[nroots++] = r;
    }
    if (nroots == 0) {
      parent[v] = v;
      top[v] = v;
      continue;
    }
    std::sort(roots.begin(), roots.begin() + nroots,
              [&](std::size_t a, std::size_t b) { return f.higher(top[a], top[b]); });
    const std::size_t survivor = roots[0];
    for (std::size_t k = 1; k < nroots; ++k) {
      const std::size_t m = top[roots[k]];
      pairs.push_back({{m, CriticalKind::maximum, f[m], 0},
                       {v, CriticalKind::saddle, f[v], static_cast<std::uint32_t>(k - 1)},
                       f[m] - f[v]});
      parent[roots[k]] = survivor;
    }
    parent[v] = survivor;
  }
  return pairs;
}

namespace detail {

/// Scratch marks reused across cancellations.
struct FlattenWorkspace {
  std::vector<std::uint32_t> region;
  std::vector<std::uint32_t> ordered;
  std::uint32_t stamp = 0;
};

/// Lowers the superlevel component of `m` above saddle `s` to just below
/// the saddle, descending with breadth-first distance from `s` so that every
/// lowered vertex keeps a higher neighbor. Returns false if the pair no
/// longer describes the current field.
inline bool flatten_pair(GridField& g, std::size_t m, std::size_t s, FlattenWorkspace& ws) {
  if (!g.higher(m, s) || !is_maximum(g, m)) return false;
  if (ws.region.size() != g.size()) {
    ws.region.assign(g.size(), 0);
    ws.ordered.assign(g.size(), 0);
    ws.stamp = 0;
  }
  const std::uint32_t id = ++ws.stamp;

  std::vector<std::size_t> region{m};
  ws.region[m] = id;
  for (std::size_t head = 0; head < region.size(); ++head) {
    for (std::size_t u : link_of(g.n, region[head])) {
      if (u == kNoVertex || ws.region[u] == id || !g.higher(u, s)) continue;
      if (g.higher(u, m)) return false;
      ws.region[u] = id;
      region.push_back(u);
    }
  }

  std::vector<std::size_t> order;
  order.reserve(region.size());
  std::vector<std::size_t> frontier{s};
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    for (std::size_t u : link_of(g.n, frontier[head])) {
      if (u == kNoVertex || ws.region[u] != id || ws.ordered[u] == id) continue;
      ws.ordered[u] = id;
      order.push_back(u);
      frontier.push_back(u);
    }
  }
  if (order.size() != region.size()) {
    std::sort(region.begin(), region.end());
    for (std::size_t u : region)
      if (ws.ordered[u] != id) order.push_back(u);
  }

  const double fs = g[s];
  double floor_value = -std::numeric_limits<double>::infinity();
  for (std::size_t r : region)
    for (std::size_t u : link_of(g.n, r))
      if (u != kNoVertex && u != s && ws.region[u] != id && g[u] < fs) floor_value = std::max(floor_value, g[u]);

  std::vector<double> lowered(order.size());
  bool ok = std::isfinite(floor_value);
  if (ok) {
    const double step = (fs - floor_value) / static_cast<double>(order.size() + 1);
    double prev = fs;
    for (std::size_t k = 0; k < order.size() && ok; ++k) {
      lowered[k] = fs - step * static_cast<double>(k + 1);
      ok = lowered[k] < prev && lowered[k] > floor_value;
      prev = lowered[k];
    }
  }
  if (!ok) {
    double x = fs;
    for (double& y : lowered) y = x = std::nextafter(x, -std::numeric_limits<double>::infinity());
  }
  for (std::size_t k = 0; k < order.size(); ++k) g.values[order[k]] = lowered[k];
  return true;
}

}  // namespace detail

/// Removes every maximum/saddle pair whose persistence is below
/// threshold * (max - min), lowest persistence first. Threshold 0 returns
/// the field unchanged.
inline GridField simplify(const GridField& f, double threshold) {
  if (!(threshold >= 0.0) || !std::isfinite(threshold)) throw InputError("simplification threshold must be >= 0");
  GridField g = f;
  if (threshold == 0.0 || f.size() == 0) return g;
  const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
  const double limit = threshold * (*hi - *lo);
  detail::FlattenWorkspace ws;
  // Ties in the input can let a cancellation expose a new tiny pair; the
  // loop re-derives pairs until none is left below the limit.
  for (int pass = 0; pass < 1000; ++pass) {
    std::vector<PersistencePair> below;
    for (const auto& p : compute_persistence_pairs(g))
      if (p.persistence < limit) below.push_back(p);
    if (below.empty()) return g;
    std::sort(below.begin(), below.end(), [](const PersistencePair& a, const PersistencePair& b) {
      if (a.persistence != b.persistence) return a.persistence < b.persistence;
      if (a.destroyer.vertex != b.destroyer.vertex) return a.destroyer.vertex < b.destroyer.vertex;
      return a.creator.vertex < b.creator.vertex;
    });
    for (const auto& p : below) detail::flatten_pair(g, p.creator.vertex, p.destroyer.vertex, ws);
  }
  throw Error("simplification did not converge");
}

struct SeparatrixEdge {
  std::size_t saddle = 0;   // index into ExtremumGraph::saddles
  std::size_t maximum = 0;  // index into ExtremumGraph::maxima
  std::vector<std::size_t> polyline;  // vertex walk from the saddle up to the maximum
  bool collapsed = false;   // both ascending separatrices reached this maximum
};

/// Maxima, saddles and the ascending separatrices between them.
struct ExtremumGraph {
  std::size_t n = 0;
  std::vector<CriticalPoint> maxima;
  std::vector<CriticalPoint> saddles;
  std::vector<SeparatrixEdge> edges;
};

/// Steepest-ascent walk: repeatedly steps to the highest link vertex above
/// the current one. Returns the walk including `start`.
inline std::vector<std::size_t> ascend(const GridField& f, std::size_t start) {
  std::vector<std::size_t> walk{start};
  for (std::size_t v = start;;) {
    std::size_t best = kNoVertex;
    for (std::size_t u : link_of(f.n, v))
      if (u != kNoVertex && f.higher(u, v) && (best == kNoVertex || f.higher(u, best))) best = u;
    if (best == kNoVertex) return walk;
    walk.push_back(best);
    v = best;
  }
}

/// Maximum graph: from each saddle, one steepest-ascent path leaves through
/// each upper-link component. A multi-saddle with c components becomes c-1
/// simple saddles, the k-th joining components k and k+1.
inline ExtremumGraph extract_extremum_graph(const GridField& f) {
  ExtremumGraph g;
  g.n = f.n;
  std::vector<std::size_t> max_of_vertex(f.size(), kNoVertex);
  for (const CriticalPoint& cp : classify_critical_points(f)) {
    if (cp.kind == CriticalKind::maximum) {
      max_of_vertex[cp.vertex] = g.maxima.size();
      g.maxima.push_back(cp);
    }
  }
  for (std::size_t v = 0; v < f.size(); ++v) {
    const LinkComponents up = upper_link(f, v);
    if (up.count < 2 || lower_link(f, v).count == 0) continue;
    const auto link = link_of(f.n, v);
    std::vector<std::vector<std::size_t>> walks(up.count);
    for (int c = 0; c < up.count; ++c) {
      std::size_t start = kNoVertex;
      for (std::size_t k = 0; k < 6; ++k)
        if (up.label[k] == c && (start == kNoVertex || f.higher(link[k], start))) start = link[k];
      walks[c] = ascend(f, start);
      walks[c].insert(walks[c].begin(), v);
    }
    for (int s = 0; s + 1 < up.count; ++s) {
      const std::size_t node = g.saddles.size();
      g.saddles.push_back({v, CriticalKind::saddle, f[v], static_cast<std::uint32_t>(s)});
      const std::size_t ma = max_of_vertex[walks[s].back()];
      const std::size_t mb = max_of_vertex[walks[s + 1].back()];
      if (ma == mb) {
        g.edges.push_back({node, ma, walks[s], true});
      } else {
        g.edges.push_back({node, ma, walks[s], false});
        g.edges.push_back({node, mb, walks[s + 1], false});
      }
    }
  }
  return g;
}

}  // namespace topofuse
