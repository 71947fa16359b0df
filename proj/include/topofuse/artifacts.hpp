#pragma once

// On-disk artifact formats: binary grids, schema-versioned JSON documents,
// CSV tables and content hashes.
//
// Binary grid layout (little-endian):
//   8 bytes  magic "TFGRID01"
//   u32      n (grid side)
//   u32      dtype (1 = u64, 2 = f64, 3 = i32, 4 = f32)
//   4 x f64  axis ranges: min1, max1, min2, max2
//   payload  n * n elements, cell (i, j) at j * n + i

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "topofuse/error.hpp"
#include "topofuse/fusion.hpp"
#include "topofuse/histogram.hpp"
#include "topofuse/pathfind.hpp"
#include "topofuse/spline.hpp"
#include "topofuse/topology.hpp"
#include "topofuse/volio.hpp"

namespace topofuse {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Lowercase hex SHA-256 of a byte string.
inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int k = 0; k < len; ++k) out << std::setw(2) << static_cast<int>(digest[k]);
  return out.str();
}

// ---------------------------------------------------------------- grids

enum class GridDType : std::uint32_t { u64 = 1, f64 = 2, i32 = 3, f32 = 4 };

struct GridPayload {
  std::size_t n = 0;
  GridDType dtype = GridDType::f64;
  AxisRanges ranges{{0.0, 1.0}, {0.0, 1.0}};
  std::vector<double> values;  // widened
};

namespace detail {

template <class T>
void put(std::string& out, T x) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  char b[sizeof(T)];
  std::memcpy(b, &x, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(b, sizeof(T));
}

template <class T>
T get(std::string_view in, std::size_t& at) {
  if (at + sizeof(T) > in.size()) throw FormatError("grid payload truncated");
  char b[sizeof(T)];
  std::memcpy(b, in.data() + at, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  at += sizeof(T);
  T x;
  std::memcpy(&x, b, sizeof(T));
  return x;
}

inline std::string grid_header(std::size_t n, GridDType t, const AxisRanges& r) {
  std::string out = "TFGRID01";
  put<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t));
  put(out, r.first.min);
  put(out, r.first.max);
  put(out, r.second.min);
  put(out, r.second.max);
  return out;
}

}  // namespace detail

inline std::string encode_grid(std::size_t n, const std::vector<double>& values, const AxisRanges& r,
                               GridDType t = GridDType::f64) {
  if (values.size() != n * n) throw InputError("grid values length must be n*n");
  std::string out = detail::grid_header(n, t, r);
  for (double v : values) {
    switch (t) {
      case GridDType::u64: detail::put(out, static_cast<std::uint64_t>(v)); break;
      case GridDType::f64: detail::put(out, v); break;
      case GridDType::i32: detail::put(out, static_cast<std::int32_t>(v)); break;
      case GridDType::f32: detail::put(out, static_cast<float>(v)); break;
    }
  }
  return out;
}

inline std::string encode_counts(const Histogram2D& h) {
  std::string out = detail::grid_header(h.n(), GridDType::u64, {h.binning.range1(), h.binning.range2()});
  for (std::uint64_t c : h.counts) detail::put(out, c);
  return out;
}

inline std::string encode_assignment(const FusedField& f, const AxisRanges& r) {
  std::string out = detail::grid_header(f.n, GridDType::i32, r);
  for (std::int32_t b : f.branch_assignment) detail::put(out, b);
  return out;
}

inline GridPayload decode_grid(std::string_view bytes) {
  if (bytes.size() < 8 || bytes.substr(0, 8) != "TFGRID01") throw FormatError("not a grid payload (bad magic)");
  std::size_t at = 8;
  GridPayload g;
  g.n = detail::get<std::uint32_t>(bytes, at);
  const auto t = detail::get<std::uint32_t>(bytes, at);
  if (t < 1 || t > 4) throw FormatError("unknown grid dtype " + std::to_string(t));
  g.dtype = static_cast<GridDType>(t);
  g.ranges.first.min = detail::get<double>(bytes, at);
  g.ranges.first.max = detail::get<double>(bytes, at);
  g.ranges.second.min = detail::get<double>(bytes, at);
  g.ranges.second.max = detail::get<double>(bytes, at);
  const std::size_t width = g.dtype == GridDType::i32 || g.dtype == GridDType::f32 ? 4 : 8;
  if (bytes.size() - at != g.n * g.n * width) throw FormatError("grid payload size mismatch");
  g.values.resize(g.n * g.n);
  for (double& v : g.values) {
    switch (g.dtype) {
      case GridDType::u64: v = static_cast<double>(detail::get<std::uint64_t>(bytes, at)); break;
      case GridDType::f64: v = detail::get<double>(bytes, at); break;
      case GridDType::i32: v = detail::get<std::int32_t>(bytes, at); break;
      case GridDType::f32: v = detail::get<float>(bytes, at); break;
    }
  }
  return g;
}

/// Block reduction for previews: each output cell covers factor x factor
/// input cells (the last block may be partial). Sums suit counts; maxima
/// keep density peaks visible.
inline std::vector<double> decimate(std::size_t n, const std::vector<double>& values, std::size_t factor,
                                    bool use_max, std::size_t& out_n) {
  if (factor == 0) throw InputError("decimation factor must be >= 1");
  out_n = (n + factor - 1) / factor;
  std::vector<double> out(out_n * out_n, use_max ? -std::numeric_limits<double>::infinity() : 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      double& o = out[(j / factor) * out_n + i / factor];
      const double v = values[j * n + i];
      o = use_max ? std::max(o, v) : o + v;
    }
  return out;
}

// ----------------------------------------------------------------- JSON

namespace detail {

inline void check_schema(const Json& j, std::string_view kind) {
  if (!j.is_object() || !j.contains("schema_version")) throw FormatError("missing schema_version");
  const Json& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
    throw FormatError("unsupported schema_version " + v.dump() + " (expected " + std::to_string(kSchemaVersion) + ")");
  if (j.value("kind", std::string{}) != kind)
    throw FormatError("expected a '" + std::string(kind) + "' document, got '" + j.value("kind", std::string{}) + "'");
}

inline Json header(std::string_view kind) { return {{"schema_version", kSchemaVersion}, {"kind", kind}}; }

inline CriticalKind parse_kind(const std::string& s) {
  if (s == "minimum") return CriticalKind::minimum;
  if (s == "saddle") return CriticalKind::saddle;
  if (s == "maximum") return CriticalKind::maximum;
  throw FormatError("unknown critical point kind '" + s + "'");
}

inline Json to_json(const CriticalPoint& c, std::size_t n) {
  return {{"vertex", c.vertex}, {"i", c.vertex % n}, {"j", c.vertex / n},
          {"kind", to_string(c.kind)}, {"value", c.value}, {"sub", c.sub}};
}

inline CriticalPoint critical_from_json(const Json& j) {
  return {j.at("vertex").get<std::size_t>(), parse_kind(j.at("kind").get<std::string>()), j.at("value").get<double>(),
          j.at("sub").get<std::uint32_t>()};
}

template <class F>
Json collect(std::size_t count, F&& f) {
  Json a = Json::array();
  for (std::size_t k = 0; k < count; ++k) a.push_back(f(k));
  return a;
}

}  // namespace detail

inline Json to_json(const ExtremumGraph& g) {
  Json j = detail::header("extremum_graph");
  j["n"] = g.n;
  j["maxima"] = detail::collect(g.maxima.size(), [&](std::size_t k) { return detail::to_json(g.maxima[k], g.n); });
  j["saddles"] = detail::collect(g.saddles.size(), [&](std::size_t k) { return detail::to_json(g.saddles[k], g.n); });
  j["edges"] = detail::collect(g.edges.size(), [&](std::size_t k) {
    const auto& e = g.edges[k];
    return Json{{"saddle", e.saddle}, {"maximum", e.maximum}, {"polyline", e.polyline}, {"collapsed", e.collapsed}};
  });
  return j;
}

inline ExtremumGraph extremum_graph_from_json(const Json& j) {
  detail::check_schema(j, "extremum_graph");
  try {
    ExtremumGraph g;
    g.n = j.at("n").get<std::size_t>();
    for (const auto& c : j.at("maxima")) g.maxima.push_back(detail::critical_from_json(c));
    for (const auto& c : j.at("saddles")) g.saddles.push_back(detail::critical_from_json(c));
    for (const auto& e : j.at("edges"))
      g.edges.push_back({e.at("saddle").get<std::size_t>(), e.at("maximum").get<std::size_t>(),
                         e.at("polyline").get<std::vector<std::size_t>>(), e.at("collapsed").get<bool>()});
    return g;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed extremum_graph: ") + e.what());
  }
}

inline Json to_json(const WeightedGraph& g, std::string_view kind = "weighted_graph") {
  Json j = detail::header(kind);
  j["n"] = g.n;
  j["total_weight"] = g.total_weight();
  j["nodes"] = detail::collect(g.nodes.size(), [&](std::size_t k) {
    Json c = detail::to_json(g.nodes[k], g.n);
    c["id"] = k;
    c["density"] = g.density[k];
    return c;
  });
  j["edges"] = detail::collect(g.edges.size(), [&](std::size_t k) {
    const auto& e = g.edges[k];
    return Json{{"u", e.u}, {"v", e.v}, {"weight", e.weight}, {"polyline", e.polyline}, {"collapsed", e.collapsed}};
  });
  return j;
}

inline WeightedGraph weighted_graph_from_json(const Json& j, std::string_view kind = "weighted_graph") {
  detail::check_schema(j, kind);
  try {
    WeightedGraph g;
    g.n = j.at("n").get<std::size_t>();
    for (const auto& c : j.at("nodes")) {
      g.nodes.push_back(detail::critical_from_json(c));
      g.density.push_back(c.at("density").get<double>());
    }
    for (const auto& e : j.at("edges"))
      g.edges.push_back({e.at("u").get<std::size_t>(), e.at("v").get<std::size_t>(), e.at("weight").get<double>(),
                         e.at("polyline").get<std::vector<std::size_t>>(), e.at("collapsed").get<bool>()});
    return g;
  } catch (const Json::exception& e) {
    throw FormatError("malformed " + std::string(kind) + ": " + e.what());
  }
}

namespace detail {

inline Json path_body(const TreePath& p) {
  Json j;
  j["branch_id"] = p.branch_id;
  j["weight"] = p.weight;
  j["nodes"] = collect(p.nodes.size(), [&](std::size_t k) {
    const auto& x = p.nodes[k];
    return Json{{"id", x.id}, {"i", x.at.i}, {"j", x.at.j}, {"density", x.density}, {"kind", to_string(x.kind)}};
  });
  j["segments"] = collect(p.segments.size(), [&](std::size_t k) {
    return collect(p.segments[k].size(), [&](std::size_t q) { return Json{p.segments[k][q].i, p.segments[k][q].j}; });
  });
  j["polyline"] = collect(p.polyline.size(), [&](std::size_t k) { return Json{p.polyline[k].x, p.polyline[k].y}; });
  return j;
}

inline TreePath path_from_body(const Json& j) {
  TreePath p;
  p.branch_id = j.at("branch_id").get<int>();
  p.weight = j.at("weight").get<double>();
  for (const auto& x : j.at("nodes"))
    p.nodes.push_back({x.at("id").get<std::size_t>(), {x.at("i").get<std::int32_t>(), x.at("j").get<std::int32_t>()},
                       x.at("density").get<double>(), parse_kind(x.at("kind").get<std::string>())});
  for (const auto& s : j.at("segments")) {
    std::vector<GridPoint> seg;
    for (const auto& q : s) seg.push_back({q.at(0).get<std::int32_t>(), q.at(1).get<std::int32_t>()});
    p.segments.push_back(std::move(seg));
  }
  for (const auto& q : j.at("polyline")) p.polyline.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
  return p;
}

}  // namespace detail

inline Json to_json(const TreePath& p) {
  Json j = detail::header("tree_path");
  j.update(detail::path_body(p));
  return j;
}

inline TreePath tree_path_from_json(const Json& j) {
  detail::check_schema(j, "tree_path");
  try {
    return detail::path_from_body(j);
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed tree_path: ") + e.what());
  }
}

inline Json to_json(const std::vector<TreePath>& paths) {
  Json j = detail::header("tree_paths");
  j["paths"] = detail::collect(paths.size(), [&](std::size_t k) { return detail::path_body(paths[k]); });
  return j;
}

inline std::vector<TreePath> tree_paths_from_json(const Json& j) {
  detail::check_schema(j, "tree_paths");
  try {
    std::vector<TreePath> out;
    for (const auto& p : j.at("paths")) out.push_back(detail::path_from_body(p));
    return out;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed tree_paths: ") + e.what());
  }
}

/// Every stride-th sample plus the last one.
inline Json to_json(const SplineSamples& s, std::size_t stride) {
  if (stride == 0) throw InputError("stride must be >= 1");
  Json j = detail::header("spline_samples");
  j["branch_id"] = s.branch_id;
  j["sample_count"] = s.size();
  j["stride"] = stride;
  j["total_length"] = s.total_length;
  Json pts = Json::array(), ell = Json::array();
  auto emit = [&](std::size_t k) {
    pts.push_back({s.points[k].x, s.points[k].y});
    ell.push_back(s.cum_length[k]);
  };
  for (std::size_t k = 0; k < s.size(); k += stride) emit(k);
  if ((s.size() - 1) % stride != 0) emit(s.size() - 1);
  j["points"] = std::move(pts);
  j["cum_length"] = std::move(ell);
  return j;
}

inline Json to_json(const BSplineCurve& c) {
  Json j = detail::header("bspline");
  j["degree"] = c.degree;
  j["knots"] = c.knots;
  j["coeffs"] = detail::collect(c.coeffs.size(), [&](std::size_t k) { return Json{c.coeffs[k].x, c.coeffs[k].y}; });
  j["residual"] = c.residual;
  j["max_residual"] = c.max_residual;
  j["data_count"] = c.data_count;
  return j;
}

inline BSplineCurve bspline_from_json(const Json& j) {
  detail::check_schema(j, "bspline");
  try {
    BSplineCurve c;
    c.degree = j.at("degree").get<int>();
    c.knots = j.at("knots").get<std::vector<double>>();
    for (const auto& q : j.at("coeffs")) c.coeffs.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
    c.residual = j.at("residual").get<double>();
    c.max_residual = j.at("max_residual").get<double>();
    c.data_count = j.at("data_count").get<std::size_t>();
    if (c.knots.size() != c.coeffs.size() + static_cast<std::size_t>(c.degree) + 1)
      throw FormatError("bspline knot count does not match its coefficients");
    return c;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed bspline: ") + e.what());
  }
}

inline Json to_json(const Histogram1D& h) {
  Json j = detail::header("histogram1d");
  j["label"] = h.label;
  j["edges"] = h.edges;
  j["weights"] = h.weights;
  return j;
}

inline Histogram1D histogram1d_from_json(const Json& j) {
  detail::check_schema(j, "histogram1d");
  try {
    Histogram1D h;
    h.label = j.value("label", std::string{});
    h.edges = j.at("edges").get<std::vector<double>>();
    h.weights = j.at("weights").get<std::vector<double>>();
    if (h.edges.size() != h.weights.size() + 1) throw FormatError("histogram1d needs bins + 1 edges");
    return h;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed histogram1d: ") + e.what());
  }
}

inline Json to_json(const PeakReport& r, double min_persistence) {
  Json j = detail::header("peaks");
  j["count"] = r.count;
  j["min_persistence"] = min_persistence;
  j["peaks"] = detail::collect(r.peaks.size(), [&](std::size_t k) {
    const auto& p = r.peaks[k];
    return Json{{"bin", p.bin}, {"center", p.center}, {"weight", p.weight}, {"persistence", p.persistence}};
  });
  return j;
}

/// Metadata only; the counts travel as a binary grid.
inline Json to_json(const Histogram2D& h) {
  Json j = detail::header("histogram2d");
  j["n"] = h.n();
  j["axis_names"] = h.axis_names;
  j["ranges"] = {{h.binning.range1().min, h.binning.range1().max}, {h.binning.range2().min, h.binning.range2().max}};
  j["total_count"] = h.total_count;
  return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw FormatError("invalid JSON in " + std::string(what) + ": " + e.what());
  }
}

inline Json read_json(const std::filesystem::path& path) {
  return parse_json(detail::read_bytes(path), path.string());
}

// ------------------------------------------------------------------ CSV

inline std::string to_csv(const Histogram1D& h) {
  std::string out = "bin_center,weight\n";
  for (std::size_t b = 0; b < h.bins(); ++b)
    out += detail::format_double(h.center(b)) + "," + detail::format_double(h.weights[b]) + "\n";
  return out;
}

/// Dense "j,i,count" rows of nonzero cells.
inline std::string to_csv(const Histogram2D& h) {
  std::string out = "i,j,count\n";
  const std::size_t n = h.n();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (h.counts[j * n + i] != 0)
        out += std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(h.counts[j * n + i]) + "\n";
  return out;
}

/// Reads "bin_center,weight" rows; edges are rebuilt halfway between centers.
inline Histogram1D histogram1d_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<double> centers, weights;
  bool header = true;
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (header) {
      header = false;
      if (t.find_first_not_of("0123456789.-+eE,") != std::string::npos) continue;
    }
    const auto comma = t.find(',');
    if (comma == std::string::npos) throw FormatError("CSV row without comma: " + t);
    centers.push_back(detail::parse_double(t.substr(0, comma), "bin center"));
    weights.push_back(detail::parse_double(t.substr(comma + 1), "weight"));
  }
  if (centers.size() < 2) throw FormatError("CSV histogram needs at least 2 rows");
  Histogram1D h;
  h.weights = weights;
  h.label = "csv";
  h.edges.resize(centers.size() + 1);
  for (std::size_t b = 1; b < centers.size(); ++b) {
    if (!(centers[b] > centers[b - 1])) throw FormatError("CSV bin centers must increase");
    h.edges[b] = 0.5 * (centers[b - 1] + centers[b]);
  }
  h.edges.front() = centers.front() - (h.edges[1] - centers.front());
  h.edges.back() = centers.back() + (centers.back() - h.edges[centers.size() - 1]);
  return h;
}

}  // namespace topofuse
