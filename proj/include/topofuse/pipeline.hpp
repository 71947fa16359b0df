#pragma once

// The fusion pipeline as a chain of immutable stage products. The CLI runs
// every stage in order; the session service runs them one request at a
// time. Both collect artifacts through the same function, so identical
// parameters give identical bytes.

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "topofuse/artifacts.hpp"
#include "topofuse/error.hpp"
#include "topofuse/fusion.hpp"
#include "topofuse/histogram.hpp"
#include "topofuse/pathfind.hpp"
#include "topofuse/projection.hpp"
#include "topofuse/spline.hpp"
#include "topofuse/synth.hpp"
#include "topofuse/topology.hpp"
#include "topofuse/volio.hpp"

namespace topofuse {

enum class FusionModeChoice { automatic, single, merged };
enum class Pullback { nearest_bin, continuous };

struct PipelineConfig {
  std::vector<std::string> volumes;  // exactly two paths, unless synth is set
  std::optional<CircularGaussiansParams> synth;
  std::size_t bins = 1000;
  std::optional<AxisRanges> ranges;
  double persistence_threshold = 0.0;
  double smoothing_factor = 0.01;
  std::size_t sample_count = 1'000'000;
  double tau = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> selections;  // empty: MST diameter
  PathMetric path_metric = PathMetric::weight;
  FusionModeChoice fusion_mode = FusionModeChoice::automatic;
  Pullback pullback = Pullback::nearest_bin;
  std::size_t density_bins = 128;
  double min_persistence = 0.05;
  std::optional<double> noise_floor = 0.0;
  DType fused_dtype = DType::f32;
  unsigned threads = 0;
  std::string output_dir = "out";
};

namespace detail {

inline const char* name_of(FusionModeChoice m) {
  switch (m) {
    case FusionModeChoice::automatic: return "auto";
    case FusionModeChoice::single: return "single";
    case FusionModeChoice::merged: return "merged";
  }
  return "auto";
}

inline void reject_unknown(const Json& j, const std::set<std::string>& known, std::string_view where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
}

template <class T>
T field(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

inline Json synth_to_json(const CircularGaussiansParams& p) {
  return {{"k", p.k},           {"radius", p.radius},     {"sigma", p.sigma},
          {"voxels_per_blob", p.voxels_per_blob},          {"seed", p.seed},
          {"resolution", p.resolution},                    {"truncation", p.truncation}};
}

inline CircularGaussiansParams synth_from_json(const Json& j) {
  reject_unknown(j, {"k", "radius", "sigma", "voxels_per_blob", "seed", "resolution", "truncation"}, "synth");
  CircularGaussiansParams p;
  p.k = field(j, "k", p.k);
  p.radius = field(j, "radius", p.radius);
  p.sigma = field(j, "sigma", p.sigma);
  p.voxels_per_blob = field(j, "voxels_per_blob", p.voxels_per_blob);
  p.seed = field(j, "seed", p.seed);
  p.resolution = field(j, "resolution", p.resolution);
  p.truncation = field(j, "truncation", p.truncation);
  require(p.k >= 2 && p.k <= 64, "synth.k must lie in [2, 64]");
  require(p.voxels_per_blob >= 1 && p.voxels_per_blob <= 50'000'000, "synth.voxels_per_blob must lie in [1, 5e7]");
  require(p.radius > 0.0 && p.sigma > 0.0 && p.truncation > 0.0, "synth radius, sigma and truncation must be positive");
  require(p.resolution >= 8 && p.resolution <= 100'000, "synth.resolution must lie in [8, 1e5]");
  return p;
}

}  // namespace detail

/// Checks documented ranges; throws ConfigError naming the offending key.
inline void validate(const PipelineConfig& c) {
  using detail::require;
  require(c.synth.has_value() != !c.volumes.empty(), "inputs need either two volume paths or a synth spec");
  require(c.synth || c.volumes.size() == 2, "inputs.volumes must name exactly two volumes");
  require(c.bins >= 8 && c.bins <= 4096, "bins must lie in [8, 4096]");
  require(c.persistence_threshold >= 0.0 && c.persistence_threshold <= 1.0,
          "persistence_threshold must lie in [0, 1]");
  require(c.smoothing_factor >= 0.0 && std::isfinite(c.smoothing_factor), "smoothing_factor must be >= 0");
  require(c.sample_count >= 2 && c.sample_count <= 100'000'000, "sample_count must lie in [2, 1e8]");
  require(c.tau >= 0.0 && c.tau <= 1.0, "tau must lie in [0, 1]");
  require(c.density_bins >= 3 && c.density_bins <= 1'000'000, "density_bins must lie in [3, 1e6]");
  require(c.min_persistence >= 0.0 && c.min_persistence <= 1.0, "min_persistence must lie in [0, 1]");
  require(!c.noise_floor || (*c.noise_floor >= 0.0 && *c.noise_floor < 1.0), "noise_floor must lie in [0, 1) or be null");
  require(c.fused_dtype == DType::f32 || c.fused_dtype == DType::u16, "fused_dtype must be f32 or u16");
  require(c.threads <= 1024, "threads must lie in [0, 1024]");
  for (const auto& [a, b] : c.selections) require(a != b, "a branch selection needs two distinct node ids");
  if (c.ranges) {
    const auto& [r1, r2] = *c.ranges;
    require(r1.max > r1.min && r2.max > r2.min, "ranges need max > min on both axes");
  }
}

inline PipelineConfig config_from_json(const Json& j) {
  using detail::field;
  detail::reject_unknown(j,
                         {"inputs", "bins", "ranges", "persistence_threshold", "smoothing_factor", "sample_count",
                          "tau", "selections", "path_metric", "fusion_mode", "pullback", "density_bins",
                          "min_persistence", "noise_floor", "fused_dtype", "threads", "output_dir"},
                         "config");
  PipelineConfig c;
  if (!j.contains("inputs")) throw ConfigError("config needs 'inputs'");
  const Json& in = j.at("inputs");
  detail::reject_unknown(in, {"volumes", "synth"}, "inputs");
  c.volumes = field(in, "volumes", std::vector<std::string>{});
  if (in.contains("synth")) c.synth = detail::synth_from_json(in.at("synth"));
  c.bins = field(j, "bins", c.bins);
  if (j.contains("ranges") && !j.at("ranges").is_null()) {
    const auto r = field(j, "ranges", std::vector<std::vector<double>>{});
    detail::require(r.size() == 2 && r[0].size() == 2 && r[1].size() == 2, "ranges must be [[min1, max1], [min2, max2]]");
    c.ranges = AxisRanges{{r[0][0], r[0][1]}, {r[1][0], r[1][1]}};
  }
  c.persistence_threshold = field(j, "persistence_threshold", c.persistence_threshold);
  c.smoothing_factor = field(j, "smoothing_factor", c.smoothing_factor);
  c.sample_count = field(j, "sample_count", c.sample_count);
  c.tau = field(j, "tau", c.tau);
  for (const auto& s : field(j, "selections", std::vector<std::vector<std::size_t>>{})) {
    detail::require(s.size() == 2, "each selection must be a pair of node ids");
    c.selections.emplace_back(s[0], s[1]);
  }
  const auto metric = field(j, "path_metric", std::string("weight"));
  detail::require(metric == "weight" || metric == "hops", "path_metric must be 'weight' or 'hops'");
  c.path_metric = metric == "weight" ? PathMetric::weight : PathMetric::hops;
  const auto mode = field(j, "fusion_mode", std::string("auto"));
  if (mode == "auto") c.fusion_mode = FusionModeChoice::automatic;
  else if (mode == "single") c.fusion_mode = FusionModeChoice::single;
  else if (mode == "merged") c.fusion_mode = FusionModeChoice::merged;
  else throw ConfigError("fusion_mode must be 'auto', 'single' or 'merged'");
  const auto pull = field(j, "pullback", std::string("nearest_bin"));
  detail::require(pull == "nearest_bin" || pull == "continuous", "pullback must be 'nearest_bin' or 'continuous'");
  c.pullback = pull == "nearest_bin" ? Pullback::nearest_bin : Pullback::continuous;
  c.density_bins = field(j, "density_bins", c.density_bins);
  c.min_persistence = field(j, "min_persistence", c.min_persistence);
  if (j.contains("noise_floor")) c.noise_floor = j.at("noise_floor").is_null() ? std::nullopt : std::optional(field(j, "noise_floor", 0.0));
  const auto dtype = field(j, "fused_dtype", std::string("f32"));
  detail::require(dtype == "f32" || dtype == "u16", "fused_dtype must be 'f32' or 'u16'");
  c.fused_dtype = dtype == "f32" ? DType::f32 : DType::u16;
  c.threads = field(j, "threads", c.threads);
  c.output_dir = field(j, "output_dir", c.output_dir);
  validate(c);
  return c;
}

/// Canonical form: every key present, defaults spelled out.
inline Json to_json(const PipelineConfig& c) {
  Json in = Json::object();
  if (c.synth) in["synth"] = detail::synth_to_json(*c.synth);
  else in["volumes"] = c.volumes;
  Json sel = Json::array();
  for (const auto& [a, b] : c.selections) sel.push_back({a, b});
  Json ranges = nullptr;
  if (c.ranges) ranges = {{c.ranges->first.min, c.ranges->first.max}, {c.ranges->second.min, c.ranges->second.max}};
  return {{"inputs", in},
          {"bins", c.bins},
          {"ranges", ranges},
          {"persistence_threshold", c.persistence_threshold},
          {"smoothing_factor", c.smoothing_factor},
          {"sample_count", c.sample_count},
          {"tau", c.tau},
          {"selections", sel},
          {"path_metric", c.path_metric == PathMetric::weight ? "weight" : "hops"},
          {"fusion_mode", detail::name_of(c.fusion_mode)},
          {"pullback", c.pullback == Pullback::nearest_bin ? "nearest_bin" : "continuous"},
          {"density_bins", c.density_bins},
          {"min_persistence", c.min_persistence},
          {"noise_floor", c.noise_floor ? Json(*c.noise_floor) : Json(nullptr)},
          {"fused_dtype", c.fused_dtype == DType::f32 ? "f32" : "u16"},
          {"threads", c.threads},
          {"output_dir", c.output_dir}};
}

// ------------------------------------------------------------ stage products

struct InputStage {
  Volume v1;
  Volume v2;
  std::vector<std::string> warnings;
};

struct HistogramStage {
  Histogram2D histogram;
  DensityField density;
  Histogram1D axis1;
  Histogram1D axis2;
};

struct TopologyStage {
  double threshold = 0.0;
  GridField simplified;
  std::size_t maxima = 0;
  std::size_t saddles = 0;
  std::size_t minima = 0;
  ExtremumGraph extremum_graph;
};

struct GraphStage {
  WeightedGraph graph;
  WeightedGraph mst;
};

struct PathStage {
  std::vector<TreePath> paths;
};

struct FusionStage {
  FusionMode mode = FusionMode::single;
  std::vector<BSplineCurve> curves;
  std::vector<SplineSamples> samples;
  FusedField field;
  Volume fused;
  Histogram1D spline_density;
  PeakReport peaks;
};

/// Snapshot of a pipeline run. Products are immutable and shared, so a
/// copy is cheap and later stages never disturb earlier snapshots.
struct PipelineState {
  std::shared_ptr<const InputStage> inputs;
  std::shared_ptr<const HistogramStage> histogram;
  std::shared_ptr<const TopologyStage> topology;
  std::shared_ptr<const GraphStage> graph;
  std::shared_ptr<const PathStage> paths;
  std::shared_ptr<const FusionStage> fusion;
  std::map<std::string, double> timings_ms;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <class Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

inline bool hanging_saddles_excluded(const PipelineConfig& c) { return c.noise_floor.has_value() || c.tau > 0.0; }

}  // namespace detail

inline PipelineState stage_load(const PipelineConfig& c) {
  PipelineState s;
  const auto t0 = detail::Clock::now();
  s.inputs = detail::run_stage("load", [&] {
    auto in = std::make_shared<InputStage>();
    if (c.synth) {
      SynthPair p = generate_circular_gaussians(*c.synth);
      in->v1 = std::move(p.v1);
      in->v2 = std::move(p.v2);
      in->warnings = std::move(p.warnings);
    } else {
      in->v1 = read_volume(c.volumes[0]);
      in->v2 = read_volume(c.volumes[1]);
      require_same_dims(in->v1, in->v2);
    }
    return std::shared_ptr<const InputStage>(std::move(in));
  });
  s.timings_ms["load"] = detail::elapsed_ms(t0);
  return s;
}

inline PipelineState stage_histogram(PipelineState s, const PipelineConfig& c) {
  if (!s.inputs) throw StageError("histogram", "no volumes loaded");
  const auto t0 = detail::Clock::now();
  s.histogram = detail::run_stage("histogram", [&] {
    auto h = std::make_shared<HistogramStage>();
    h->histogram = compute_joint_histogram(s.inputs->v1, s.inputs->v2, c.bins, c.ranges);
    h->density = log_normalize(h->histogram);
    h->axis1 = axis_projection_histogram(h->histogram, 1);
    h->axis2 = axis_projection_histogram(h->histogram, 2);
    return std::shared_ptr<const HistogramStage>(std::move(h));
  });
  s.topology.reset();
  s.graph.reset();
  s.paths.reset();
  s.fusion.reset();
  s.timings_ms["histogram"] = detail::elapsed_ms(t0);
  return s;
}

/// Simplification and extremum graph, then the weighted graph and its MST.
inline PipelineState stage_topology(PipelineState s, const PipelineConfig& c) {
  if (!s.histogram) throw StageError("topology", "no histogram computed");
  auto t0 = detail::Clock::now();
  s.topology = detail::run_stage("topology", [&] {
    auto t = std::make_shared<TopologyStage>();
    t->threshold = c.persistence_threshold;
    t->simplified = simplify(s.histogram->density, c.persistence_threshold);
    for (const auto& cp : classify_critical_points(t->simplified)) {
      if (cp.kind == CriticalKind::maximum) ++t->maxima;
      else if (cp.kind == CriticalKind::minimum) ++t->minima;
      else ++t->saddles;
    }
    t->extremum_graph = extract_extremum_graph(t->simplified);
    return std::shared_ptr<const TopologyStage>(std::move(t));
  });
  s.timings_ms["simplification_and_ms_complex"] = detail::elapsed_ms(t0);
  t0 = detail::Clock::now();
  s.graph = detail::run_stage("graph", [&] {
    auto g = std::make_shared<GraphStage>();
    // weights come from the unsimplified density
    g->graph = build_weighted_graph(s.topology->extremum_graph, s.histogram->density, c.noise_floor);
    g->mst = minimum_spanning_tree(g->graph);
    return std::shared_ptr<const GraphStage>(std::move(g));
  });
  s.paths.reset();
  s.fusion.reset();
  s.timings_ms["graph"] = detail::elapsed_ms(t0);
  return s;
}

/// MST diameter, or one path per selection; each trimmed by tau.
inline PipelineState stage_paths(PipelineState s, const PipelineConfig& c) {
  if (!s.graph) throw StageError("paths", "no graph computed");
  const auto t0 = detail::Clock::now();
  s.paths = detail::run_stage("paths", [&] {
    auto p = std::make_shared<PathStage>();
    if (c.selections.empty())
      p->paths.push_back(tree_diameter_path(s.graph->mst, c.path_metric, detail::hanging_saddles_excluded(c)));
    else
      p->paths = select_branches(s.graph->mst, c.selections);
    for (auto& path : p->paths) path = trim_low_density(path, s.histogram->density, c.tau);
    return std::shared_ptr<const PathStage>(std::move(p));
  });
  s.fusion.reset();
  s.timings_ms["paths"] = detail::elapsed_ms(t0);
  return s;
}

inline FusionMode resolve_mode(FusionModeChoice m, std::size_t branches) {
  if (m == FusionModeChoice::automatic) return branches == 1 ? FusionMode::single : FusionMode::merged;
  if (m == FusionModeChoice::single && branches != 1)
    throw InputError("single fusion mode needs exactly one branch (got " + std::to_string(branches) + ")");
  return m == FusionModeChoice::single ? FusionMode::single : FusionMode::merged;
}

/// Spline fit, arc-length sampling, grid parameterization and pullback.
inline PipelineState stage_fuse(PipelineState s, const PipelineConfig& c) {
  if (!s.paths) throw StageError("fusion", "no path selected");
  const auto t0 = detail::Clock::now();
  s.fusion = detail::run_stage("fusion", [&] {
    auto f = std::make_shared<FusionStage>();
    const auto& hs = *s.histogram;
    const std::size_t n = hs.density.n;
    f->mode = resolve_mode(c.fusion_mode, s.paths->paths.size());
    std::vector<ProjectionIndex> idxs;
    for (const auto& path : s.paths->paths) {
      f->curves.push_back(fit_smoothing_spline(path, c.smoothing_factor, n));
      f->samples.push_back(sample_arclength(f->curves.back(), c.sample_count, path.branch_id));
      idxs.push_back(build_projection_index(f->samples.back()));
    }
    f->field = f->mode == FusionMode::single ? parameterize_grid(hs.density, f->samples[0], idxs[0], c.threads)
                                             : parameterize_multibranch(hs.density, f->samples, idxs, c.threads);
    f->fused = c.pullback == Pullback::nearest_bin
                   ? fuse_volumes(s.inputs->v1, s.inputs->v2, f->field, hs.histogram, c.threads)
                   : fuse_volumes_continuous(s.inputs->v1, s.inputs->v2, hs.histogram, f->samples, idxs, f->mode,
                                             c.threads);
    f->spline_density = spline_density_histogram(hs.histogram, f->field, c.density_bins);
    f->peaks = count_peaks(f->spline_density, c.min_persistence);
    return std::shared_ptr<const FusionStage>(std::move(f));
  });
  s.timings_ms["fusion"] = detail::elapsed_ms(t0);
  return s;
}

inline PipelineState run_pipeline(const PipelineConfig& c) {
  validate(c);
  PipelineState s = stage_load(c);
  s = stage_histogram(std::move(s), c);
  s = stage_topology(std::move(s), c);
  s = stage_paths(std::move(s), c);
  return stage_fuse(std::move(s), c);
}

// ----------------------------------------------------------------- artifacts

using ArtifactMap = std::map<std::string, std::string>;

inline std::size_t sample_stride(std::size_t count) { return std::max<std::size_t>(1, count / 1000); }

/// Every artifact the state holds, keyed by file name.
inline ArtifactMap collect_artifacts(const PipelineState& s, const PipelineConfig& c) {
  ArtifactMap out;
  if (s.histogram) {
    const auto& h = s.histogram->histogram;
    const AxisRanges r{h.binning.range1(), h.binning.range2()};
    out["histogram2d.json"] = dump(to_json(h));
    out["histogram2d_counts.grid"] = encode_counts(h);
    out["density.grid"] = encode_grid(h.n(), s.histogram->density.values, r);
    out["axis1.json"] = dump(to_json(s.histogram->axis1));
    out["axis1.csv"] = to_csv(s.histogram->axis1);
    out["axis2.json"] = dump(to_json(s.histogram->axis2));
    out["axis2.csv"] = to_csv(s.histogram->axis2);
    if (s.topology) {
      out["simplified.grid"] = encode_grid(h.n(), s.topology->simplified.values, r);
      out["extremum_graph.json"] = dump(to_json(s.topology->extremum_graph));
    }
    if (s.graph) {
      out["weighted_graph.json"] = dump(to_json(s.graph->graph));
      out["mst.json"] = dump(to_json(s.graph->mst, "mst"));
    }
    if (s.paths) out["paths.json"] = dump(to_json(s.paths->paths));
    if (s.fusion) {
      const auto& f = *s.fusion;
      Json curves = detail::header("bsplines");
      curves["curves"] = Json::array();
      for (const auto& curve : f.curves) curves["curves"].push_back(to_json(curve));
      out["splines.json"] = dump(curves);
      for (const auto& smp : f.samples)
        out["spline_samples_" + std::to_string(smp.branch_id) + ".json"] = dump(to_json(smp, sample_stride(smp.size())));
      out["parameterization.grid"] = encode_grid(f.field.n, f.field.values, r);
      out["branch_assignment.grid"] = encode_assignment(f.field, r);
      WriteOptions opt;
      opt.dtype = c.fused_dtype;
      if (c.fused_dtype == DType::u16) opt.quantization = Quantization{65535.0 / f.field.upper(), 0.0};
      out["fused.nrrd"] = encode_nrrd(f.fused, opt);
      out["spline_density.json"] = dump(to_json(f.spline_density));
      out["spline_density.csv"] = to_csv(f.spline_density);
      out["peaks.json"] = dump(to_json(f.peaks, c.min_persistence));
    }
  }
  return out;
}

inline Json make_manifest(const PipelineState& s, const PipelineConfig& c, const ArtifactMap& artifacts) {
  Json m = detail::header("manifest");
  m["config"] = to_json(c);
  Json hashes = Json::object();
  for (const auto& [name, bytes] : artifacts) hashes[name] = {{"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}};
  m["artifacts"] = std::move(hashes);
  Json timings = Json::object();
  for (const auto& [stage, ms] : s.timings_ms) timings[stage] = ms;
  auto get = [&](const char* k) { return s.timings_ms.contains(k) ? s.timings_ms.at(k) : 0.0; };
  timings["graph_to_fusion"] = get("graph") + get("paths") + get("fusion");
  m["timings_ms"] = std::move(timings);
  if (s.inputs) m["warnings"] = s.inputs->warnings;
  if (s.histogram) {
    m["axis_peaks"] = {count_peaks(s.histogram->axis1, c.min_persistence).count,
                       count_peaks(s.histogram->axis2, c.min_persistence).count};
  }
  if (s.topology)
    m["critical_points"] = {{"maxima", s.topology->maxima}, {"saddles", s.topology->saddles}, {"minima", s.topology->minima}};
  if (s.fusion) {
    m["fusion_mode"] = to_string(s.fusion->mode);
    m["spline_density_peaks"] = s.fusion->peaks.count;
  }
  return m;
}

/// Writes every artifact plus manifest.json into dir.
inline Json write_outputs(const PipelineState& s, const PipelineConfig& c, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create output directory '" + dir.string() + "': " + ec.message());
  const ArtifactMap artifacts = collect_artifacts(s, c);
  for (const auto& [name, bytes] : artifacts) detail::write_bytes(dir / name, bytes);
  Json manifest = make_manifest(s, c, artifacts);
  detail::write_bytes(dir / "manifest.json", dump(manifest));
  return manifest;
}

}  // namespace topofuse
