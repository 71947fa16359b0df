// topofuse command line: every pipeline stage runnable on its own, plus
// the full `fuse` run driven by a config file.
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage or configuration error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topofuse/topofuse.hpp"

namespace fs = std::filesystem;
using namespace topofuse;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_files(const std::vector<std::string>& paths) {
  for (const auto& p : paths) {
    fs::path q = p;
    if (q.extension() == ".meta") q.replace_extension();
    if (!fs::exists(q)) throw UsageError("input file '" + p + "' does not exist");
  }
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::write_bytes(path, bytes);
}

GridField read_grid_field(const std::string& path) {
  const GridPayload g = decode_grid(detail::read_bytes(path));
  return GridField(g.n, g.values);
}

Histogram1D read_histogram1d(const std::string& path) {
  const std::string text = detail::read_bytes(path);
  if (fs::path(path).extension() == ".csv") return histogram1d_from_csv(text);
  return histogram1d_from_json(parse_json(text, path));
}

WeightedGraph read_tree(const std::string& path) {
  const Json j = read_json(path);
  const std::string kind = j.value("kind", std::string{});
  if (kind == "mst") return weighted_graph_from_json(j, "mst");
  return minimum_spanning_tree(weighted_graph_from_json(j));
}

std::vector<TreePath> read_paths(const std::string& path) {
  const Json j = read_json(path);
  if (j.value("kind", std::string{}) == "tree_path") return {tree_path_from_json(j)};
  return tree_paths_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topofuse: topology-guided fusion of co-registered volume pairs"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = all cores)");

  // correlate
  std::vector<std::string> corr_inputs;
  std::size_t corr_bins = 256;
  auto* correlate = app.add_subcommand("correlate", "Rank volume pairs by Pearson correlation");
  correlate->add_option("volumes", corr_inputs, "Volumes (raw+meta or NRRD)")->required()->expected(2, -1);
  correlate->add_option("--bins", corr_bins, "Bins for the joint histograms");

  // histogram
  std::vector<std::string> hist_inputs;
  std::size_t hist_bins = 1000;
  std::string hist_out = "out";
  auto* histogram = app.add_subcommand("histogram", "Joint histogram and log-density grid");
  histogram->add_option("volumes", hist_inputs, "Two volumes")->required()->expected(2);
  histogram->add_option("--bins", hist_bins, "Bins per axis");
  histogram->add_option("-o,--out", hist_out, "Output directory");

  // topo
  std::string topo_density, topo_out = "out";
  double topo_threshold = 0.0;
  auto* topo = app.add_subcommand("topo", "Simplify a density grid and extract its extremum graph");
  topo->add_option("density", topo_density, "Density grid (.grid)")->required();
  topo->add_option("-t,--threshold", topo_threshold, "Persistence threshold as a fraction of the value range");
  topo->add_option("-o,--out", topo_out, "Output directory");

  // path
  std::string path_graph, path_density, path_out = "path.json", path_metric = "weight";
  std::vector<std::size_t> path_endpoints;
  double path_tau = 0.0;
  std::optional<double> path_floor = 0.0;
  auto* path = app.add_subcommand("path", "Diameter or chosen path in the maximum spanning forest");
  path->add_option("graph", path_graph, "weighted_graph.json or mst.json")->required();
  path->add_option("--density", path_density, "Density grid for tau trimming");
  path->add_option("--endpoints", path_endpoints, "Two node ids")->expected(2);
  path->add_option("--tau", path_tau, "Trim end nodes with density below tau");
  path->add_option("--metric", path_metric, "Diameter metric: weight or hops")->check(CLI::IsMember({"weight", "hops"}));
  path->add_flag("--keep-hanging-saddles", [&](std::int64_t) { path_floor.reset(); },
                 "Allow degree-one saddles as diameter endpoints");
  path->add_option("-o,--out", path_out, "Output JSON");

  // spline
  std::string spline_path, spline_out = "out";
  double spline_s = 0.01;
  std::size_t spline_n = 1000, spline_samples = 1'000'000;
  auto* spline = app.add_subcommand("spline", "Fit smoothing splines to paths and sample them by arc length");
  spline->add_option("paths", spline_path, "paths.json or a tree_path document")->required();
  spline->add_option("-s,--smoothing", spline_s, "Smoothing factor");
  spline->add_option("-n,--bins", spline_n, "Histogram bins per axis (residual unit)");
  spline->add_option("--samples", spline_samples, "Arc-length samples per branch");
  spline->add_option("-o,--out", spline_out, "Output directory");

  // fuse
  std::string fuse_config;
  std::optional<std::size_t> o_bins, o_samples;
  std::optional<double> o_threshold, o_smoothing, o_tau;
  std::optional<std::string> o_out;
  bool use_synth = false;
  auto* fuse = app.add_subcommand("fuse", "Run the full pipeline and write every artifact plus a manifest");
  fuse->add_option("-c,--config", fuse_config, "Pipeline config (JSON)");
  fuse->add_flag("--synth", use_synth, "Use the synthetic ring-of-blobs inputs with default parameters");
  fuse->add_option("--bins", o_bins);
  fuse->add_option("--threshold", o_threshold, "persistence_threshold");
  fuse->add_option("--smoothing", o_smoothing, "smoothing_factor");
  fuse->add_option("--samples", o_samples, "sample_count");
  fuse->add_option("--tau", o_tau);
  fuse->add_option("-o,--output-dir", o_out);

  // peaks
  std::string peaks_input;
  double peaks_min = 0.05;
  auto* peaks = app.add_subcommand("peaks", "Count persistent peaks of a 1D histogram");
  peaks->add_option("histogram", peaks_input, "histogram1d JSON or bin_center,weight CSV")->required();
  peaks->add_option("-m,--min-persistence", peaks_min, "Fraction of the highest bin");

  // synth
  CircularGaussiansParams sp;
  std::string synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "Write the synthetic volume pair");
  synth->add_option("--k", sp.k, "Number of blobs");
  synth->add_option("--radius", sp.radius);
  synth->add_option("--sigma", sp.sigma);
  synth->add_option("--voxels-per-blob", sp.voxels_per_blob);
  synth->add_option("--seed", sp.seed);
  synth->add_option("-o,--out", synth_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*correlate) {
      require_files(corr_inputs);
      std::vector<Volume> vols;
      for (const auto& p : corr_inputs) vols.push_back(read_volume(p));
      const auto report = pair_selection_report(vols, corr_bins);
      std::printf("%-24s %-24s %s\n", "first", "second", "pearson");
      for (const auto& r : report)
        std::printf("%-24s %-24s %.3f\n", corr_inputs[r.first].c_str(), corr_inputs[r.second].c_str(), r.correlation);
    } else if (*histogram) {
      require_files(hist_inputs);
      const Volume v1 = read_volume(hist_inputs[0]);
      const Volume v2 = read_volume(hist_inputs[1]);
      const Histogram2D h = compute_joint_histogram(v1, v2, hist_bins);
      const DensityField d = log_normalize(h);
      const fs::path dir = hist_out;
      write_file(dir / "histogram2d.json", dump(to_json(h)));
      write_file(dir / "histogram2d_counts.grid", encode_counts(h));
      write_file(dir / "density.grid", encode_grid(h.n(), d.values, {h.binning.range1(), h.binning.range2()}));
      for (int axis : {1, 2}) {
        const auto a = axis_projection_histogram(h, axis);
        write_file(dir / ("axis" + std::to_string(axis) + ".json"), dump(to_json(a)));
        write_file(dir / ("axis" + std::to_string(axis) + ".csv"), to_csv(a));
      }
      std::printf("%zu x %zu bins, %llu voxels -> %s\n", h.n(), h.n(), static_cast<unsigned long long>(h.total_count),
                  hist_out.c_str());
    } else if (*topo) {
      require_files({topo_density});
      const GridPayload g = decode_grid(detail::read_bytes(topo_density));
      const GridField d(g.n, g.values);
      const GridField s = simplify(d, topo_threshold);
      const ExtremumGraph eg = extract_extremum_graph(s);
      const WeightedGraph wg = build_weighted_graph(eg, d, 0.0);
      const fs::path dir = topo_out;
      write_file(dir / "simplified.grid", encode_grid(g.n, s.values, g.ranges));
      write_file(dir / "extremum_graph.json", dump(to_json(eg)));
      write_file(dir / "weighted_graph.json", dump(to_json(wg)));
      write_file(dir / "mst.json", dump(to_json(minimum_spanning_tree(wg), "mst")));
      std::printf("maxima %zu saddles %zu separatrices %zu\n", eg.maxima.size(), eg.saddles.size(), eg.edges.size());
    } else if (*path) {
      require_files({path_graph});
      const WeightedGraph t = read_tree(path_graph);
      TreePath p = path_endpoints.empty()
                       ? tree_diameter_path(t, path_metric == "weight" ? PathMetric::weight : PathMetric::hops,
                                            path_floor.has_value() || path_tau > 0.0)
                       : subpath_between(t, path_endpoints[0], path_endpoints[1]);
      if (path_tau > 0.0) {
        if (path_density.empty()) throw UsageError("--tau needs --density");
        require_files({path_density});
        p = trim_low_density(p, read_grid_field(path_density), path_tau);
      }
      write_file(path_out, dump(to_json(p)));
      std::printf("path with %zu nodes, weight %.6g -> %s\n", p.nodes.size(), p.weight, path_out.c_str());
    } else if (*spline) {
      require_files({spline_path});
      const fs::path dir = spline_out;
      Json curves = detail::header("bsplines");
      curves["curves"] = Json::array();
      for (const auto& p : read_paths(spline_path)) {
        const BSplineCurve c = fit_smoothing_spline(p, spline_s, spline_n);
        const SplineSamples s = sample_arclength(c, spline_samples, p.branch_id);
        curves["curves"].push_back(to_json(c));
        write_file(dir / ("spline_samples_" + std::to_string(p.branch_id) + ".json"),
                   dump(to_json(s, sample_stride(s.size()))));
        std::printf("branch %d: %zu interior knots, length %.4g\n", p.branch_id, c.interior_knots(), s.total_length);
      }
      write_file(dir / "splines.json", dump(curves));
    } else if (*fuse) {
      Json cfg_json;
      if (!fuse_config.empty()) {
        require_files({fuse_config});
        cfg_json = read_json(fuse_config);
      } else if (use_synth) {
        cfg_json = {{"inputs", {{"synth", Json::object()}}}};
      } else {
        throw UsageError("fuse needs --config or --synth");
      }
      if (o_bins) cfg_json["bins"] = *o_bins;
      if (o_threshold) cfg_json["persistence_threshold"] = *o_threshold;
      if (o_smoothing) cfg_json["smoothing_factor"] = *o_smoothing;
      if (o_samples) cfg_json["sample_count"] = *o_samples;
      if (o_tau) cfg_json["tau"] = *o_tau;
      if (o_out) cfg_json["output_dir"] = *o_out;
      if (threads != 0) cfg_json["threads"] = threads;
      const PipelineConfig cfg = config_from_json(cfg_json);
      if (!cfg.synth) require_files(cfg.volumes);
      const PipelineState state = run_pipeline(cfg);
      const Json manifest = write_outputs(state, cfg, cfg.output_dir);
      for (const auto& w : state.inputs->warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("spline density peaks: %zu\n", state.fusion->peaks.count);
      std::printf("axis peaks: %s\n", manifest.at("axis_peaks").dump().c_str());
      std::printf("timings (ms): %s\n", manifest.at("timings_ms").dump().c_str());
      std::printf("artifacts -> %s\n", cfg.output_dir.c_str());
    } else if (*peaks) {
      require_files({peaks_input});
      const PeakReport r = count_peaks(read_histogram1d(peaks_input), peaks_min);
      std::cout << to_json(r, peaks_min).dump() << "\n";
    } else if (*synth) {
      const SynthPair p = generate_circular_gaussians(sp);
      for (const auto& w : p.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      const fs::path dir = synth_out;
      fs::create_directories(dir);
      WriteOptions opt;
      opt.dtype = DType::f64;
      write_volume(p.v1, dir / "synth_v1.nrrd", VolumeFormat::nrrd, opt);
      write_volume(p.v2, dir / "synth_v2.nrrd", VolumeFormat::nrrd, opt);
      std::printf("%zu x %zu x %zu voxels -> %s\n", p.v1.dims.nx, p.v1.dims.ny, p.v1.dims.nz, synth_out.c_str());
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
