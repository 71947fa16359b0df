// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <sys/wait.h>

#include "oracles.hpp"
#include "topofuse/topofuse.hpp"

using namespace topofuse;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Default synthetic pair, 1000 bins, threshold 0, smoothing 0.01:
/// exactly 8 spline-density peaks and 3 peaks on each axis within 120 s.
void criterion1() {
  const auto t0 = Clock::now();
  try {
    const PipelineConfig c = config_from_json(Json::parse(
        R"({"inputs": {"synth": {}}, "bins": 1000, "persistence_threshold": 0, "smoothing_factor": 0.01})"));
    const PipelineState s = run_pipeline(c);
    const std::size_t peaks = s.fusion->peaks.count;
    const std::size_t a1 = count_peaks(s.histogram->axis1, c.min_persistence).count;
    const std::size_t a2 = count_peaks(s.histogram->axis2, c.min_persistence).count;
    const double secs = seconds_since(t0);
    report(1, peaks == 8 && a1 == 3 && a2 == 3 && secs <= 120.0,
           fmt("spline peaks %zu (want 8), axis peaks %zu/%zu (want 3/3), %.1f s (limit 120)", peaks, a1, a2, secs));
  } catch (const std::exception& e) {
    report(1, false, std::string("exception: ") + e.what());
  }
}

/// Projection index against a full scan: 50 instances of 1e3 samples and
/// 1e4 queries plus one of 1e6 samples and 1e3 queries, no mismatches.
void criterion2() {
  std::mt19937_64 rng(2002);
  std::size_t mismatches = 0, queries = 0;
  double index_secs = 0.0;
  const auto t0 = Clock::now();
  auto run = [&](std::size_t samples, std::size_t count) {
    const auto poly = oracle::random_polyline(rng, 30, 100.0);
    const SplineSamples s = sample_arclength(fit_smoothing_spline(poly, 1e-3, 100.0), samples);
    std::uniform_real_distribution<double> u(-10.0, 110.0);
    std::vector<Point2> qs;
    for (std::size_t q = 0; q < count; ++q)
      qs.push_back(q % 4 == 0 ? Point2{std::floor(u(rng)), std::floor(u(rng))} : Point2{u(rng), u(rng)});
    const auto ti = Clock::now();
    const ProjectionIndex idx = build_projection_index(s);
    std::vector<std::size_t> got(count);
    for (std::size_t q = 0; q < count; ++q) got[q] = idx.nearest(qs[q]).index;
    index_secs += seconds_since(ti);
    for (std::size_t q = 0; q < count; ++q) mismatches += got[q] != oracle::nearest_by_scan(s.points, qs[q]);
    queries += count;
  };
  try {
    for (int k = 0; k < 50; ++k) run(1'000, 10'000);
    run(1'000'000, 1'000);
    const double secs = seconds_since(t0);
    report(2, mismatches == 0 && secs <= 60.0,
           fmt("%zu mismatches in %zu queries, %.1f s total (limit 60), %.2f s in the index", mismatches, queries,
               secs, index_secs));
  } catch (const std::exception& e) {
    report(2, false, std::string("exception: ") + e.what());
  }
}

/// Persistence pairs of 200 random fields up to 32x32 match the flood-fill
/// oracle to 1e-12; simplification leaves no pair below t * range.
void criterion3() {
  std::mt19937_64 rng(3003);
  std::uniform_int_distribution<std::size_t> size(2, 32);
  std::uniform_real_distribution<double> thr(0.0, 0.5);
  std::size_t pair_mismatch = 0, survivors = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = size(rng);
    const GridField f = trial % 2 ? oracle::random_field(rng, n, 2 + trial % 7) : oracle::random_smooth_field(rng, n);
    std::vector<oracle::Pair> got;
    for (const auto& p : compute_persistence_pairs(f)) got.push_back({p.creator.vertex, p.destroyer.vertex, p.persistence});
    std::sort(got.begin(), got.end());
    const auto want = oracle::persistence_pairs(f);
    if (got.size() != want.size()) {
      ++pair_mismatch;
    } else {
      for (std::size_t k = 0; k < got.size(); ++k)
        if (got[k].maximum != want[k].maximum || got[k].saddle != want[k].saddle ||
            std::abs(got[k].persistence - want[k].persistence) > 1e-12) {
          ++pair_mismatch;
          break;
        }
    }
    const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
    const double t = thr(rng);
    const GridField g = simplify(f, t);
    for (const auto& p : oracle::persistence_pairs(g)) survivors += p.persistence < t * (*hi - *lo);
  }
  report(3, pair_mismatch == 0 && survivors == 0,
         fmt("%zu/200 fields with mismatched pairs, %zu pairs below threshold after simplification", pair_mismatch,
             survivors));
}

/// MST weight against exhaustive search on 100 graphs up to 10 nodes;
/// diameter against all-pairs search on 100 trees up to 12 nodes.
void criterion4() {
  std::mt19937_64 rng(4004);
  std::size_t mst_bad = 0, diam_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nodes = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
    const std::size_t max_edges = std::min<std::size_t>(nodes * (nodes - 1) / 2, 16);
    const auto edges = oracle::random_graph(rng, nodes, std::uniform_int_distribution<std::size_t>(1, max_edges)(rng), trial % 2);
    const WeightedGraph t = minimum_spanning_tree(oracle::to_weighted_graph(nodes, edges));
    mst_bad += std::abs(t.total_weight() - oracle::exhaustive_msf_weight(nodes, edges)) > 1e-12;
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nodes = std::uniform_int_distribution<std::size_t>(2, 12)(rng);
    const auto edges = oracle::random_tree(rng, nodes);
    const TreePath p = tree_diameter_path(oracle::to_weighted_graph(nodes, edges));
    diam_bad += std::abs(p.weight - oracle::all_pairs_diameter(nodes, edges)) > 1e-12;
  }
  report(4, mst_bad == 0 && diam_bad == 0,
         fmt("%zu/100 spanning forests and %zu/100 diameters disagree with exhaustive search", mst_bad, diam_bad));
}

/// Random 32^3 pairs: counts sum to the voxel count; single-mode F in [0,1];
/// merged F in [0,k) with floor(F) equal to the branch; 1e4 sampled voxels
/// take exactly the F of their histogram bin.
void criterion5() {
  std::mt19937_64 rng(5005);
  std::size_t bad_sum = 0, bad_single = 0, bad_merged = 0, bad_pullback = 0;
  const std::size_t n = 64;
  for (int trial = 0; trial < 3; ++trial) {
    const Volume v1 = oracle::random_volume(rng, {32, 32, 32}, trial == 2);
    const Volume v2 = oracle::random_volume(rng, {32, 32, 32}, trial == 2);
    const Histogram2D h = compute_joint_histogram(v1, v2, n);
    bad_sum += std::accumulate(h.counts.begin(), h.counts.end(), std::uint64_t{0}) != v1.values.size();
    const DensityField d = log_normalize(h);
    std::vector<SplineSamples> samples;
    std::vector<ProjectionIndex> idxs;
    const std::size_t k = 2 + static_cast<std::size_t>(trial);
    for (std::size_t q = 0; q < k; ++q) {
      const auto poly = oracle::random_polyline(rng, 20, static_cast<double>(n));
      samples.push_back(sample_arclength(fit_smoothing_spline(poly, 1e-3, double(n)), 5000, int(q)));
      idxs.push_back(build_projection_index(samples.back()));
    }
    const FusedField single = parameterize_grid(d, samples[0], idxs[0]);
    for (double x : single.values) bad_single += !(x >= 0.0 && x <= 1.0);
    const FusedField merged = parameterize_multibranch(d, samples, idxs);
    for (std::size_t c = 0; c < merged.values.size(); ++c) {
      const double x = merged.values[c];
      bad_merged += !(x >= 0.0 && x < double(k)) || static_cast<std::int32_t>(std::floor(x)) != merged.branch_assignment[c];
    }
    for (const FusedField* f : {&single, &merged}) {
      const Volume fused = fuse_volumes(v1, v2, *f, h);
      std::uniform_int_distribution<std::size_t> voxel(0, v1.values.size() - 1);
      for (int s = 0; s < 10'000; ++s) {
        const std::size_t t = voxel(rng);
        const std::size_t c = oracle::bin_of(v2.values[t], v2.vmin, v2.vmax, n) * n +
                              oracle::bin_of(v1.values[t], v1.vmin, v1.vmax, n);
        bad_pullback += fused.values[t] != f->values[c];
      }
    }
  }
  report(5, bad_sum + bad_single + bad_merged + bad_pullback == 0,
         fmt("count-sum failures %zu, single out of [0,1] %zu, merged range/floor failures %zu, pullback mismatches %zu",
             bad_sum, bad_single, bad_merged, bad_pullback));
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(TOPOFUSE_CLI) + " " + args + " > /dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Two CLI runs of the same config produce identical artifact hashes.
void criterion6() {
  try {
    const fs::path root = fs::temp_directory_path() / "topofuse_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "config.json";
    detail::write_bytes(cfg, R"({"inputs": {"synth": {}}, "bins": 1000})");
    const int a = run_cli("fuse -c " + cfg.string() + " -o " + (root / "a").string());
    const int b = run_cli("--threads 2 fuse -c " + cfg.string() + " -o " + (root / "b").string());
    if (a != 0 || b != 0) {
      report(6, false, fmt("CLI exit codes %d and %d", a, b));
      return;
    }
    const Json ma = read_json(root / "a" / "manifest.json").at("artifacts");
    const Json mb = read_json(root / "b" / "manifest.json").at("artifacts");
    std::size_t differ = 0;
    for (const auto& [name, entry] : ma.items())
      differ += !mb.contains(name) || mb.at(name).at("sha256") != entry.at("sha256") ||
                sha256_hex(detail::read_bytes(root / "b" / name)) != entry.at("sha256");
    report(6, differ == 0 && ma.size() == mb.size(),
           fmt("%zu of %zu artifacts differ between runs", differ, ma.size()));
  } catch (const std::exception& e) {
    report(6, false, std::string("exception: ") + e.what());
  }
}

/// Two branches fused in merged mode: values in [0,2), floor(F) is the
/// branch, and each branch's arc-length share spans nearly all of [0,1].
void criterion7() {
  try {
    PipelineConfig c = config_from_json(Json::parse(R"({"inputs": {"synth": {}}, "bins": 1000, "fusion_mode": "merged"})"));
    PipelineState s = stage_paths(stage_topology(stage_histogram(stage_load(c), c), c), c);
    const auto& nodes = s.paths->paths.at(0).nodes;
    const std::size_t mid = nodes.size() / 2;
    c.selections = {{nodes.front().id, nodes[mid].id}, {nodes[mid].id, nodes.back().id}};
    s = stage_fuse(stage_paths(std::move(s), c), c);
    const Volume& fused = s.fusion->fused;
    const FusedField& f = s.fusion->field;
    std::size_t out_of_range = 0, floor_bad = 0;
    for (double x : fused.values) out_of_range += !(x >= 0.0 && x < 2.0);
    double lo[2] = {1, 1}, hi[2] = {0, 0};
    for (std::size_t cell = 0; cell < f.values.size(); ++cell) {
      const auto b = static_cast<std::size_t>(f.branch_assignment[cell]);
      floor_bad += static_cast<std::size_t>(std::floor(f.values[cell])) != b;
      const double ell = f.values[cell] - double(b);
      lo[b] = std::min(lo[b], ell);
      hi[b] = std::max(hi[b], ell);
    }
    const bool spans = lo[0] <= 0.01 && lo[1] <= 0.01 && hi[0] >= 0.99 && hi[1] >= 0.99;
    report(7, s.fusion->mode == FusionMode::merged && out_of_range == 0 && floor_bad == 0 && spans,
           fmt("%zu voxels outside [0,2), %zu cells with floor != branch, ell spans [%.3f,%.3f] and [%.3f,%.3f]",
               out_of_range, floor_bad, lo[0], hi[0], lo[1], hi[1]));
  } catch (const std::exception& e) {
    report(7, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  std::printf("%s: %d of 7 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
