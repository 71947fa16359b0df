#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "topofuse/artifacts.hpp"
#include "topofuse/synth.hpp"

using namespace topofuse;

namespace {

struct Fixture {
  GridField field;
  ExtremumGraph graph;
  WeightedGraph weighted;
  TreePath path;
};

Fixture bumps() {
  Fixture x;
  x.field = generate_bump_field({{{6, 6}, 2.0, 1.0}, {{18, 6}, 2.0, 0.6}, {{12, 18}, 2.5, 0.8}}, 24);
  x.graph = extract_extremum_graph(x.field);
  x.weighted = build_weighted_graph(x.graph, x.field);
  x.path = tree_diameter_path(minimum_spanning_tree(x.weighted));
  return x;
}

}  // namespace

TEST(Artifacts, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Artifacts, GridRoundTrip) {
  std::mt19937_64 rng(600);
  const GridField f = oracle::random_smooth_field(rng, 17);
  const AxisRanges r{{-1.5, 2.0}, {0.0, 1000.0}};
  const GridPayload g = decode_grid(encode_grid(17, f.values, r));
  EXPECT_EQ(g.n, 17u);
  EXPECT_EQ(g.dtype, GridDType::f64);
  EXPECT_EQ(g.values, f.values);
  EXPECT_EQ(g.ranges, r);
  const std::string bytes = encode_grid(17, f.values, r);
  EXPECT_EQ(bytes.substr(0, 8), "TFGRID01");
  EXPECT_EQ(bytes.size(), 8u + 8u + 32u + 17u * 17u * 8u);
  EXPECT_THROW(decode_grid(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_grid("NOTAGRID"), FormatError);
}

TEST(Artifacts, DecimationSumsOrMaxes) {
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t m = 0;
  EXPECT_EQ(decimate(3, v, 2, false, m), (std::vector<double>{12, 9, 15, 9}));
  EXPECT_EQ(m, 2u);
  EXPECT_EQ(decimate(3, v, 2, true, m), (std::vector<double>{5, 6, 8, 9}));
}

TEST(Artifacts, GraphJsonRoundTrip) {
  const Fixture x = bumps();
  const ExtremumGraph g = extremum_graph_from_json(Json::parse(dump(to_json(x.graph))));
  EXPECT_EQ(dump(to_json(g)), dump(to_json(x.graph)));
  const WeightedGraph w = weighted_graph_from_json(Json::parse(dump(to_json(x.weighted))));
  ASSERT_EQ(w.edges.size(), x.weighted.edges.size());
  for (std::size_t k = 0; k < w.edges.size(); ++k) EXPECT_EQ(w.edges[k].weight, x.weighted.edges[k].weight);
  EXPECT_EQ(w.density, x.weighted.density);
}

TEST(Artifacts, PathJsonRoundTrip) {
  const Fixture x = bumps();
  const Json j = to_json(x.path);
  EXPECT_EQ(j.at("schema_version"), 1);
  ASSERT_EQ(j.at("nodes").size(), x.path.nodes.size());
  EXPECT_EQ(j.at("nodes")[0].at("i"), x.path.nodes[0].at.i);
  EXPECT_EQ(j.at("nodes")[0].at("density"), x.path.nodes[0].density);
  const TreePath p = tree_path_from_json(Json::parse(dump(j)));
  EXPECT_EQ(dump(to_json(p)), dump(j));
  EXPECT_EQ(p.polyline, x.path.polyline);
  const auto many = tree_paths_from_json(to_json(std::vector<TreePath>{x.path, x.path}));
  EXPECT_EQ(many.size(), 2u);
}

TEST(Artifacts, UnknownSchemaVersionIsRejected) {
  const Fixture x = bumps();
  Json j = to_json(x.graph);
  j["schema_version"] = 99;
  EXPECT_THROW(extremum_graph_from_json(j), FormatError);
  Json p = to_json(x.path);
  p.erase("schema_version");
  EXPECT_THROW(tree_path_from_json(p), FormatError);
  EXPECT_THROW(tree_path_from_json(to_json(x.graph)), FormatError);  // wrong kind
}

TEST(Artifacts, DecimatedSamplesKeepEnds) {
  std::vector<Point2> line{{0, 0}, {5, 1}, {10, 0}};
  const SplineSamples s = sample_arclength(fit_smoothing_spline(line, 0.0), 1001);
  const Json j = to_json(s, 300);
  EXPECT_EQ(j.at("stride"), 300);
  ASSERT_EQ(j.at("cum_length").size(), 5u);  // 0, 300, 600, 900, 1000
  EXPECT_EQ(j.at("cum_length").back(), s.total_length);
}

TEST(Artifacts, Histogram1DJsonAndCsv) {
  Histogram1D h;
  h.edges = uniform_edges(0.0, 1.0, 4);
  h.weights = {1, 5, 2, 0.5};
  h.label = "test";
  const Histogram1D j = histogram1d_from_json(to_json(h));
  EXPECT_EQ(j.weights, h.weights);
  EXPECT_EQ(j.edges, h.edges);
  const std::string csv = to_csv(h);
  EXPECT_EQ(csv.substr(0, 18), "bin_center,weight\n");
  const Histogram1D c = histogram1d_from_csv(csv);
  EXPECT_EQ(c.weights, h.weights);
  for (std::size_t b = 0; b < 4; ++b) EXPECT_NEAR(c.center(b), h.center(b), 1e-15);
}

TEST(Artifacts, BSplineRoundTrip) {
  std::vector<Point2> line{{0, 0}, {5, 1}, {10, 0}, {12, 4}, {9, 9}};
  const BSplineCurve c = fit_smoothing_spline(line, 0.0);
  const BSplineCurve d = bspline_from_json(Json::parse(dump(to_json(c))));
  EXPECT_EQ(d.knots, c.knots);
  EXPECT_EQ(d.coeffs, c.coeffs);
}
