#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "topofuse/pathfind.hpp"
#include "topofuse/synth.hpp"

using namespace topofuse;

TEST(Pathfind, SpanningForestIsMinimal) {
  std::mt19937_64 rng(200);
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_int_distribution<std::size_t> nodes_d(2, 9);
    const std::size_t nodes = nodes_d(rng);
    const auto edges = oracle::random_graph(rng, nodes, std::min<std::size_t>(14, nodes * (nodes - 1) / 2), trial % 2);
    const WeightedGraph t = minimum_spanning_tree(oracle::to_weighted_graph(nodes, edges));
    EXPECT_EQ(t.edges.size(), nodes - oracle::components(nodes, edges));
    EXPECT_NEAR(t.total_weight(), oracle::exhaustive_msf_weight(nodes, edges), 1e-12);
  }
}

TEST(Pathfind, DiameterIsLongestPath) {
  std::mt19937_64 rng(201);
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_int_distribution<std::size_t> nodes_d(2, 12);
    const std::size_t nodes = nodes_d(rng);
    const auto edges = oracle::random_tree(rng, nodes);
    const TreePath p = tree_diameter_path(oracle::to_weighted_graph(nodes, edges));
    EXPECT_NEAR(p.weight, oracle::all_pairs_diameter(nodes, edges), 1e-12);
    EXPECT_EQ(p.segments.size() + 1, p.nodes.size());
  }
}

TEST(Pathfind, HopMetricCountsEdges) {
  // path 0-1-2-3 with a heavy pendant edge 1-4
  const std::vector<oracle::Edge> edges{{0, 1, 0.1}, {1, 2, 0.1}, {2, 3, 0.1}, {1, 4, 5.0}};
  const WeightedGraph g = oracle::to_weighted_graph(5, edges);
  EXPECT_EQ(tree_diameter_path(g, PathMetric::hops).nodes.size(), 4u);
  EXPECT_NEAR(tree_diameter_path(g, PathMetric::weight).weight, 5.2, 1e-12);
}

TEST(Pathfind, ForestUsesHeaviestComponent) {
  const std::vector<oracle::Edge> edges{{0, 1, 0.5}, {2, 3, 0.4}, {3, 4, 0.4}};
  const TreePath p = tree_diameter_path(oracle::to_weighted_graph(5, edges));
  EXPECT_EQ(p.nodes.size(), 3u);
  EXPECT_NEAR(p.weight, 0.8, 1e-12);
}

TEST(Pathfind, SubpathErrors) {
  const std::vector<oracle::Edge> edges{{0, 1, 0.5}, {2, 3, 0.4}};
  const WeightedGraph g = oracle::to_weighted_graph(4, edges);
  try {
    subpath_between(g, 0, 3);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("disconnected"), std::string::npos);
  }
  EXPECT_THROW(subpath_between(g, 0, 9), InputError);
  const TreePath p = subpath_between(g, 1, 0);
  ASSERT_EQ(p.nodes.size(), 2u);
  EXPECT_EQ(p.nodes[0].id, 1u);
  EXPECT_EQ(p.segments[0].front(), (GridPoint{1, 0}));  // polyline reversed to run from node 1
}

TEST(Pathfind, GraphFromBumpsAndTrimming) {
  const GridField f = generate_bump_field({{{8, 8}, 3.0, 1.0}, {{24, 8}, 3.0, 0.7}, {{40, 8}, 3.0, 0.9}}, 48);
  const ExtremumGraph eg = extract_extremum_graph(f);
  const WeightedGraph g = build_weighted_graph(eg, f);
  EXPECT_EQ(g.node_count(), 5u);
  for (const auto& e : g.edges) EXPECT_DOUBLE_EQ(e.weight, std::abs(g.density[e.u] - g.density[e.v]));
  const WeightedGraph t = minimum_spanning_tree(g);
  const TreePath p = tree_diameter_path(t);
  ASSERT_EQ(p.nodes.size(), 5u);
  EXPECT_EQ(p.nodes.front().kind, CriticalKind::maximum);
  EXPECT_EQ(p.nodes.back().kind, CriticalKind::maximum);
  // polyline is a connected lattice walk from end to end
  for (std::size_t k = 1; k < p.polyline.size(); ++k)
    EXPECT_LE(std::abs(p.polyline[k].x - p.polyline[k - 1].x) + std::abs(p.polyline[k].y - p.polyline[k - 1].y), 2.0);

  const double tau = p.nodes.front().density + 1e-9;
  const TreePath q = trim_low_density(p, f, std::min(1.0, std::min(tau, p.nodes.back().density + 1e-9)));
  EXPECT_LT(q.nodes.size(), p.nodes.size());
  EXPECT_THROW(trim_low_density(p, f, 1.0 + 1e-9), InputError);
  EXPECT_EQ(trim_low_density(p, f, 0.0).nodes.size(), p.nodes.size());
}

TEST(Pathfind, FullTrimIsAnError) {
  const GridField f = generate_bump_field({{{8, 8}, 3.0, 0.5}, {{24, 8}, 3.0, 0.4}}, 32);
  const WeightedGraph t = minimum_spanning_tree(build_weighted_graph(extract_extremum_graph(f), f));
  const TreePath p = tree_diameter_path(t);
  try {
    trim_low_density(p, f, 0.9);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("fully trimmed"), std::string::npos);
  }
}

TEST(Pathfind, NoiseFloorDropsEmptyNodes) {
  std::vector<double> v(16 * 16, 0.0);
  v[5 * 16 + 5] = 1.0;
  v[5 * 16 + 10] = 0.5;
  v[6 * 16 + 6] = 0.25;
  v[5 * 16 + 7] = 0.25;
  v[5 * 16 + 8] = 0.25;
  v[5 * 16 + 9] = 0.25;
  const GridField f(16, v);
  const ExtremumGraph eg = extract_extremum_graph(f);
  const WeightedGraph all = build_weighted_graph(eg, f);
  const WeightedGraph kept = build_weighted_graph(eg, f, 0.0);
  EXPECT_LT(kept.node_count(), all.node_count());
  for (double d : kept.density) EXPECT_GT(d, 0.0);
}

TEST(Pathfind, SelectBranchesKeepsOrder) {
  const std::vector<oracle::Edge> edges{{0, 1, 0.5}, {1, 2, 0.4}, {2, 3, 0.3}};
  const auto paths = select_branches(oracle::to_weighted_graph(4, edges), {{0, 1}, {3, 2}});
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(paths[0].branch_id, 0);
  EXPECT_EQ(paths[1].branch_id, 1);
  EXPECT_EQ(paths[1].nodes.front().id, 3u);
  EXPECT_THROW(select_branches(oracle::to_weighted_graph(4, edges), {}), InputError);
}
