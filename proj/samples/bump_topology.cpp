// Persistence pairs and simplification on a field with three bumps.

#include <cstdio>

#include "topofuse/topology.hpp"
#include "topofuse/synth.hpp"

using namespace topofuse;

int main() {
  const GridField f = generate_bump_field({{{10, 10}, 3.0, 1.0}, {{22, 12}, 3.0, 0.8}, {{16, 24}, 2.0, 0.3}}, 32);

  for (const auto& p : compute_persistence_pairs(f)) {
    const auto m = f.point(p.creator.vertex), s = f.point(p.destroyer.vertex);
    std::printf("max (%d,%d) dies at saddle (%d,%d), persistence %.4f\n", m.i, m.j, s.i, s.j, p.persistence);
  }

  for (double t : {0.0, 0.1, 0.5}) {
    const ExtremumGraph g = extract_extremum_graph(simplify(f, t));
    std::printf("threshold %.2f: %zu maxima, %zu saddles, %zu separatrices\n", t, g.maxima.size(), g.saddles.size(),
                g.edges.size());
  }
}
