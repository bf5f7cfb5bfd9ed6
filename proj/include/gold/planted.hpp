#pragma once

// Synthetic graphs with planted chain-rule structure. Nodes are split into
// equal communities; each rule instance draws its four chain nodes from one
// community and adds the three body edges plus the head edge.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gold/error.hpp"
#include "gold/graph.hpp"
#include "gold/random.hpp"
#include "gold/rules.hpp"

namespace gold {

struct PlantedOptions {
  std::size_t nodes = 300;
  std::size_t communities = 10;
  std::size_t target_edges = 1500;
  std::uint64_t seed = 0;
};

inline constexpr std::array<const char*, 8> kPlantedRelations = {"IsA",      "UsedFor",    "PartOf",  "HasA",
                                                                  "CapableOf", "AtLocation", "Causes", "HasPrerequisite"};

// head <- b1 . b2 . b3, all forward, as relation indices.
inline constexpr std::array<std::array<std::uint32_t, 4>, 5> kPlantedRules = {{
    {0, 3, 2, 0},
    {4, 3, 2, 4},
    {1, 5, 6, 1},
    {7, 7, 2, 7},
    {6, 0, 5, 4},
}};

struct PlantedGraph {
  Graph graph;
  std::vector<Rule> rules;  // the planted rules (support/confidence unset)
};

inline PlantedGraph planted_graph(const PlantedOptions& opts) {
  if (opts.communities == 0 || opts.nodes < 4 * opts.communities)
    throw ConfigError("planted graph needs at least four nodes per community");
  PlantedGraph pg;
  Graph& g = pg.graph;
  for (std::size_t i = 0; i < opts.nodes; ++i) g.intern_node("concept " + std::to_string(i));
  for (const char* r : kPlantedRelations) g.intern_relation(r);
  for (const auto& spec : kPlantedRules) {
    Rule r;
    r.head = spec[0];
    for (std::size_t i = 1; i < 4; ++i) r.body.push_back({spec[i], Direction::Forward});
    pg.rules.push_back(std::move(r));
  }

  const std::size_t per = opts.nodes / opts.communities;
  Rng rng(opts.seed);
  std::size_t stalls = 0;
  while (g.num_edges() < opts.target_edges) {
    const auto& spec = kPlantedRules[rng.below(kPlantedRules.size())];
    const std::size_t base = rng.below(opts.communities) * per;
    std::array<NodeId, 4> chain{};
    for (std::size_t i = 0; i < 4; ++i) {
      bool fresh;
      do {
        chain[i] = static_cast<NodeId>(base + rng.below(per));
        fresh = true;
        for (std::size_t j = 0; j < i; ++j) fresh = fresh && chain[j] != chain[i];
      } while (!fresh);
    }
    const std::size_t before = g.num_edges();
    for (std::size_t i = 0; i < 3; ++i) g.add_edge(Triple{chain[i], spec[i + 1], chain[i + 1]});
    g.add_edge(Triple{chain[0], spec[0], chain[3]});
    stalls = g.num_edges() == before ? stalls + 1 : 0;
    if (stalls > 10000) throw DataError("planted graph saturated before reaching the edge target");
  }
  return pg;
}

}  // namespace gold
