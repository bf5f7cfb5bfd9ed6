#pragma once

// Labeled noise benchmarks: inject corrupted triples into a clean graph.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "gold/error.hpp"
#include "gold/graph.hpp"
#include "gold/random.hpp"

namespace gold {

enum class CorruptionType : std::uint8_t { ReplaceHead = 0, ReplaceRelation = 1, ReplaceTail = 2, NewTriple = 3 };

inline constexpr std::array<CorruptionType, 4> kCorruptionTypes = {
    CorruptionType::ReplaceHead, CorruptionType::ReplaceRelation, CorruptionType::ReplaceTail,
    CorruptionType::NewTriple};

inline std::string_view to_string(CorruptionType c) {
  switch (c) {
    case CorruptionType::ReplaceHead: return "replace_head";
    case CorruptionType::ReplaceRelation: return "replace_relation";
    case CorruptionType::ReplaceTail: return "replace_tail";
    case CorruptionType::NewTriple: return "new_triple";
  }
  return "unknown";
}

struct NoisyTriple {
  Triple triple;
  CorruptionType type;
  std::optional<EdgeId> source;  // ground-truth edge for Replace* corruptions
};

struct LabeledBenchmark {
  Graph graph;  // originals first, then injected triples
  std::size_t original_count = 0;
  std::vector<NoisyTriple> noise;  // generation order, edge id = original_count + index
  std::uint64_t seed = 0;
  double ratio = 0.0;

  bool is_noisy(EdgeId id) const { return id >= original_count; }

  std::vector<bool> noisy_labels() const {
    std::vector<bool> labels(graph.num_edges(), false);
    for (std::size_t i = original_count; i < labels.size(); ++i) labels[i] = true;
    return labels;
  }
};

inline constexpr int kNoiseRetryBudget = 1000;

inline std::size_t noise_count(std::size_t original_edges, double ratio) {
  return static_cast<std::size_t>(std::llround(ratio * static_cast<double>(original_edges)));
}

// Draw order per noisy triple: corruption type (below(4)); for Replace* the
// source edge (below(|E|)) then the replacement component (below(|V|) or
// below(|R|)); for NewTriple head, relation, tail in that order. A candidate
// already in E or already generated redraws only the random component(s).
inline LabeledBenchmark synthesize(const Graph& g, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw DataError("noise ratio must be a finite value >= 0");
  if (g.empty()) throw DataError("cannot synthesize noise for an empty graph");

  LabeledBenchmark b{g, g.num_edges(), {}, seed, ratio};
  const std::size_t target = noise_count(g.num_edges(), ratio);
  const auto n_nodes = static_cast<std::uint64_t>(g.num_nodes());
  const auto n_rels = static_cast<std::uint64_t>(g.num_relations());
  const auto n_edges = static_cast<std::uint64_t>(g.num_edges());

  Rng rng(seed);
  std::unordered_set<Triple, TripleHash> generated;
  b.noise.reserve(target);

  for (std::size_t n = 0; n < target; ++n) {
    const auto type = static_cast<CorruptionType>(rng.below(4));
    std::optional<EdgeId> source;
    Triple base{};
    if (type != CorruptionType::NewTriple) {
      source = static_cast<EdgeId>(rng.below(n_edges));
      base = g.edge(*source);
    }

    bool placed = false;
    for (int attempt = 0; attempt < kNoiseRetryBudget; ++attempt) {
      Triple cand = base;
      switch (type) {
        case CorruptionType::ReplaceHead: cand.head = static_cast<NodeId>(rng.below(n_nodes)); break;
        case CorruptionType::ReplaceRelation: cand.relation = static_cast<RelationId>(rng.below(n_rels)); break;
        case CorruptionType::ReplaceTail: cand.tail = static_cast<NodeId>(rng.below(n_nodes)); break;
        case CorruptionType::NewTriple:
          cand.head = static_cast<NodeId>(rng.below(n_nodes));
          cand.relation = static_cast<RelationId>(rng.below(n_rels));
          cand.tail = static_cast<NodeId>(rng.below(n_nodes));
          break;
      }
      if (g.contains(cand) || generated.contains(cand)) continue;
      generated.insert(cand);
      b.noise.push_back({cand, type, source});
      placed = true;
      break;
    }
    if (!placed)
      throw DataError("noise synthesis exhausted its retry budget of " + std::to_string(kNoiseRetryBudget) +
                      " draws for noisy triple #" + std::to_string(n) + "; the ratio is infeasible for this graph");
  }

  for (const auto& nt : b.noise) b.graph.add_edge(nt.triple);
  return b;
}

/// 4-column TSV: clean edges in original order, then noise in generation order.
inline void write_benchmark(const LabeledBenchmark& b, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const Graph& g = b.graph;
  for (std::size_t i = 0; i < g.num_edges(); ++i) {
    const auto& t = g.edges()[i];
    out << g.node_text(t.head) << '\t' << g.relation_text(t.relation) << '\t' << g.node_text(t.tail) << '\t'
        << (b.is_noisy(static_cast<EdgeId>(i)) ? "noisy" : "clean") << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace gold
