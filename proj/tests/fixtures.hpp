#pragma once

#include <utility>

#include "gold/embeddings.hpp"
#include "gold/model.hpp"
#include "gold/planted.hpp"
#include "gold/rules.hpp"

namespace gold::test {

/// A graph with its rule index, random embeddings and mined rule book, ready
/// to build a ModelContext. Not movable: the index points into the graph.
struct ModelFixture {
  ModelFixture(Graph g, std::size_t dim_in, std::uint64_t seed, std::size_t k_rules = 5, double scale = 0.5)
      : graph(std::move(g)),
        index(graph),
        table(random_table(graph, dim_in, seed, scale)),
        embeddings(GraphEmbeddings::from(table, graph)),
        book(top_k_per_relation(mine(graph), k_rules)) {}
  ModelFixture(const ModelFixture&) = delete;
  ModelFixture& operator=(const ModelFixture&) = delete;

  ModelContext context() const { return {graph, index, embeddings, book}; }

  Graph graph;
  ChainIndex index;
  EmbeddingTable table;
  GraphEmbeddings embeddings;
  RuleBook book;
};

inline Graph small_planted(std::uint64_t seed) { return planted_graph({40, 4, 120, seed}).graph; }

inline Hyper small_hyper(std::size_t d, std::size_t F, std::size_t dim_in, double lambda, double lambda_t,
                         std::uint64_t seed) {
  Hyper h;
  h.d = d;
  h.F = F;
  h.dim_in = dim_in;
  h.lambda = lambda;
  h.lambda_t = lambda_t;
  h.gamma = 50;  // keeps every hinge active in gradient checks
  h.seed = seed;
  return h;
}

}  // namespace gold::test
