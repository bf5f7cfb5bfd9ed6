#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "gold/noise.hpp"
#include "support.hpp"

namespace gold {
namespace {

TEST(Noise, CountIsRoundedRatioTimesEdges) {
  EXPECT_EQ(noise_count(2000, 0.05), 100u);
  EXPECT_EQ(noise_count(102400, 0.10), 10240u);
  EXPECT_EQ(noise_count(5, 0.5), 3u);  // 2.5 rounds half away from zero
  EXPECT_EQ(noise_count(7, 0.0), 0u);

  const Graph g = test::random_graph(30, 3, 100, 1);
  EXPECT_EQ(synthesize(g, 0.0, 1).noise.size(), 0u);
  EXPECT_EQ(synthesize(g, 0.13, 1).noise.size(), 13u);
}

TEST(Noise, InjectedTriplesAreNewAndDistinct) {
  const Graph g = test::random_graph(60, 5, 400, 2);
  const auto b = synthesize(g, 0.2, 9);
  ASSERT_EQ(b.noise.size(), 80u);
  ASSERT_EQ(b.graph.num_edges(), 480u);
  std::set<Triple> seen;
  for (const auto& n : b.noise) {
    EXPECT_FALSE(g.contains(n.triple));
    EXPECT_TRUE(seen.insert(n.triple).second);
  }
  for (EdgeId e = 0; e < 400; ++e) EXPECT_EQ(b.graph.edge(e), g.edge(e));
  const auto labels = b.noisy_labels();
  EXPECT_EQ(std::count(labels.begin(), labels.end(), true), 80);
  EXPECT_FALSE(labels[399]);
  EXPECT_TRUE(labels[400]);
}

TEST(Noise, ReplacementsChangeExactlyOneComponentOfTheirSource) {
  const Graph g = test::random_graph(40, 6, 300, 3);
  const auto b = synthesize(g, 0.5, 4);
  for (const auto& n : b.noise) {
    if (n.type == CorruptionType::NewTriple) {
      EXPECT_FALSE(n.source.has_value());
      continue;
    }
    ASSERT_TRUE(n.source.has_value());
    const Triple& s = g.edge(*n.source);
    const int diffs = (s.head != n.triple.head) + (s.relation != n.triple.relation) + (s.tail != n.triple.tail);
    EXPECT_EQ(diffs, 1);
    switch (n.type) {
      case CorruptionType::ReplaceHead: EXPECT_NE(s.head, n.triple.head); break;
      case CorruptionType::ReplaceRelation: EXPECT_NE(s.relation, n.triple.relation); break;
      case CorruptionType::ReplaceTail: EXPECT_NE(s.tail, n.triple.tail); break;
      default: break;
    }
  }
}

TEST(Noise, SameSeedSameBenchmark) {
  const Graph g = test::random_graph(50, 4, 250, 5);
  const auto a = synthesize(g, 0.1, 77);
  const auto b = synthesize(g, 0.1, 77);
  const auto c = synthesize(g, 0.1, 78);
  EXPECT_EQ(a.graph.edges(), b.graph.edges());
  EXPECT_NE(a.graph.edges(), c.graph.edges());
}

// Re-derives the synthesis from the documented draw order using the raw
// engine, independent of Rng.
std::vector<Triple> replay(const Graph& g, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  auto below = [&](std::uint64_t n) {
    const std::uint64_t threshold = (~n + 1) % n;
    std::uint64_t x;
    do x = eng();
    while (x < threshold);
    return x % n;
  };
  std::set<Triple> taken(g.edges().begin(), g.edges().end());
  std::vector<Triple> out;
  while (out.size() < count) {
    const auto type = below(4);
    Triple base{};
    if (type != 3) base = g.edges()[below(g.num_edges())];
    for (;;) {
      Triple c = base;
      if (type == 0) c.head = static_cast<NodeId>(below(g.num_nodes()));
      if (type == 1) c.relation = static_cast<RelationId>(below(g.num_relations()));
      if (type == 2) c.tail = static_cast<NodeId>(below(g.num_nodes()));
      if (type == 3) {
        c.head = static_cast<NodeId>(below(g.num_nodes()));
        c.relation = static_cast<RelationId>(below(g.num_relations()));
        c.tail = static_cast<NodeId>(below(g.num_nodes()));
      }
      if (taken.insert(c).second) {
        out.push_back(c);
        break;
      }
    }
  }
  return out;
}

TEST(Noise, MatchesIndependentReplayOfTheDrawOrder) {
  const Graph g = test::random_graph(10, 3, 12, 6);
  for (std::uint64_t seed : {0u, 1u, 12345u}) {
    const auto b = synthesize(g, 0.5, seed);
    std::vector<Triple> got;
    for (const auto& n : b.noise) got.push_back(n.triple);
    EXPECT_EQ(got, replay(g, 6, seed)) << "seed " << seed;
  }
}

TEST(Noise, CorruptionTypesAreRoughlyUniform) {
  const Graph g = test::random_graph(400, 8, 2000, 7);
  const auto b = synthesize(g, 0.2, 11);
  std::array<int, 4> counts{};
  for (const auto& n : b.noise) ++counts[static_cast<int>(n.type)];
  const double n = static_cast<double>(b.noise.size());
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (int c : counts) EXPECT_LE(std::abs(c - n / 4), 4 * sigma);
}

TEST(Noise, InfeasibleOrInvalidRequestsFail) {
  // One node and one relation admit a single triple, which is already present.
  const Graph g = test::make_graph({{"a", "r", "a"}});
  EXPECT_THROW(synthesize(g, 1.0, 0), DataError);
  const Graph h = test::random_graph(10, 2, 20, 1);
  EXPECT_THROW(synthesize(h, -0.1, 0), DataError);
  EXPECT_THROW(synthesize(Graph{}, 0.1, 0), DataError);
}

TEST(Noise, BenchmarkFileRoundTrip) {
  test::TempDir dir;
  const Graph g = test::random_graph(30, 3, 80, 8);
  const auto b = synthesize(g, 0.25, 3);
  write_benchmark(b, dir.file("bench.tsv"));
  const LabeledGraph back = load_labeled_tsv(dir.file("bench.tsv"));
  EXPECT_EQ(back.graph.num_edges(), 100u);
  EXPECT_EQ(back.noisy, b.noisy_labels());
  for (EdgeId e = 0; e < 100; ++e) {
    const auto& t = back.graph.edge(e);
    const auto& u = b.graph.edge(e);
    EXPECT_EQ(back.graph.node_text(t.head), b.graph.node_text(u.head));
    EXPECT_EQ(back.graph.relation_text(t.relation), b.graph.relation_text(u.relation));
    EXPECT_EQ(back.graph.node_text(t.tail), b.graph.node_text(u.tail));
  }
}

}  // namespace
}  // namespace gold
