#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gold/trainer.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace gold {
namespace {

double sig(double v) { return 1 / (1 + std::exp(-v)); }

TEST(Gru, ScalarCellMatchesHandUnrolledSteps) {
  GruCell c = GruCell::zeros(1, 1);
  c.Wz(0, 0) = 0.3, c.Wr(0, 0) = -0.4, c.Wn(0, 0) = 0.8;
  c.Uz(0, 0) = 0.5, c.Ur(0, 0) = 0.2, c.Un(0, 0) = -0.6;
  c.bz(0) = 0.1, c.br(0) = -0.2, c.bn(0) = 0.05;
  const Vec xs[2] = {Vec::Constant(1, 1.5), Vec::Constant(1, -0.7)};
  const GruTrace tr = gru_forward(c, xs);

  double h = 0;
  std::vector<double> expected;
  for (double x : {1.5, -0.7}) {
    const double z = sig(0.3 * x + 0.5 * h + 0.1);
    const double r = sig(-0.4 * x + 0.2 * h - 0.2);
    const double n = std::tanh(0.8 * x - 0.6 * (r * h) + 0.05);
    h = (1 - z) * n + z * h;
    expected.push_back(h);
  }
  EXPECT_NEAR(tr.output(0)(0), expected[0], 1e-15);
  EXPECT_NEAR(tr.output(1)(0), expected[1], 1e-15);
  EXPECT_EQ(tr.last()(0), tr.output(1)(0));
}

TEST(Gru, ZeroWeightsKeepTheZeroState) {
  const GruCell c = GruCell::zeros(3, 2);
  const Vec xs[3] = {Vec::Ones(3), Vec::Constant(3, -2), Vec::Constant(3, 5)};
  const GruTrace tr = gru_forward(c, xs);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_TRUE(tr.output(s).isZero(0));
    EXPECT_TRUE(tr.z[s].isApproxToConstant(0.5));
  }
}

TEST(Gru, RejectsWrongInputWidth) {
  const GruCell c = GruCell::zeros(3, 2);
  const Vec xs[1] = {Vec::Ones(4)};
  EXPECT_THROW(gru_forward(c, xs), DataError);
}

TEST(Gru, BackwardMatchesFiniteDifferences) {
  Rng rng(3);
  GruCell c = random_gru(3, 2, rng);
  for (Vec* b : {&c.bz, &c.br, &c.bn})
    for (Eigen::Index i = 0; i < b->size(); ++i) (*b)(i) = rng.uniform(-0.5, 0.5);
  const std::vector<Vec> xs = {Vec::Random(3), Vec::Random(3), Vec::Random(3)};
  const std::vector<Vec> w = {Vec::Random(2), Vec(), Vec::Random(2)};  // loss = sum_s w_s . h_s
  auto loss = [&](const GruCell& cell, const std::vector<Vec>& in) {
    const GruTrace tr = gru_forward(cell, in);
    double l = 0;
    for (std::size_t s = 0; s < 3; ++s)
      if (w[s].size()) l += w[s].dot(tr.output(s));
    return l;
  };
  GruCell grad = GruCell::zeros(3, 2);
  const auto dx = gru_backward(c, gru_forward(c, xs), w, grad);

  const double h = 1e-6;
  GruCell probe = c;
  GruCell::zip(
      [&](const char* name, auto& p, const auto& g) {
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          const double saved = p.data()[i];
          p.data()[i] = saved + h;
          const double up = loss(probe, xs);
          p.data()[i] = saved - h;
          const double down = loss(probe, xs);
          p.data()[i] = saved;
          EXPECT_NEAR(g.data()[i], (up - down) / (2 * h), 1e-8) << name << "[" << i << "]";
        }
      },
      probe, grad);
  for (std::size_t s = 0; s < 3; ++s)
    for (Eigen::Index i = 0; i < 3; ++i) {
      auto in = xs;
      in[s](i) += h;
      const double up = loss(c, in);
      in[s](i) -= 2 * h;
      const double down = loss(c, in);
      EXPECT_NEAR(dx[s](i), (up - down) / (2 * h), 1e-8);
    }
}

TEST(Energy, ElementaryTerms) {
  EXPECT_DOUBLE_EQ(e_local(Vec::Unit(2, 0), Vec::Unit(2, 1)), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(e_local(Vec::Ones(3), Vec::Ones(3)), 0.0);

  TripleEncoding enc{Vec(2), Vec(2), Vec(2), Vec()};
  enc.e_h << 1, 2;
  enc.e_r << 3, 4;
  enc.e_t << 4, 6;
  EXPECT_DOUBLE_EQ(e_translation(enc), 0.0);
  enc.e_t << 0, 0;
  EXPECT_DOUBLE_EQ(e_translation(enc), std::hypot(4.0, 6.0));

  Hyper h;
  h.lambda = 0.5;
  h.lambda_t = 0.25;
  EXPECT_DOUBLE_EQ(e_total({2, 3, 4, 0}, h), 4.5);
}

TEST(Energy, ZeroWeightsGiveZeroEncodings) {
  test::ModelFixture fx(test::small_planted(1), 4, 1);
  Model m = init_model(test::small_hyper(3, 2, 4, 0.5, 1.0, 1));
  m.params = ModelParams::zeros_like(m.params);
  const auto enc = encode(m.params, fx.embeddings, fx.graph.edge(0));
  EXPECT_TRUE(enc.concat.isZero(0));
  const auto e = energy(m, fx.context(), fx.graph.edge(0));
  EXPECT_EQ(e.e_global, 0.0);
  EXPECT_EQ(e.e_local, 0.0);
  EXPECT_EQ(e.e_translation, 0.0);
}

TEST(Energy, GlobalTermMatchesDirectSumOverRules) {
  test::ModelFixture fx(test::small_planted(2), 4, 2, 8);
  const ModelContext ctx = fx.context();
  const Model m = init_model(test::small_hyper(3, 2, 4, 0.5, 0, 2));
  std::size_t grounded_seen = 0, fill_seen = 0;
  for (EdgeId id = 0; id < fx.graph.num_edges(); id += 7) {
    const Triple& t = fx.graph.edge(id);
    const Vec te = encode(m.params, fx.embeddings, t).concat;
    double expected = 0;
    for (const Rule& rule : ctx.rules_for(t.relation)) {
      const auto gr = ground(fx.index, rule, t.head, t.tail, 1);
      std::vector<Vec> body;
      if (gr.empty()) {
        body.assign(rule.body.size(), te);
        ++fill_seen;
      } else {
        for (EdgeId e : gr[0].edges) body.push_back(encode(m.params, fx.embeddings, fx.graph.edge(e)).concat);
        ++grounded_seen;
      }
      expected += (re_forward(m.params, body) - te).norm();
    }
    EXPECT_NEAR(e_global(m, ctx, t), expected, 1e-12 * (1 + expected));
  }
  EXPECT_GT(grounded_seen, 0u);
  EXPECT_GT(fill_seen, 0u);
}

TEST(Energy, RelationWithoutRulesHasNoGlobalTerm) {
  test::ModelFixture fx(test::small_planted(3), 4, 3);
  fx.book.clear();
  const Model m = init_model(test::small_hyper(3, 2, 4, 0.5, 0, 3));
  EXPECT_EQ(e_global(m, fx.context(), fx.graph.edge(0)), 0.0);
  EXPECT_THROW(re_forward(m.params, {}), DataError);
}

TEST(Energy, AttentionWeightsFormADistribution) {
  test::ModelFixture fx(test::small_planted(4), 4, 4);
  const Model m = init_model(test::small_hyper(3, 2, 4, 0.5, 0, 4));
  const ModelContext ctx = fx.context();
  for (EdgeId id = 0; id < 20; ++id) {
    const Triple& t = fx.graph.edge(id);
    EnergyTape tape(m, ctx, t);
    const auto hw = tape.head_weights();
    const auto tw = tape.tail_weights();
    EXPECT_EQ(hw.size(), fx.graph.incident(t.head).size());
    EXPECT_EQ(tw.size(), fx.graph.incident(t.tail).size());
    EXPECT_NEAR(std::accumulate(hw.begin(), hw.end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(std::accumulate(tw.begin(), tw.end(), 0.0), 1.0, 1e-12);
    for (double w : hw) EXPECT_GT(w, 0.0);
  }
}

TEST(Energy, UnseenTripleJoinsItsOwnNeighborhoods) {
  test::ModelFixture fx(test::small_planted(5), 4, 5);
  const Model m = init_model(test::small_hyper(3, 2, 4, 0.5, 0, 5));
  Rng rng(1);
  const Triple neg = negative_sample(fx.graph, fx.graph.edge(3), rng);
  ASSERT_FALSE(fx.graph.contains(neg));
  EnergyTape tape(m, fx.context(), neg);
  EXPECT_EQ(tape.head_weights().size(), fx.graph.incident(neg.head).size() + 1);
  EXPECT_EQ(tape.tail_weights().size(), fx.graph.incident(neg.tail).size() + 1);
}

TEST(Energy, InvariantUnderEdgeInsertionOrder) {
  const Graph base = test::small_planted(6);
  Graph shuffled;
  for (const auto& s : base.nodes().surfaces()) shuffled.intern_node(s);
  for (const auto& s : base.relations().surfaces()) shuffled.intern_relation(s);
  std::vector<Triple> edges = base.edges();
  Rng rng(99);
  rng.shuffle(std::span<Triple>(edges));
  for (const auto& t : edges) shuffled.add_edge(t);

  test::ModelFixture a(base, 4, 6), b(shuffled, 4, 6);
  ASSERT_EQ(a.book, b.book);
  const Model m = init_model(test::small_hyper(3, 2, 4, 0.7, 0.3, 6));
  for (const auto& t : base.edges()) {
    const auto ea = energy(m, a.context(), t);
    const auto eb = energy(m, b.context(), t);
    EXPECT_NEAR(ea.e_total, eb.e_total, 1e-12 * (1 + ea.e_total));
  }
}

TEST(Energy, CachedNeighborsReproduceLiveValues) {
  test::ModelFixture fx(test::small_planted(7), 4, 7);
  const ModelContext ctx = fx.context();
  const Model m = init_model(test::small_hyper(3, 3, 4, 0.5, 0.2, 7));
  const EncodingCache cache = encode_all_edges(m.params, ctx);
  const EncodingCache threaded = encode_all_edges(m.params, ctx, 3);
  for (EdgeId id = 0; id < fx.graph.num_edges(); ++id) {
    EXPECT_EQ(cache.concat[id], threaded.concat[id]);
    const Triple& t = fx.graph.edge(id);
    EXPECT_EQ(energy(m, ctx, t).e_total, energy(m, ctx, t, {NeighborMode::Cached, &cache, false}).e_total);
  }
  EXPECT_THROW(energy(m, ctx, fx.graph.edge(0), {NeighborMode::Cached, nullptr, false}), DataError);
}

TEST(Energy, NonFiniteParametersAreReported) {
  test::ModelFixture fx(test::small_planted(8), 4, 8);
  Model m = init_model(test::small_hyper(3, 2, 4, 0.5, 0, 8));
  m.params.te.bn(0) = std::nan("");
  EXPECT_THROW(energy(m, fx.context(), fx.graph.edge(0)), NumericError);
  EXPECT_THROW(m.params.check_finite("params"), NumericError);
}

std::vector<TriplePair> sample_pairs(const Graph& g, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TriplePair> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Triple& pos = g.edge(static_cast<EdgeId>(rng.below(g.num_edges())));
    out.push_back({pos, negative_sample(g, pos, rng)});
  }
  return out;
}

struct GradCase {
  std::size_t d, F, dim_in;
  double lambda, lambda_t;
  NeighborMode mode;
};

class GradientCheck : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientCheck, AnalyticMatchesCentralDifferences) {
  const GradCase c = GetParam();
  test::ModelFixture fx(test::small_planted(11), c.dim_in, 11);
  const ModelContext ctx = fx.context();
  const Model m = init_model(test::small_hyper(c.d, c.F, c.dim_in, c.lambda, c.lambda_t, 12));
  const EncodingCache cache = encode_all_edges(m.params, ctx);
  const EnergyOptions opts{c.mode, c.mode == NeighborMode::Cached ? &cache : nullptr, false};
  for (const auto& check : test::finite_difference_check(m, ctx, sample_pairs(fx.graph, 2, 13), opts))
    EXPECT_LT(check.relative(), 1e-4) << check.name << " abs err " << check.max_abs_error;
}

INSTANTIATE_TEST_SUITE_P(Configurations, GradientCheck,
                         ::testing::Values(GradCase{2, 2, 4, 0.5, 0.0, NeighborMode::Live},
                                           GradCase{3, 2, 4, 1.0, 0.3, NeighborMode::Live},
                                           GradCase{2, 3, 8, 0.0, 0.0, NeighborMode::Live},
                                           GradCase{3, 3, 8, 0.5, 0.5, NeighborMode::Cached},
                                           GradCase{2, 2, 4, 2.0, 0.0, NeighborMode::Cached}));

TEST(Gradient, InactiveHingeGivesZeroGradient) {
  test::ModelFixture fx(test::small_planted(14), 4, 14);
  const ModelContext ctx = fx.context();
  Model m = init_model(test::small_hyper(3, 2, 4, 0.5, 0.1, 14));
  const auto pairs = sample_pairs(fx.graph, 1, 15);
  const double gap = energy(m, ctx, pairs[0].positive).e_total - energy(m, ctx, pairs[0].negative).e_total;
  m.hyper.gamma = -gap - 1;
  const BatchGradient bg = batch_gradient(m, ctx, pairs);
  EXPECT_EQ(bg.loss, 0.0);
  EXPECT_EQ(bg.active, 0u);
  EXPECT_EQ(bg.grad.squared_norm(), 0.0);
}

TEST(Gradient, DuplicatedBatchDoublesTheGradient) {
  test::ModelFixture fx(test::small_planted(16), 4, 16);
  const ModelContext ctx = fx.context();
  const Model m = init_model(test::small_hyper(3, 2, 4, 0.5, 0.1, 16));
  const auto one = sample_pairs(fx.graph, 1, 17);
  const std::vector<TriplePair> two = {one[0], one[0]};
  const BatchGradient g1 = batch_gradient(m, ctx, one);
  const BatchGradient g2 = batch_gradient(m, ctx, two);
  EXPECT_DOUBLE_EQ(g2.loss, 2 * g1.loss);
  ModelParams diff = g2.grad;
  diff.add_scaled(g1.grad, -2.0);
  EXPECT_LT(std::sqrt(diff.squared_norm()), 1e-12 * std::sqrt(g1.grad.squared_norm()));
}

TEST(Gradient, ThreadCountDoesNotChangeTheResult) {
  test::ModelFixture fx(test::small_planted(18), 4, 18);
  const ModelContext ctx = fx.context();
  const Model m = init_model(test::small_hyper(3, 2, 4, 0.5, 0.0, 18));
  const auto pairs = sample_pairs(fx.graph, 19, 19);
  const BatchGradient a = batch_gradient(m, ctx, pairs, {}, 1);
  const BatchGradient b = batch_gradient(m, ctx, pairs, {}, 4);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(serialize_checkpoint({m.hyper, a.grad}), serialize_checkpoint({m.hyper, b.grad}));
}

TEST(Init, SeededAndGlorotBounded) {
  const Hyper h = test::small_hyper(4, 3, 6, 0.5, 0, 21);
  const Model a = init_model(h), b = init_model(h);
  Hyper h2 = h;
  h2.seed = 22;
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
  EXPECT_NE(serialize_checkpoint(a), serialize_checkpoint(init_model(h2)));
  EXPECT_LE(a.params.te.Wz.cwiseAbs().maxCoeff(), std::sqrt(6.0 / (6 + 4)));
  EXPECT_LE(a.params.re.Un.cwiseAbs().maxCoeff(), std::sqrt(6.0 / (12 + 12)));
  EXPECT_TRUE(a.params.te.bz.isZero(0));
  EXPECT_EQ(a.params.W.rows(), 3);
  EXPECT_EQ(a.params.W.cols(), 12);
  EXPECT_EQ(a.params.attn.size(), 6);
  Hyper bad = h;
  bad.d = 0;
  EXPECT_THROW(init_model(bad), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
  test::TempDir dir;
  Hyper h = test::small_hyper(3, 2, 5, 0.25, 0.125, 23);
  h.k_rules = 17;
  const Model m = init_model(h);
  save_checkpoint(m, dir.file("m.ckpt"));
  const Model back = load_checkpoint(dir.file("m.ckpt"), 3);
  EXPECT_EQ(back.hyper.d, 3u);
  EXPECT_EQ(back.hyper.F, 2u);
  EXPECT_EQ(back.hyper.dim_in, 5u);
  EXPECT_EQ(back.hyper.lambda, 0.25);
  EXPECT_EQ(back.hyper.lambda_t, 0.125);
  EXPECT_EQ(back.hyper.gamma, 50.0);
  EXPECT_EQ(back.hyper.k_rules, 17u);
  EXPECT_EQ(back.hyper.seed, 23u);
  EXPECT_EQ(back.hyper.g_max, 3u);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(m));
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  test::TempDir dir;
  const std::string bytes = serialize_checkpoint(init_model(test::small_hyper(2, 2, 4, 0.5, 0, 1)));
  const auto path = dir.file("c.ckpt");
  test::write_text(path, "NOTACKPT" + bytes.substr(8));
  EXPECT_THROW(load_checkpoint(path), DataError);
  test::write_text(path, bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(path), DataError);
  test::write_text(path, bytes + "extra");
  EXPECT_THROW(load_checkpoint(path), DataError);
}

}  // namespace
}  // namespace gold
