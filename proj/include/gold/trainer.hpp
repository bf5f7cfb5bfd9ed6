#pragma once

// Margin-ranking training with corrupted-triple negatives and Adam.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "gold/error.hpp"
#include "gold/evaluator.hpp"
#include "gold/graph.hpp"
#include "gold/model.hpp"
#include "gold/random.hpp"

namespace gold {

enum class CacheRefresh { PerEpoch, PerBatch };

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::size_t negatives_per_positive = 1;
  double clip_norm = 10.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  CacheRefresh cache_refresh = CacheRefresh::PerEpoch;
  bool live_neighbors = false;  // backpropagate through neighbor encodings
};

inline constexpr int kNegativeRetryBudget = 1000;

/// Replaces the head or the tail (fair coin) with a uniform random node,
/// redrawing the node while the result is a known triple.
inline Triple negative_sample(const Graph& g, const Triple& positive, Rng& rng) {
  if (g.num_nodes() < 2) throw DataError("negative sampling needs at least two nodes");
  const bool corrupt_head = rng.coin();
  for (int attempt = 0; attempt < kNegativeRetryBudget; ++attempt) {
    Triple cand = positive;
    const auto node = static_cast<NodeId>(rng.below(g.num_nodes()));
    (corrupt_head ? cand.head : cand.tail) = node;
    if (!g.contains(cand)) return cand;
  }
  throw DataError("negative sampling exhausted its retry budget of " + std::to_string(kNegativeRetryBudget) +
                  " draws");
}

class Adam {
 public:
  Adam(const ModelParams& shape, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(ModelParams::zeros_like(shape)), v_(ModelParams::zeros_like(shape)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(ModelParams& params, const ModelParams& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    ModelParams::zip(
        [&](const std::string&, auto& p, auto& m, auto& v, const auto& g) {
          m = b1_ * m + (1 - b1_) * g;
          v = b2_ * v + (1 - b2_) * g.cwiseProduct(g);
          p.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
        },
        params, m_, v_, grad);
  }

  std::size_t steps() const { return t_; }

 private:
  ModelParams m_, v_;
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0;
  double wall_ms = 0;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

/// Trains on every edge of the context graph. Each epoch shuffles the edges,
/// draws fresh negatives, and applies one clipped Adam step per batch.
inline TrainResult train(Model model, const ModelContext& ctx, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (cfg.epochs == 0 || cfg.batch_size == 0 || cfg.negatives_per_positive == 0 || !(cfg.learning_rate > 0))
    throw ConfigError("epochs, batch_size, negatives_per_positive and learning_rate must be positive");
  const Graph& g = ctx.graph;
  if (g.empty()) throw DataError("cannot train on an empty graph");

  Rng rng(cfg.seed);
  Adam adam(model.params, cfg.learning_rate);
  std::vector<EdgeId> order(g.num_edges());
  std::iota(order.begin(), order.end(), EdgeId{0});

  TrainResult result;
  EncodingCache cache;
  EnergyOptions opts;
  if (!cfg.live_neighbors) opts = {NeighborMode::Cached, &cache, false};

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    rng.shuffle(std::span<EdgeId>(order));
    if (!cfg.live_neighbors) cache = encode_all_edges(model.params, ctx, cfg.threads);

    double loss_sum = 0;
    std::size_t pairs = 0;
    std::size_t batch_no = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size, ++batch_no) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::vector<TriplePair> batch;
      for (std::size_t i = b; i < e; ++i) {
        const Triple& pos = g.edge(order[i]);
        for (std::size_t n = 0; n < cfg.negatives_per_positive; ++n) batch.push_back({pos, negative_sample(g, pos, rng)});
      }
      if (!cfg.live_neighbors && cfg.cache_refresh == CacheRefresh::PerBatch && b > 0)
        cache = encode_all_edges(model.params, ctx, cfg.threads);

      BatchGradient bg;
      try {
        bg = batch_gradient(model, ctx, batch, opts, cfg.threads);
      } catch (const NumericError& err) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no) + ": " + err.what());
      }
      if (!std::isfinite(bg.loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_no));
      const double norm = std::sqrt(bg.grad.squared_norm());
      if (cfg.clip_norm > 0 && norm > cfg.clip_norm) bg.grad.scale(cfg.clip_norm / norm);
      adam.step(model.params, bg.grad);
      loss_sum += bg.loss;
      pairs += batch.size();
    }

    EpochLog entry{epoch, loss_sum / static_cast<double>(pairs),
                   std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  model.params.check_finite("trained parameters");
  result.model = std::move(model);
  return result;
}

/// Seeded selection of roughly `fraction` of the edges as a labeled
/// validation slice.
inline std::vector<bool> holdout_mask(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<EdgeId> idx(n);
  std::iota(idx.begin(), idx.end(), EdgeId{0});
  Rng rng(seed);
  rng.shuffle(std::span<EdgeId>(idx));
  std::vector<bool> mask(n, false);
  const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < take && i < n; ++i) mask[idx[i]] = true;
  return mask;
}

struct GridPoint {
  double lambda = 0;
  Metrics validation;
};

struct GridResult {
  std::vector<GridPoint> points;
  std::size_t best = 0;
  TrainResult trained;  // the model trained with the selected lambda
};

/// Trains one model per lambda and keeps the one with the best validation
/// Recall@k (ties: higher AUC, then the earlier grid value).
inline GridResult grid_search_lambda(const Model& init, const ModelContext& ctx, const TrainConfig& cfg,
                                     std::span<const double> lambdas, const std::vector<bool>& noisy,
                                     const std::vector<bool>& validation) {
  if (lambdas.empty()) throw ConfigError("lambda grid is empty");
  GridResult out;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    Model m = init;
    m.hyper.lambda = lambdas[i];
    TrainResult tr = train(std::move(m), ctx, cfg);
    const Metrics val = evaluate(restrict_to(score_all(tr.model, ctx, cfg.threads), validation), noisy);
    const bool better = i == 0 || val.recall_at_k > out.points[out.best].validation.recall_at_k ||
                        (val.recall_at_k == out.points[out.best].validation.recall_at_k &&
                         val.auc > out.points[out.best].validation.auc);
    out.points.push_back({lambdas[i], val});
    if (better) {
      out.best = i;
      out.trained = std::move(tr);
    }
  }
  return out;
}

}  // namespace gold
