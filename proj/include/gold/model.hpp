#pragma once

// Joint global/local energy model over frozen text embeddings.
//
// A triple (h, r, t) is encoded by running the triple-encoder GRU over the
// three frozen embeddings; the hidden states after each step are e_h, e_r,
// e_t and their concatenation is the 3d-dimensional triple encoding TE.
//
//   global:  sum over the top rules for r of || RE(body) - TE(h, r, t) ||,
//            RE being the rule-encoder GRU run over the body encodings; a
//            rule with no grounding uses the query triple in every slot
//   local:   || ELU(sum_j alpha_j v_j) - ELU(sum_j beta_j v_j) ||,
//            v_j = W TE(j), alpha over the triples incident to h, beta over
//            those incident to t, scores LeakyReLU(attn . [v_query || v_j])
//   total:   global + lambda * local (+ lambda_t * || e_h + e_r - e_t ||)

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gold/embeddings.hpp"
#include "gold/error.hpp"
#include "gold/graph.hpp"
#include "gold/gru.hpp"
#include "gold/random.hpp"
#include "gold/rules.hpp"

namespace gold {

inline constexpr double kLeakySlope = 0.2;

struct Hyper {
  std::size_t d = 100;
  std::size_t F = 100;
  std::size_t dim_in = 0;
  double lambda = 0.5;
  double gamma = 5.0;
  double lambda_t = 0.0;
  std::size_t k_rules = 100;
  std::size_t g_max = 1;
  std::uint64_t seed = 0;
};

struct ModelParams {
  GruCell te;  // dim_in -> d
  GruCell re;  // 3d -> 3d
  Mat W;       // F x 3d
  Vec attn;    // 2F: [query half || neighbor half]

  /// Visits (path, tensor) for every trainable tensor, in checkpoint order.
  template <typename Self, typename Fn>
  static void visit(Self& p, Fn&& fn) {
    GruCell::visit(p.te, [&](const char* name, auto& t) { fn(std::string("te.") + name, t); });
    GruCell::visit(p.re, [&](const char* name, auto& t) { fn(std::string("re.") + name, t); });
    fn(std::string("W"), p.W);
    fn(std::string("attn"), p.attn);
  }

  /// Visits matching tensors of several structurally identical parameter sets.
  template <typename Fn, typename... Ps>
  static void zip(Fn&& fn, Ps&... p) {
    GruCell::zip([&](const char* name, auto&... t) { fn(std::string("te.") + name, t...); }, p.te...);
    GruCell::zip([&](const char* name, auto&... t) { fn(std::string("re.") + name, t...); }, p.re...);
    fn(std::string("W"), p.W...);
    fn(std::string("attn"), p.attn...);
  }

  static ModelParams zeros_like(const ModelParams& p) {
    ModelParams z = p;
    visit(z, [](const std::string&, auto& t) { t.setZero(); });
    return z;
  }

  double squared_norm() const {
    double s = 0;
    visit(*this, [&](const std::string&, const auto& t) { s += t.squaredNorm(); });
    return s;
  }

  void scale(double s) {
    visit(*this, [&](const std::string&, auto& t) { t *= s; });
  }

  void add_scaled(const ModelParams& other, double s) {
    zip([&](const std::string&, auto& a, const auto& b) { a += s * b; }, *this, other);
  }

  /// Throws NumericError naming the first tensor holding a non-finite entry.
  void check_finite(const std::string& what) const {
    visit(*this, [&](const std::string& name, const auto& t) {
      if (!t.allFinite()) throw NumericError(what + ": non-finite value in " + name);
    });
  }
};

struct Model {
  Hyper hyper;
  ModelParams params;
};

inline Model init_model(const Hyper& hyper) {
  if (hyper.d == 0 || hyper.F == 0 || hyper.dim_in == 0) throw ConfigError("d, F and dim_in must be >= 1");
  Rng rng(hyper.seed);
  const auto d = static_cast<Eigen::Index>(hyper.d);
  const auto F = static_cast<Eigen::Index>(hyper.F);
  Model m{hyper, {}};
  m.params.te = random_gru(static_cast<Eigen::Index>(hyper.dim_in), d, rng);
  m.params.re = random_gru(3 * d, 3 * d, rng);
  m.params.W = Mat(F, 3 * d);
  glorot_fill(m.params.W, rng);
  Mat a(2 * F, 1);
  glorot_fill(a, rng);
  m.params.attn = a.col(0);
  return m;
}

using RuleBook = std::map<RelationId, std::vector<Rule>>;

/// Everything the energy needs besides the parameters. All members are
/// read-only views.
struct ModelContext {
  const Graph& graph;
  const ChainIndex& index;
  const GraphEmbeddings& embeddings;
  const RuleBook& rules;

  std::span<const Rule> rules_for(RelationId r) const {
    if (auto it = rules.find(r); it != rules.end()) return it->second;
    return {};
  }
};

struct TripleEncoding {
  Vec e_h, e_r, e_t;
  Vec concat;  // [e_h || e_r || e_t]
};

inline TripleEncoding encoding_from_trace(const GruTrace& tr) {
  TripleEncoding enc{tr.output(0), tr.output(1), tr.output(2), Vec(3 * tr.output(0).size())};
  enc.concat << enc.e_h, enc.e_r, enc.e_t;
  return enc;
}

inline GruTrace te_trace(const ModelParams& p, const Vec& s_h, const Vec& s_r, const Vec& s_t) {
  const Vec inputs[3] = {s_h, s_r, s_t};
  return gru_forward(p.te, inputs);
}

inline TripleEncoding te_forward(const ModelParams& p, const Vec& s_h, const Vec& s_r, const Vec& s_t) {
  return encoding_from_trace(te_trace(p, s_h, s_r, s_t));
}

inline Vec re_forward(const ModelParams& p, std::span<const Vec> body) {
  if (body.empty()) throw DataError("rule encoder needs a non-empty body");
  return gru_forward(p.re, body).last();
}

inline TripleEncoding encode(const ModelParams& p, const GraphEmbeddings& emb, const Triple& t) {
  return te_forward(p, emb.nodes.col(t.head), emb.relations.col(t.relation), emb.nodes.col(t.tail));
}

inline double e_local(const Vec& p, const Vec& q) { return (p - q).norm(); }

inline double e_translation(const TripleEncoding& enc) { return (enc.e_h + enc.e_r - enc.e_t).norm(); }

struct EnergyBreakdown {
  double e_global = 0;
  double e_local = 0;
  double e_translation = 0;
  double e_total = 0;
};

inline double e_total(const EnergyBreakdown& b, const Hyper& h) {
  return b.e_global + h.lambda * b.e_local + h.lambda_t * b.e_translation;
}

/// Triple encodings of every edge under fixed parameters.
struct EncodingCache {
  std::vector<Vec> concat;  // indexed by EdgeId
};

inline EncodingCache encode_all_edges(const ModelParams& p, const ModelContext& ctx, unsigned threads = 1) {
  EncodingCache cache;
  const auto& edges = ctx.graph.edges();
  cache.concat.resize(edges.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) cache.concat[i] = encode(p, ctx.embeddings, edges[i]).concat;
  };
  threads = std::max(1u, threads);
  if (threads == 1 || edges.size() < 2 * threads) {
    work(0, edges.size());
    return cache;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (edges.size() + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t b = std::min(edges.size(), w * chunk), e = std::min(edges.size(), b + chunk);
    pool.emplace_back(work, b, e);
  }
  for (auto& th : pool) th.join();
  return cache;
}

/// How neighbor encodings enter the local energy. Live recomputes them from
/// the current parameters and backpropagates through them; Cached reads a
/// precomputed EncodingCache and treats those values as constants. The query
/// triple itself is always live.
enum class NeighborMode { Live, Cached };

struct EnergyOptions {
  NeighborMode mode = NeighborMode::Live;
  const EncodingCache* cache = nullptr;
  bool full_breakdown = false;  // evaluate terms whose weight is zero
};

/// Forward evaluation of one triple's energy, retaining what the backward
/// pass needs.
class EnergyTape {
 public:
  EnergyTape(const Model& model, const ModelContext& ctx, const Triple& query, const EnergyOptions& opts = {})
      : model_(model), ctx_(ctx), query_(query), opts_(opts) {
    if (opts_.mode == NeighborMode::Cached && opts_.cache == nullptr)
      throw DataError("cached neighbor mode requires an encoding cache");
    add_slot(query_);
    if (auto id = ctx_.graph.find_edge(query_)) {
      query_edge_ = *id;
      slot_of_edge_.emplace(*id, 0);
    }
    forward_global();
    const Hyper& hp = model_.hyper;
    if (hp.lambda != 0 || opts_.full_breakdown) forward_local();
    if (hp.lambda_t != 0 || opts_.full_breakdown) energy_.e_translation = e_translation(encoding());
    energy_.e_total = e_total(energy_, hp);
    if (!std::isfinite(energy_.e_total))
      throw NumericError("non-finite energy for triple (" + std::to_string(query_.head) + ", " +
                         std::to_string(query_.relation) + ", " + std::to_string(query_.tail) + ")");
  }

  const EnergyBreakdown& energy() const noexcept { return energy_; }
  TripleEncoding encoding() const { return encoding_from_trace(slots_[0].trace); }
  const Vec& p() const { return head_.out; }
  const Vec& q() const { return tail_.out; }
  std::vector<double> head_weights() const { return weights(head_); }
  std::vector<double> tail_weights() const { return weights(tail_); }

  /// Adds upstream * d(e_total)/d(params) into `grad`.
  void backward(double upstream, ModelParams& grad) const {
    const auto d = static_cast<Eigen::Index>(model_.hyper.d);
    std::vector<Vec> d_concat(slots_.size(), Vec::Zero(3 * d));
    const ModelParams& P = model_.params;

    // global
    for (const auto& body : bodies_) {
      if (body.distance == 0) continue;
      const double c = upstream * body.multiplicity / body.distance;
      const Vec d_re = c * body.diff;
      d_concat[0] -= d_re;
      std::vector<Vec> d_last(body.trace.steps());
      d_last.back() = d_re;
      const auto dx = gru_backward(P.re, body.trace, d_last, grad.re);
      for (std::size_t i = 0; i < body.slots.size(); ++i) d_concat[static_cast<std::size_t>(body.slots[i])] += dx[i];
    }

    // local
    if (local_done_ && model_.hyper.lambda != 0 && energy_.e_local > 0) {
      const Vec dp = (upstream * model_.hyper.lambda / energy_.e_local) * (head_.out - tail_.out);
      Vec dv_query = Vec::Zero(v_query_.size());
      backward_side(head_, dp, dv_query, grad, d_concat);
      backward_side(tail_, -dp, dv_query, grad, d_concat);
      grad.W.noalias() += dv_query * slots_[0].concat.transpose();
      d_concat[0].noalias() += P.W.transpose() * dv_query;
    }

    // translation
    if (model_.hyper.lambda_t != 0 && energy_.e_translation > 0) {
      const TripleEncoding enc = encoding();
      const Vec u = ((upstream * model_.hyper.lambda_t) / energy_.e_translation) * (enc.e_h + enc.e_r - enc.e_t);
      d_concat[0].segment(0, d) += u;
      d_concat[0].segment(d, d) += u;
      d_concat[0].segment(2 * d, d) -= u;
    }

    for (std::size_t s = 0; s < slots_.size(); ++s) {
      if (d_concat[s].isZero(0)) continue;
      const Vec d_out[3] = {d_concat[s].segment(0, d), d_concat[s].segment(d, d), d_concat[s].segment(2 * d, d)};
      gru_backward(P.te, slots_[s].trace, d_out, grad.te);
    }
  }

 private:
  struct Slot {
    GruTrace trace;
    Vec concat;
  };
  struct Body {
    std::vector<int> slots;
    double multiplicity = 0;
    GruTrace trace;
    Vec diff;  // RE(body) - TE(query)
    double distance = 0;
  };
  struct Neighbor {
    int slot = -1;               // live encoding, or
    const Vec* cached = nullptr;  // constant encoding
    Vec v;
    double raw = 0;  // attn . [v_query || v_j] before LeakyReLU
    double weight = 0;
  };
  struct Side {
    std::vector<Neighbor> nbrs;
    Vec agg;
    Vec out;
  };

  int add_slot(const Triple& t) {
    const auto& emb = ctx_.embeddings;
    Slot s{te_trace(model_.params, emb.nodes.col(t.head), emb.relations.col(t.relation), emb.nodes.col(t.tail)), {}};
    s.concat = encoding_from_trace(s.trace).concat;
    slots_.push_back(std::move(s));
    return static_cast<int>(slots_.size() - 1);
  }

  int slot_for_edge(EdgeId id) {
    if (auto it = slot_of_edge_.find(id); it != slot_of_edge_.end()) return it->second;
    const int s = add_slot(ctx_.graph.edge(id));
    slot_of_edge_.emplace(id, s);
    return s;
  }

  const Vec& concat_of(const Neighbor& n) const {
    return n.slot >= 0 ? slots_[static_cast<std::size_t>(n.slot)].concat : *n.cached;
  }

  void forward_global() {
    const auto rules = ctx_.rules_for(query_.relation);
    if (rules.empty()) return;
    // Identical bodies (same edge sequence, or same fill length) are encoded once.
    std::map<std::vector<int>, double> unique;
    for (const auto& rule : rules) {
      const auto groundings = ground(ctx_.index, rule, query_.head, query_.tail, model_.hyper.g_max);
      if (groundings.empty()) {
        unique[std::vector<int>(rule.body.size(), 0)] += 1.0;
        continue;
      }
      for (const auto& gr : groundings) {
        std::vector<int> key;
        for (EdgeId e : gr.edges) key.push_back(slot_for_edge(e));
        unique[key] += 1.0;
      }
    }
    const Vec& te = slots_[0].concat;
    for (auto& [key, mult] : unique) {
      std::vector<Vec> inputs;
      for (int s : key) inputs.push_back(slots_[static_cast<std::size_t>(s)].concat);
      Body b{key, mult, gru_forward(model_.params.re, inputs), {}, 0};
      b.diff = b.trace.last() - te;
      b.distance = b.diff.norm();
      energy_.e_global += mult * b.distance;
      bodies_.push_back(std::move(b));
    }
  }

  void gather(Side& side, NodeId node) {
    bool has_query = false;
    for (EdgeId id : ctx_.graph.incident(node)) {
      Neighbor n;
      if (query_edge_ && id == *query_edge_) {
        n.slot = 0;
        has_query = true;
      } else if (opts_.mode == NeighborMode::Live) {
        n.slot = slot_for_edge(id);
      } else {
        n.cached = &opts_.cache->concat.at(id);
      }
      side.nbrs.push_back(std::move(n));
    }
    if (!has_query) side.nbrs.push_back(Neighbor{0, nullptr, {}, 0, 0});
  }

  void forward_side(Side& side) {
    const ModelParams& P = model_.params;
    const auto F = P.W.rows();
    const double query_score = P.attn.head(F).dot(v_query_);
    double max_score = -std::numeric_limits<double>::infinity();
    for (auto& n : side.nbrs) {
      n.v = P.W * concat_of(n);
      n.raw = query_score + P.attn.tail(F).dot(n.v);
      max_score = std::max(max_score, leaky(n.raw));
    }
    double z = 0;
    for (auto& n : side.nbrs) {
      n.weight = std::exp(leaky(n.raw) - max_score);
      z += n.weight;
    }
    side.agg = Vec::Zero(F);
    for (auto& n : side.nbrs) {
      n.weight /= z;
      side.agg += n.weight * n.v;
    }
    side.out = side.agg.unaryExpr([](double x) { return x > 0 ? x : std::expm1(x); });
  }

  void forward_local() {
    gather(head_, query_.head);
    gather(tail_, query_.tail);
    v_query_ = model_.params.W * slots_[0].concat;
    forward_side(head_);
    forward_side(tail_);
    energy_.e_local = e_local(head_.out, tail_.out);
    local_done_ = true;
  }

  void backward_side(const Side& side, const Vec& d_out, Vec& dv_query, ModelParams& grad,
                     std::vector<Vec>& d_concat) const {
    const ModelParams& P = model_.params;
    const auto F = P.W.rows();
    const Vec d_agg = d_out.cwiseProduct(side.agg.unaryExpr([](double x) { return x > 0 ? 1.0 : std::exp(x); }));
    double mean = 0;
    std::vector<double> d_weight(side.nbrs.size());
    for (std::size_t j = 0; j < side.nbrs.size(); ++j) {
      d_weight[j] = d_agg.dot(side.nbrs[j].v);
      mean += side.nbrs[j].weight * d_weight[j];
    }
    for (std::size_t j = 0; j < side.nbrs.size(); ++j) {
      const auto& n = side.nbrs[j];
      const double d_score = n.weight * (d_weight[j] - mean);
      const double d_raw = d_score * (n.raw > 0 ? 1.0 : kLeakySlope);
      grad.attn.head(F) += d_raw * v_query_;
      grad.attn.tail(F) += d_raw * n.v;
      dv_query += d_raw * P.attn.head(F);
      const Vec dv = n.weight * d_agg + d_raw * P.attn.tail(F);
      grad.W.noalias() += dv * concat_of(n).transpose();
      if (n.slot >= 0) d_concat[static_cast<std::size_t>(n.slot)].noalias() += P.W.transpose() * dv;
    }
  }

  static double leaky(double x) { return x > 0 ? x : kLeakySlope * x; }

  static std::vector<double> weights(const Side& s) {
    std::vector<double> w;
    for (const auto& n : s.nbrs) w.push_back(n.weight);
    return w;
  }

  const Model& model_;
  const ModelContext& ctx_;
  Triple query_;
  EnergyOptions opts_;
  std::optional<EdgeId> query_edge_;
  std::vector<Slot> slots_;  // slot 0 is the query triple
  std::unordered_map<EdgeId, int> slot_of_edge_;
  std::vector<Body> bodies_;
  Side head_, tail_;
  Vec v_query_;
  bool local_done_ = false;
  EnergyBreakdown energy_;
};

inline EnergyBreakdown energy(const Model& m, const ModelContext& ctx, const Triple& t, const EnergyOptions& opts = {}) {
  return EnergyTape(m, ctx, t, opts).energy();
}

inline double e_global(const Model& m, const ModelContext& ctx, const Triple& t) {
  Model global_only = m;
  global_only.hyper.lambda = 0;
  global_only.hyper.lambda_t = 0;
  return EnergyTape(global_only, ctx, t).energy().e_global;
}

/// Attention-aggregated head and tail views (p, q) of a triple.
inline std::pair<Vec, Vec> attend_aggregate(const Model& m, const ModelContext& ctx, const Triple& t,
                                            const EncodingCache* cache = nullptr) {
  EnergyOptions opts{cache ? NeighborMode::Cached : NeighborMode::Live, cache, true};
  EnergyTape tape(m, ctx, t, opts);
  return {tape.p(), tape.q()};
}

struct TriplePair {
  Triple positive;
  Triple negative;
};

inline double margin_loss(double gamma, double e_pos, double e_neg) { return std::max(0.0, gamma + e_pos - e_neg); }

struct BatchGradient {
  ModelParams grad;
  double loss = 0;
  std::size_t active = 0;  // pairs with a positive hinge
};

inline constexpr std::size_t kGradientChunks = 8;

/// Exact gradient of sum over pairs of max(0, gamma + E(pos) - E(neg)).
/// Pairs are split into a fixed number of contiguous chunks reduced in order,
/// so the result does not depend on the thread count.
inline BatchGradient batch_gradient(const Model& m, const ModelContext& ctx, std::span<const TriplePair> batch,
                                    const EnergyOptions& opts = {}, unsigned threads = 1) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min(kGradientChunks, batch.size()));
  const std::size_t per = (batch.size() + chunks - 1) / std::max<std::size_t>(chunks, 1);
  std::vector<BatchGradient> parts(chunks);

  auto work = [&](std::size_t c) {
    BatchGradient& part = parts[c];
    part.grad = ModelParams::zeros_like(m.params);
    const std::size_t b = std::min(batch.size(), c * per), e = std::min(batch.size(), b + per);
    for (std::size_t i = b; i < e; ++i) {
      EnergyTape pos(m, ctx, batch[i].positive, opts);
      EnergyTape neg(m, ctx, batch[i].negative, opts);
      const double l = margin_loss(m.hyper.gamma, pos.energy().e_total, neg.energy().e_total);
      part.loss += l;
      if (l <= 0) continue;
      ++part.active;
      pos.backward(1.0, part.grad);
      neg.backward(-1.0, part.grad);
    }
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += threads) work(c);
      });
    for (auto& th : pool) th.join();
  }

  BatchGradient total{ModelParams::zeros_like(m.params), 0, 0};
  for (const auto& p : parts) {
    if (p.grad.W.size() == 0) continue;
    total.grad.add_scaled(p.grad, 1.0);
    total.loss += p.loss;
    total.active += p.active;
  }
  total.grad.check_finite("gradient");
  return total;
}

// Checkpoint layout (all little-endian):
//   "GOLDCKPT" | u32 version = 1
//   u32 d | u32 F | u32 dim_in | f64 lambda | f64 gamma | f64 lambda_t |
//   u32 k_rules | u64 seed
//   per tensor in ModelParams::visit order:
//     u32 rank (1 or 2) | u32 dims[rank] | f64 values, column-major
inline constexpr std::string_view kCheckpointMagic = "GOLDCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }
inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Model& m) {
  std::string buf(kCheckpointMagic);
  const Hyper& h = m.hyper;
  detail::put_u32(buf, kCheckpointVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(h.d));
  detail::put_u32(buf, static_cast<std::uint32_t>(h.F));
  detail::put_u32(buf, static_cast<std::uint32_t>(h.dim_in));
  detail::put_f64(buf, h.lambda);
  detail::put_f64(buf, h.gamma);
  detail::put_f64(buf, h.lambda_t);
  detail::put_u32(buf, static_cast<std::uint32_t>(h.k_rules));
  detail::put_u64(buf, h.seed);
  ModelParams::visit(m.params, [&](const std::string&, const auto& t) {
    using T = std::remove_cvref_t<decltype(t)>;
    if constexpr (T::ColsAtCompileTime == 1) {
      detail::put_u32(buf, 1);
      detail::put_u32(buf, static_cast<std::uint32_t>(t.size()));
    } else {
      detail::put_u32(buf, 2);
      detail::put_u32(buf, static_cast<std::uint32_t>(t.rows()));
      detail::put_u32(buf, static_cast<std::uint32_t>(t.cols()));
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) detail::put_f64(buf, t.data()[i]);
  });
  return buf;
}

inline void save_checkpoint(const Model& m, const std::string& path) {
  const std::string buf = serialize_checkpoint(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path);
}

/// Reads a checkpoint. g_max is not stored; it comes from configuration.
inline Model load_checkpoint(const std::string& path, std::size_t g_max = 1) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader rd(bytes, path);
  if (std::memcmp(rd.take(8, "magic"), kCheckpointMagic.data(), 8) != 0) throw DataError(path + ": not a checkpoint");
  if (const auto v = rd.u32("version"); v != kCheckpointVersion)
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(v));
  Hyper h;
  h.d = rd.u32("d");
  h.F = rd.u32("F");
  h.dim_in = rd.u32("dim_in");
  auto f64 = [&](const char* what) { return std::bit_cast<double>(detail::get_u64(rd.take(8, what))); };
  h.lambda = f64("lambda");
  h.gamma = f64("gamma");
  h.lambda_t = f64("lambda_t");
  h.k_rules = rd.u32("k_rules");
  h.seed = detail::get_u64(rd.take(8, "seed"));
  h.g_max = g_max;
  Model m = init_model(h);
  ModelParams::visit(m.params, [&](const std::string& name, auto& t) {
    using T = std::remove_cvref_t<decltype(t)>;
    const auto rank = rd.u32("tensor rank");
    const bool is_vec = T::ColsAtCompileTime == 1;
    if (rank != (is_vec ? 1u : 2u)) throw DataError(path + ": bad rank for " + name);
    const Eigen::Index rows = rd.u32("tensor shape");
    const Eigen::Index cols = is_vec ? 1 : static_cast<Eigen::Index>(rd.u32("tensor shape"));
    if (rows != t.rows() || cols != t.cols()) throw DataError(path + ": shape mismatch for " + name);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = f64("tensor values");
  });
  if (!rd.done()) throw DataError(path + ": trailing bytes");
  m.params.check_finite(path);
  return m;
}

}  // namespace gold
