#pragma once

// Chain-shaped Horn rule mining with exact support/confidence counts, and
// body-grounding queries used by the global energy.
//
//   head(x, y) <- b1(x, z1) ^ b2(z1, z2) ^ ... ^ bk(z_{k-1}, y)
//
// Each body atom carries a direction: forward atoms follow an edge from the
// previous chain variable to the next, inverse atoms follow it backwards.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "gold/error.hpp"
#include "gold/graph.hpp"

namespace gold {

enum class Direction : std::uint8_t { Forward = 0, Inverse = 1 };

struct Atom {
  RelationId relation = 0;
  Direction direction = Direction::Forward;

  friend auto operator<=>(const Atom&, const Atom&) = default;
};

struct Rule {
  RelationId head = 0;
  std::vector<Atom> body;
  std::uint64_t support = 0;
  std::uint64_t body_count = 0;
  double confidence = 0.0;

  friend bool operator==(const Rule&, const Rule&) = default;
};

/// Concrete edges instantiating a rule body, in atom order.
struct RuleGrounding {
  std::vector<EdgeId> edges;
};

struct MiningOptions {
  std::size_t max_body_atoms = 3;
  std::uint64_t min_support = 2;
  double min_confidence = 0.1;
  bool pca_confidence = false;
  unsigned threads = 1;
};

/// Orders rules by head relation, then descending confidence, descending
/// support, then lexicographic body.
inline bool rule_order(const Rule& a, const Rule& b) {
  if (a.head != b.head) return a.head < b.head;
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.support != b.support) return a.support > b.support;
  return a.body < b.body;
}

/// Per-node adjacency sorted by (relation, neighbor), for both edge directions.
class ChainIndex {
 public:
  struct Step {
    RelationId relation;
    NodeId node;
    EdgeId edge;
    friend auto operator<=>(const Step&, const Step&) = default;
  };

  explicit ChainIndex(const Graph& g) : graph_(&g) {
    const std::size_t n = g.num_nodes();
    std::vector<std::size_t> out_deg(n + 1, 0), in_deg(n + 1, 0);
    for (const auto& t : g.edges()) {
      ++out_deg[t.head + 1];
      ++in_deg[t.tail + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
      out_deg[i + 1] += out_deg[i];
      in_deg[i + 1] += in_deg[i];
    }
    out_offsets_ = out_deg;
    in_offsets_ = in_deg;
    out_.resize(g.num_edges());
    in_.resize(g.num_edges());
    for (EdgeId id = 0; id < g.num_edges(); ++id) {
      const auto& t = g.edge(id);
      out_[out_deg[t.head]++] = {t.relation, t.tail, id};
      in_[in_deg[t.tail]++] = {t.relation, t.head, id};
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::sort(out_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[i]),
                out_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[i + 1]));
      std::sort(in_.begin() + static_cast<std::ptrdiff_t>(in_offsets_[i]),
                in_.begin() + static_cast<std::ptrdiff_t>(in_offsets_[i + 1]));
    }
  }

  const Graph& graph() const noexcept { return *graph_; }

  /// Steps from `node` along `atom`, ascending by destination node.
  std::span<const Step> steps(NodeId node, Atom atom) const {
    const auto& list = atom.direction == Direction::Forward ? out_ : in_;
    const auto& off = atom.direction == Direction::Forward ? out_offsets_ : in_offsets_;
    if (node + 1 >= off.size()) return {};
    auto first = list.begin() + static_cast<std::ptrdiff_t>(off[node]);
    auto last = list.begin() + static_cast<std::ptrdiff_t>(off[node + 1]);
    auto lo = std::lower_bound(first, last, atom.relation, [](const Step& s, RelationId r) { return s.relation < r; });
    auto hi = std::upper_bound(lo, last, atom.relation, [](RelationId r, const Step& s) { return r < s.relation; });
    return {lo, hi};
  }

  /// Distinct relations leaving `node` as head.
  std::vector<RelationId> head_relations(NodeId node) const {
    std::vector<RelationId> rels;
    for (std::size_t i = out_offsets_[node]; i < out_offsets_[node + 1]; ++i)
      if (rels.empty() || rels.back() != out_[i].relation) rels.push_back(out_[i].relation);
    return rels;
  }

 private:
  const Graph* graph_;
  std::vector<std::size_t> out_offsets_, in_offsets_;
  std::vector<Step> out_, in_;
};

namespace detail {

using NodePair = std::uint64_t;
inline NodePair pack(NodeId x, NodeId y) { return (NodePair{x} << 32) | y; }
inline NodeId pair_first(NodePair p) { return static_cast<NodeId>(p >> 32); }
inline NodeId pair_second(NodePair p) { return static_cast<NodeId>(p & 0xFFFFFFFFu); }

struct MinerState {
  const ChainIndex& index;
  const MiningOptions& opts;
  std::size_t num_relations;
  // (x, y) -> relations r with r(x, y) in E
  std::unordered_map<NodePair, std::vector<RelationId>> head_lookup;
  std::vector<std::vector<RelationId>> head_relations;  // per node, for PCA
};

// Emits rules for one fixed body whose satisfying (x, y) pairs are `pairs`
// (sorted, unique).
inline void emit_rules(const MinerState& st, const std::vector<Atom>& body, const std::vector<NodePair>& pairs,
                       std::vector<Rule>& out) {
  std::vector<std::uint64_t> support(st.num_relations, 0);
  std::vector<std::uint64_t> pca(st.opts.pca_confidence ? st.num_relations : 0, 0);
  for (NodePair p : pairs) {
    if (auto it = st.head_lookup.find(p); it != st.head_lookup.end())
      for (RelationId r : it->second) ++support[r];
    if (st.opts.pca_confidence)
      for (RelationId r : st.head_relations[pair_first(p)]) ++pca[r];
  }
  const auto body_count = static_cast<std::uint64_t>(pairs.size());
  for (RelationId r = 0; r < st.num_relations; ++r) {
    if (support[r] == 0 || support[r] < st.opts.min_support) continue;
    if (body.size() == 1 && body[0] == Atom{r, Direction::Forward}) continue;
    const std::uint64_t denom = st.opts.pca_confidence ? pca[r] : body_count;
    const double conf = static_cast<double>(support[r]) / static_cast<double>(denom);
    if (conf < st.opts.min_confidence) continue;
    out.push_back(Rule{r, body, support[r], denom, conf});
  }
}

inline std::vector<NodePair> extend(const ChainIndex& index, const std::vector<NodePair>& pairs, Atom atom) {
  std::vector<NodePair> next;
  for (NodePair p : pairs)
    for (const auto& s : index.steps(pair_second(p), atom)) next.push_back(pack(pair_first(p), s.node));
  std::sort(next.begin(), next.end());
  next.erase(std::unique(next.begin(), next.end()), next.end());
  return next;
}

inline void mine_from(const MinerState& st, std::vector<Atom>& body, const std::vector<NodePair>& pairs,
                      std::vector<Rule>& out) {
  if (pairs.empty()) return;
  emit_rules(st, body, pairs, out);
  if (body.size() >= st.opts.max_body_atoms) return;
  for (RelationId r = 0; r < st.num_relations; ++r) {
    for (Direction d : {Direction::Forward, Direction::Inverse}) {
      body.push_back({r, d});
      mine_from(st, body, extend(st.index, pairs, body.back()), out);
      body.pop_back();
    }
  }
}

}  // namespace detail

/// Mines every chain rule with 1..max_body_atoms atoms meeting both
/// thresholds. Counts are over distinct (x, y) variable bindings; rules with
/// zero support are never emitted, nor is the trivial rule r(x,y) <- r(x,y).
inline std::vector<Rule> mine(const Graph& g, const MiningOptions& opts = {}) {
  if (opts.max_body_atoms < 1) throw ConfigError("max_body_atoms must be >= 1");
  std::vector<Rule> rules;
  if (g.empty()) return rules;

  const ChainIndex index(g);
  detail::MinerState st{index, opts, g.num_relations(), {}, {}};
  for (const auto& t : g.edges()) st.head_lookup[detail::pack(t.head, t.tail)].push_back(t.relation);
  if (opts.pca_confidence) {
    st.head_relations.resize(g.num_nodes());
    for (NodeId n = 0; n < g.num_nodes(); ++n) st.head_relations[n] = index.head_relations(n);
  }

  // Independent subtrees keyed by the first body atom.
  std::vector<Atom> firsts;
  for (RelationId r = 0; r < g.num_relations(); ++r)
    for (Direction d : {Direction::Forward, Direction::Inverse}) firsts.push_back({r, d});
  std::vector<std::vector<Rule>> partial(firsts.size());

  auto work = [&](std::size_t i) {
    std::vector<detail::NodePair> pairs;
    for (const auto& t : g.edges()) {
      if (t.relation != firsts[i].relation) continue;
      pairs.push_back(firsts[i].direction == Direction::Forward ? detail::pack(t.head, t.tail)
                                                                 : detail::pack(t.tail, t.head));
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<Atom> body{firsts[i]};
    detail::mine_from(st, body, pairs, partial[i]);
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(firsts.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < firsts.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < firsts.size();) work(i);
      });
    for (auto& th : pool) th.join();
  }

  for (auto& p : partial) rules.insert(rules.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  std::sort(rules.begin(), rules.end(), rule_order);
  return rules;
}

/// Keeps at most k rules per head relation, best first. Every head relation
/// present in `rules` gets an entry, possibly empty.
inline std::map<RelationId, std::vector<Rule>> top_k_per_relation(std::vector<Rule> rules, std::size_t k) {
  std::sort(rules.begin(), rules.end(), rule_order);
  std::map<RelationId, std::vector<Rule>> out;
  for (auto& r : rules) {
    auto& bucket = out[r.head];
    if (bucket.size() < k) bucket.push_back(std::move(r));
  }
  return out;
}

/// Up to `limit` groundings of the rule body with x = h and y = t, in
/// ascending order of the intermediate node sequence. No edge is used twice
/// within one grounding.
inline std::vector<RuleGrounding> ground(const ChainIndex& index, const Rule& rule, NodeId h, NodeId t,
                                         std::size_t limit) {
  std::vector<RuleGrounding> out;
  const std::size_t k = rule.body.size();
  if (k == 0 || limit == 0 || h >= index.graph().num_nodes() || t >= index.graph().num_nodes()) return out;
  std::vector<EdgeId> chain;
  chain.reserve(k);

  auto dfs = [&](auto&& self, NodeId at, std::size_t depth) -> void {
    for (const auto& s : index.steps(at, rule.body[depth])) {
      if (out.size() >= limit) return;
      if (depth + 1 == k && s.node != t) continue;
      if (std::find(chain.begin(), chain.end(), s.edge) != chain.end()) continue;
      chain.push_back(s.edge);
      if (depth + 1 == k)
        out.push_back({chain});
      else
        self(self, s.node, depth + 1);
      chain.pop_back();
    }
  };
  dfs(dfs, h, 0);
  return out;
}

inline std::vector<RuleGrounding> ground(const Graph& g, const Rule& rule, NodeId h, NodeId t, std::size_t limit) {
  return ground(ChainIndex(g), rule, h, t, limit);
}

inline std::string format_rule(const Graph& g, const Rule& rule) {
  auto var = [&](std::size_t i) -> std::string {
    if (i == 0) return "x";
    if (i == rule.body.size()) return "y";
    return "z" + std::to_string(i);
  };
  std::string s = g.relation_text(rule.head) + "(x,y) <- ";
  for (std::size_t i = 0; i < rule.body.size(); ++i) {
    const auto& a = rule.body[i];
    if (i) s += " ^ ";
    const bool fwd = a.direction == Direction::Forward;
    s += g.relation_text(a.relation) + "(" + (fwd ? var(i) : var(i + 1)) + "," + (fwd ? var(i + 1) : var(i)) + ")";
  }
  return s;
}

// JSON Lines: {"head": str, "body": [{"rel": str, "dir": "fwd"|"inv"}, ...],
//              "support": int, "confidence": float, "body_count": int}
inline void write_rules(const Graph& g, std::span<const Rule> rules, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& r : rules) {
    nlohmann::ordered_json j;
    j["head"] = g.relation_text(r.head);
    j["body"] = nlohmann::ordered_json::array();
    for (const auto& a : r.body)
      j["body"].push_back({{"rel", g.relation_text(a.relation)}, {"dir", a.direction == Direction::Forward ? "fwd" : "inv"}});
    j["support"] = r.support;
    j["confidence"] = r.confidence;
    j["body_count"] = r.body_count;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

inline std::vector<Rule> read_rules(const Graph& g, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<Rule> rules;
  std::string line;
  std::size_t line_no = 0;
  auto relation = [&](const std::string& name) {
    auto id = g.relations().find(name);
    if (!id) throw DataError(path + ":" + std::to_string(line_no) + ": unknown relation '" + name + "'");
    return *id;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Rule r;
      r.head = relation(j.at("head").get<std::string>());
      for (const auto& a : j.at("body")) {
        const auto dir = a.at("dir").get<std::string>();
        if (dir != "fwd" && dir != "inv") throw DataError(path + ":" + std::to_string(line_no) + ": bad dir '" + dir + "'");
        r.body.push_back({relation(a.at("rel").get<std::string>()), dir == "fwd" ? Direction::Forward : Direction::Inverse});
      }
      if (r.body.empty()) throw DataError(path + ":" + std::to_string(line_no) + ": empty rule body");
      r.support = j.at("support").get<std::uint64_t>();
      r.confidence = j.at("confidence").get<double>();
      r.body_count = j.contains("body_count") ? j["body_count"].get<std::uint64_t>()
                     : r.confidence > 0 ? static_cast<std::uint64_t>(std::llround(static_cast<double>(r.support) / r.confidence))
                                        : 0;
      rules.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rules;
}

}  // namespace gold
