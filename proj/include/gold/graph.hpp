#pragma once

// In-memory commonsense knowledge graph: interned free-text nodes and
// relations, a deduplicated edge list, and per-node incident-edge indices.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gold/error.hpp"

namespace gold {

using NodeId = std::uint32_t;
using RelationId = std::uint32_t;
using EdgeId = std::uint32_t;

struct Triple {
  NodeId head = 0;
  RelationId relation = 0;
  NodeId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t x = (std::uint64_t{t.head} << 32) ^ t.tail;
    x ^= std::uint64_t{t.relation} * 0x9E3779B97F4A7C15ULL;
    x ^= x >> 33;
    x *= 0xFF51AFD7ED558CCDULL;
    x ^= x >> 33;
    return static_cast<std::size_t>(x);
  }
};

/// Bijection between surface strings and dense ids, in first-appearance order.
class Interner {
 public:
  std::uint32_t intern(std::string_view surface) {
    if (auto it = index_.find(std::string(surface)); it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(surfaces_.size());
    surfaces_.emplace_back(surface);
    index_.emplace(surfaces_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(std::string_view surface) const {
    if (auto it = index_.find(std::string(surface)); it != index_.end()) return it->second;
    return std::nullopt;
  }

  const std::string& surface(std::uint32_t id) const { return surfaces_.at(id); }
  std::size_t size() const noexcept { return surfaces_.size(); }
  const std::vector<std::string>& surfaces() const noexcept { return surfaces_; }

  friend bool operator==(const Interner& a, const Interner& b) { return a.surfaces_ == b.surfaces_; }

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

class Graph {
 public:
  NodeId intern_node(std::string_view surface) {
    const auto id = nodes_.intern(surface);
    if (id == incident_.size()) incident_.emplace_back();
    return id;
  }
  RelationId intern_relation(std::string_view surface) { return relations_.intern(surface); }

  /// Adds a triple over already-interned ids. Returns false if it was present.
  bool add_edge(const Triple& t) {
    check_ids(t);
    const auto id = static_cast<EdgeId>(edges_.size());
    if (!membership_.emplace(t, id).second) return false;
    edges_.push_back(t);
    incident_[t.head].push_back(id);
    if (t.tail != t.head) incident_[t.tail].push_back(id);
    return true;
  }

  bool add_edge(std::string_view head, std::string_view relation, std::string_view tail) {
    const NodeId h = intern_node(head);
    const RelationId r = intern_relation(relation);
    const NodeId t = intern_node(tail);
    return add_edge(Triple{h, r, t});
  }

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_relations() const noexcept { return relations_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  bool empty() const noexcept { return edges_.empty(); }

  const Interner& nodes() const noexcept { return nodes_; }
  const Interner& relations() const noexcept { return relations_; }
  const std::vector<Triple>& edges() const noexcept { return edges_; }
  const Triple& edge(EdgeId id) const { return edges_.at(id); }

  const std::string& node_text(NodeId id) const { return nodes_.surface(id); }
  const std::string& relation_text(RelationId id) const { return relations_.surface(id); }

  bool contains(const Triple& t) const { return membership_.contains(t); }

  std::optional<EdgeId> find_edge(const Triple& t) const {
    if (auto it = membership_.find(t); it != membership_.end()) return it->second;
    return std::nullopt;
  }

  /// Edge ids incident to `e`, ascending. A self-loop appears once.
  std::span<const EdgeId> incident(NodeId e) const {
    if (e >= incident_.size()) throw DataError("unknown node id " + std::to_string(e));
    return incident_[e];
  }

  /// Every triple with `e` as head or tail, in edge-index order.
  std::vector<Triple> neighbors(NodeId e) const {
    std::vector<Triple> out;
    for (EdgeId id : incident(e)) out.push_back(edges_[id]);
    return out;
  }

 private:
  void check_ids(const Triple& t) const {
    if (t.head >= nodes_.size() || t.tail >= nodes_.size() || t.relation >= relations_.size())
      throw DataError("triple references an id outside the intern tables");
  }

  Interner nodes_;
  Interner relations_;
  std::vector<Triple> edges_;
  std::unordered_map<Triple, EdgeId, TripleHash> membership_;
  std::vector<std::vector<EdgeId>> incident_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

// Calls fn(line_number, fields) for every non-blank line; fields are trimmed.
template <typename Fn>
void for_each_tsv_record(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_tabs(line);
    for (auto& f : fields) f = trim(f);
    fn(line_no, std::span<const std::string_view>(fields));
  }
}

inline void check_fields(const std::string& path, std::size_t line_no,
                         std::span<const std::string_view> fields, std::size_t expected) {
  if (fields.size() != expected)
    throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                    " tab-separated fields, found " + std::to_string(fields.size()));
  for (auto f : fields)
    if (f.empty()) throw DataError(path + ":" + std::to_string(line_no) + ": empty field");
}

}  // namespace detail

/// Loads a head<TAB>relation<TAB>tail file. Duplicate lines collapse.
inline Graph load_tsv(const std::string& path) {
  Graph g;
  detail::for_each_tsv_record(path, [&](std::size_t line_no, std::span<const std::string_view> f) {
    detail::check_fields(path, line_no, f, 3);
    g.add_edge(f[0], f[1], f[2]);
  });
  if (g.empty()) throw DataError(path + ": no triples");
  return g;
}

inline void write_tsv(const Graph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& t : g.edges())
    out << g.node_text(t.head) << '\t' << g.relation_text(t.relation) << '\t' << g.node_text(t.tail) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

/// A graph whose edges carry clean/noisy labels (4-column TSV).
struct LabeledGraph {
  Graph graph;
  std::vector<bool> noisy;  // indexed by EdgeId
  bool labeled = true;      // false when read from a 3-column file

  std::size_t noisy_count() const { return static_cast<std::size_t>(std::count(noisy.begin(), noisy.end(), true)); }
};

inline LabeledGraph load_labeled_tsv(const std::string& path) {
  LabeledGraph lg;
  detail::for_each_tsv_record(path, [&](std::size_t line_no, std::span<const std::string_view> f) {
    detail::check_fields(path, line_no, f, 4);
    bool noisy = false;
    if (f[3] == "noisy") {
      noisy = true;
    } else if (f[3] != "clean") {
      throw DataError(path + ":" + std::to_string(line_no) + ": label must be 'clean' or 'noisy'");
    }
    if (lg.graph.add_edge(f[0], f[1], f[2])) {
      lg.noisy.push_back(noisy);
    } else {
      const Triple t{*lg.graph.nodes().find(f[0]), *lg.graph.relations().find(f[1]), *lg.graph.nodes().find(f[2])};
      if (lg.noisy[*lg.graph.find_edge(t)] != noisy)
        throw DataError(path + ":" + std::to_string(line_no) + ": duplicate triple with conflicting label");
    }
  });
  if (lg.graph.empty()) throw DataError(path + ": no triples");
  return lg;
}

/// Accepts either a 3-column or 4-column file; unlabeled edges are clean.
inline LabeledGraph load_any_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    if (detail::split_tabs(line).size() == 4) return load_labeled_tsv(path);
    break;
  }
  LabeledGraph lg{load_tsv(path), {}, false};
  lg.noisy.assign(lg.graph.num_edges(), false);
  return lg;
}

}  // namespace gold
