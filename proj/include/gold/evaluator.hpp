#pragma once

// Ranking triples by energy, Recall@k and AUC, and a comparator-driven merge
// sort for external pairwise judges.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "gold/error.hpp"
#include "gold/graph.hpp"
#include "gold/model.hpp"

namespace gold {

struct RankedEntry {
  EdgeId edge = 0;
  double score = 0;
};

/// Entries sorted by descending score; equal scores keep edge order.
struct RankedList {
  std::vector<RankedEntry> entries;

  std::size_t size() const { return entries.size(); }
};

inline RankedList rank_scores(std::span<const double> scores) {
  RankedList list;
  list.entries.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) list.entries.push_back({static_cast<EdgeId>(i), scores[i]});
  std::stable_sort(list.entries.begin(), list.entries.end(),
                   [](const RankedEntry& a, const RankedEntry& b) { return a.score > b.score; });
  return list;
}

/// Energy of every edge under `m`; neighbor encodings are computed once.
inline std::vector<double> energies(const Model& m, const ModelContext& ctx, unsigned threads = 1) {
  const EncodingCache cache = encode_all_edges(m.params, ctx, threads);
  const EnergyOptions opts{NeighborMode::Cached, &cache, false};
  const auto& edges = ctx.graph.edges();
  std::vector<double> scores(edges.size());
  auto work = [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) scores[i] = EnergyTape(m, ctx, edges[i], opts).energy().e_total;
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, edges.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (edges.size() + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::size_t b = std::min(edges.size(), w * chunk);
      pool.emplace_back(work, b, std::min(edges.size(), b + chunk));
    }
    for (auto& th : pool) th.join();
  }
  return scores;
}

inline RankedList score_all(const Model& m, const ModelContext& ctx, unsigned threads = 1) {
  return rank_scores(energies(m, ctx, threads));
}

/// Keeps only entries whose edge is selected by `mask`, preserving order.
inline RankedList restrict_to(const RankedList& list, const std::vector<bool>& mask) {
  RankedList out;
  for (const auto& e : list.entries)
    if (mask.at(e.edge)) out.entries.push_back(e);
  return out;
}

/// Fraction of the k noisy entries found in the first k positions, where k
/// is the number of noisy labels among the listed entries.
inline double recall_at_k(const RankedList& ranked, const std::vector<bool>& noisy) {
  std::size_t k = 0;
  for (const auto& e : ranked.entries) k += noisy.at(e.edge) ? 1 : 0;
  if (k == 0) throw DataError("recall@k needs at least one noisy label");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += noisy[ranked.entries[i].edge] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

/// Probability that a random noisy entry outscores a random clean one, ties
/// credited one half, via the Mann-Whitney rank sum with midranks.
inline double auc(std::span<const double> scores, const std::vector<bool>& noisy) {
  const std::size_t n = scores.size();
  if (noisy.size() != n) throw DataError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Doubled ranks keep midranks integral.
  std::int64_t rank_sum2 = 0;
  std::int64_t n_noisy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const auto midrank2 = static_cast<std::int64_t>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (noisy[order[k]]) {
        rank_sum2 += midrank2;
        ++n_noisy;
      }
    i = j;
  }
  const std::int64_t n_clean = static_cast<std::int64_t>(n) - n_noisy;
  if (n_noisy == 0 || n_clean == 0) throw DataError("auc needs both noisy and clean labels");
  const std::int64_t u2 = rank_sum2 - n_noisy * (n_noisy + 1);
  return static_cast<double>(u2) / static_cast<double>(2 * n_noisy * n_clean);
}

inline double auc(const RankedList& ranked, const std::vector<bool>& noisy) {
  std::vector<double> scores;
  std::vector<bool> labels;
  for (const auto& e : ranked.entries) {
    scores.push_back(e.score);
    labels.push_back(noisy.at(e.edge));
  }
  return auc(scores, labels);
}

struct Metrics {
  double recall_at_k = 0;
  double auc = 0;
  std::size_t k = 0;
  std::size_t n = 0;
};

inline Metrics evaluate(const RankedList& ranked, const std::vector<bool>& noisy) {
  Metrics m;
  m.n = ranked.size();
  for (const auto& e : ranked.entries) m.k += noisy.at(e.edge) ? 1 : 0;
  m.recall_at_k = recall_at_k(ranked, noisy);
  m.auc = auc(ranked, noisy);
  return m;
}

inline nlohmann::ordered_json to_json(const Metrics& m) {
  return {{"recall_at_k", m.recall_at_k}, {"auc", m.auc}, {"k", m.k}, {"n", m.n}};
}

/// Ranked TSV: score, label ("clean", "noisy" or "unknown"), head, relation, tail.
inline void write_ranked(const Graph& g, const RankedList& ranked, const std::vector<bool>* noisy,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  char buf[40];
  for (const auto& e : ranked.entries) {
    const auto& t = g.edge(e.edge);
    std::snprintf(buf, sizeof buf, "%.17g", e.score);
    const char* label = noisy ? ((*noisy)[e.edge] ? "noisy" : "clean") : "unknown";
    out << buf << '\t' << label << '\t' << g.node_text(t.head) << '\t' << g.relation_text(t.relation) << '\t'
        << g.node_text(t.tail) << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

/// Reads a ranked TSV back as (list in file order, labels by position).
inline std::pair<RankedList, std::vector<bool>> read_ranked(const std::string& path) {
  RankedList list;
  std::vector<bool> noisy;
  detail::for_each_tsv_record(path, [&](std::size_t line_no, std::span<const std::string_view> f) {
    detail::check_fields(path, line_no, f, 5);
    const std::string where = path + ":" + std::to_string(line_no);
    double score = 0;
    try {
      std::size_t used = 0;
      score = std::stod(std::string(f[0]), &used);
      if (used != f[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(where + ": bad score '" + std::string(f[0]) + "'");
    }
    if (f[1] != "clean" && f[1] != "noisy") throw DataError(where + ": label must be 'clean' or 'noisy'");
    list.entries.push_back({static_cast<EdgeId>(noisy.size()), score});
    noisy.push_back(f[1] == "noisy");
  });
  return {std::move(list), std::move(noisy)};
}

/// Raised when the pairwise oracle fails; carries the pair being compared.
template <typename T>
struct OracleFailure : std::runtime_error {
  OracleFailure(const std::string& what, T a, T b) : std::runtime_error(what), first(std::move(a)), second(std::move(b)) {}
  T first;
  T second;
};

/// Merge sort driven by a pairwise oracle. `prefer(a, b)` returns true when
/// `a` should be placed before `b` (is more likely noisy). Each merge takes
/// from the left run while the oracle prefers its head, so ties decided in
/// favor of the left element keep the sort stable.
template <typename T, typename Oracle>
std::vector<T> oracle_mergesort(std::vector<T> items, Oracle&& prefer) {
  if (items.size() <= 1) return items;
  const std::size_t half = items.size() / 2;
  std::vector<T> left = oracle_mergesort(std::vector<T>(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(half)), prefer);
  std::vector<T> right = oracle_mergesort(std::vector<T>(items.begin() + static_cast<std::ptrdiff_t>(half), items.end()), prefer);
  std::size_t i = 0, j = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (i >= left.size()) {
      items[k] = std::move(right[j++]);
    } else if (j >= right.size()) {
      items[k] = std::move(left[i++]);
    } else {
      bool take_left;
      try {
        take_left = prefer(std::as_const(left[i]), std::as_const(right[j]));
      } catch (const std::exception& e) {
        throw OracleFailure<T>(std::string("oracle failed: ") + e.what(), left[i], right[j]);
      }
      items[k] = take_left ? std::move(left[i++]) : std::move(right[j++]);
    }
  }
  return items;
}

}  // namespace gold
