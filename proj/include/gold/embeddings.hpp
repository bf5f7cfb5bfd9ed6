#pragma once

// Frozen text embeddings keyed by surface string, and the GOLDEMB1 file
// format:
//
//   "GOLDEMB1"            8 bytes
//   count                 u32 little-endian
//   dim                   u32 little-endian
//   count records of:
//     key_len             u32 little-endian
//     key                 key_len bytes, UTF-8
//     values              dim x f32 little-endian IEEE-754

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gold/error.hpp"
#include "gold/graph.hpp"
#include "gold/random.hpp"

namespace gold {

inline constexpr std::string_view kEmbeddingMagic = "GOLDEMB1";

struct EmbeddingProvenance {
  bool pretrained = true;
  std::uint64_t seed = 0;  // meaningful when !pretrained
};

class EmbeddingTable {
 public:
  using Provenance = EmbeddingProvenance;

  explicit EmbeddingTable(std::size_t dim, Provenance provenance = Provenance{}) : dim_(dim), provenance_(provenance) {
    if (dim == 0) throw DataError("embedding dimension must be >= 1");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return keys_.size(); }
  const Provenance& provenance() const noexcept { return provenance_; }
  const std::vector<std::string>& keys() const noexcept { return keys_; }

  bool contains(std::string_view key) const { return index_.contains(std::string(key)); }

  std::span<const float> lookup(std::string_view key) const {
    auto it = index_.find(std::string(key));
    if (it == index_.end()) throw DataError("no embedding for key '" + std::string(key) + "'");
    return {values_.data() + it->second * dim_, dim_};
  }

  std::span<const float> at(std::size_t record) const { return {values_.data() + record * dim_, dim_}; }

  // Insertion is only used while building a table; tables are never
  // modified once handed to a model.
  void insert(std::string key, std::span<const float> vec) {
    if (vec.size() != dim_)
      throw DataError("vector for '" + key + "' has length " + std::to_string(vec.size()) + ", expected " +
                      std::to_string(dim_));
    if (index_.contains(key)) throw DataError("duplicate embedding key '" + key + "'");
    index_.emplace(key, keys_.size());
    keys_.push_back(std::move(key));
    values_.insert(values_.end(), vec.begin(), vec.end());
  }

 private:
  std::size_t dim_;
  Provenance provenance_;
  std::vector<std::string> keys_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  const unsigned char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw DataError(path_ + ": truncated while reading " + what);
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32(const char* what) { return get_u32(take(4, what)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<unsigned char>& bytes_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline EmbeddingTable load_embeddings(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader rd(bytes, path);
  if (std::memcmp(rd.take(8, "magic"), kEmbeddingMagic.data(), 8) != 0) throw DataError(path + ": bad magic");
  const std::uint32_t count = rd.u32("count");
  const std::uint32_t dim = rd.u32("dim");
  if (dim == 0) throw DataError(path + ": dimension is zero");
  EmbeddingTable table(dim);
  std::vector<float> vec(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = rd.u32("key length");
    const auto* key = rd.take(len, "key");
    const auto* raw = rd.take(std::size_t{dim} * 4, "vector (record shorter than header dim)");
    for (std::uint32_t k = 0; k < dim; ++k) vec[k] = std::bit_cast<float>(detail::get_u32(raw + 4 * k));
    table.insert(std::string(reinterpret_cast<const char*>(key), len), vec);
  }
  if (!rd.done()) throw DataError(path + ": trailing bytes after " + std::to_string(count) + " records (dim mismatch?)");
  return table;
}

inline void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::string buf(kEmbeddingMagic);
  detail::put_u32(buf, static_cast<std::uint32_t>(table.size()));
  detail::put_u32(buf, static_cast<std::uint32_t>(table.dim()));
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& key = table.keys()[i];
    detail::put_u32(buf, static_cast<std::uint32_t>(key.size()));
    buf += key;
    for (float f : table.at(i)) detail::put_u32(buf, std::bit_cast<std::uint32_t>(f));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path);
}

/// Random stand-in embeddings: nodes in id order, then relations, entries
/// i.i.d. uniform in [-scale, scale]. A surface shared by a node and a
/// relation gets a single vector.
inline EmbeddingTable random_table(const Graph& g, std::size_t dim, std::uint64_t seed, double scale) {
  if (dim == 0) throw DataError("embedding dimension must be >= 1");
  EmbeddingTable table(dim, {false, seed});
  Rng rng(seed);
  std::vector<float> vec(dim);
  auto add = [&](const std::string& key) {
    for (auto& v : vec) v = static_cast<float>(rng.uniform(-scale, scale));
    if (!table.contains(key)) table.insert(key, vec);
  };
  for (const auto& s : g.nodes().surfaces()) add(s);
  for (const auto& s : g.relations().surfaces()) add(s);
  return table;
}

/// Default scale: uniform in [-0.5/dim, 0.5/dim].
inline EmbeddingTable random_table(const Graph& g, std::size_t dim, std::uint64_t seed) {
  return random_table(g, dim, seed, 0.5 / static_cast<double>(dim));
}

/// Keys of `g` with no vector in `table`.
inline std::vector<std::string> missing_keys(const EmbeddingTable& table, const Graph& g) {
  std::vector<std::string> missing;
  for (const auto& s : g.nodes().surfaces())
    if (!table.contains(s)) missing.push_back(s);
  for (const auto& s : g.relations().surfaces())
    if (!table.contains(s)) missing.push_back(s);
  return missing;
}

inline void validate(const EmbeddingTable& table, const Graph& g) {
  const auto missing = missing_keys(table, g);
  if (missing.empty()) return;
  std::string msg = "embedding table is missing " + std::to_string(missing.size()) + " key(s):";
  for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " '" + missing[i] + "'";
  if (missing.size() > 10) msg += " ...";
  throw DataError(msg);
}

/// Dense double-precision copies of the vectors a graph needs, indexed by id.
struct GraphEmbeddings {
  Eigen::MatrixXd nodes;      // dim x |V|
  Eigen::MatrixXd relations;  // dim x |R|

  std::size_t dim() const { return static_cast<std::size_t>(nodes.rows()); }

  static GraphEmbeddings from(const EmbeddingTable& table, const Graph& g) {
    validate(table, g);
    const auto dim = static_cast<Eigen::Index>(table.dim());
    GraphEmbeddings ge{Eigen::MatrixXd(dim, static_cast<Eigen::Index>(g.num_nodes())),
                       Eigen::MatrixXd(dim, static_cast<Eigen::Index>(g.num_relations()))};
    auto fill = [&](Eigen::MatrixXd& m, const std::vector<std::string>& keys) {
      for (std::size_t c = 0; c < keys.size(); ++c) {
        const auto v = table.lookup(keys[c]);
        for (Eigen::Index r = 0; r < dim; ++r) m(r, static_cast<Eigen::Index>(c)) = v[static_cast<std::size_t>(r)];
      }
    };
    fill(ge.nodes, g.nodes().surfaces());
    fill(ge.relations, g.relations().surfaces());
    return ge;
  }
};

}  // namespace gold
