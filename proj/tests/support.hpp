#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <random>
#include <string>
#include <tuple>

#include "gold/graph.hpp"
#include "gold/random.hpp"

namespace gold::test {

/// A scratch directory removed when the object goes out of scope.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("gold-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

using StringTriple = std::tuple<const char*, const char*, const char*>;

inline Graph make_graph(std::initializer_list<StringTriple> triples) {
  Graph g;
  for (const auto& [h, r, t] : triples) g.add_edge(h, r, t);
  return g;
}

/// Uniformly random distinct triples over "n<i>" nodes and "r<j>" relations.
inline Graph random_graph(std::size_t nodes, std::size_t relations, std::size_t edges, std::uint64_t seed) {
  Graph g;
  for (std::size_t i = 0; i < nodes; ++i) g.intern_node("n" + std::to_string(i));
  for (std::size_t j = 0; j < relations; ++j) g.intern_relation("r" + std::to_string(j));
  Rng rng(seed);
  while (g.num_edges() < edges)
    g.add_edge(Triple{static_cast<NodeId>(rng.below(nodes)), static_cast<RelationId>(rng.below(relations)),
                      static_cast<NodeId>(rng.below(nodes))});
  return g;
}

}  // namespace gold::test
