#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace gold {

// Portable seeded generator. The raw stream is std::mt19937_64, whose output
// sequence is fixed by the standard. The derived draws below avoid the
// implementation-defined std::*_distribution classes so that traces are
// reproducible across standard libraries:
//
//   below(n):   threshold = (2^64 - n) mod n; draw x until x >= threshold;
//               return x mod n.
//   unit():     (x >> 11) * 2^-53, a double in [0, 1).
//   uniform(a, b): a + (b - a) * unit().
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % n;
    }
  }

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  bool coin() { return below(2) == 1; }

  // Fisher-Yates, walking from the back.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gold
