#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace mdt {

// splitmix64-based generator. Used for every random draw in the project so
// results do not depend on the standard library's distribution
// implementations, and so seeds can be derived positionally for
// order-independent parallel generation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // [0, 1)
  double uniform();
  double uniform(double lo, double hi);

  // [0, n); n must be > 0
  std::uint64_t uniform_int(std::uint64_t n);

  // standard normal, Box-Muller (no rejection, draw count is data-independent)
  double gaussian();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stream tags for positional seed derivation. Every independent consumer of
// randomness derives its own seed from (master, tag, indices...), so parallel
// execution order cannot change any draw.
enum class SeedStream : std::uint64_t {
  kSynthUtterance = 1,
  kNoise = 2,
  kCorpusStructure = 3,
  kHmmKmeans = 4,
  kSvmModel = 5,
  kToys = 6,
};

std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path);
std::uint64_t derive_seed(std::uint64_t base, SeedStream stream,
                          std::initializer_list<std::uint64_t> path = {});

}  // namespace mdt
