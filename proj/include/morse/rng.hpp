#pragma once

#include "morse/types.hpp"

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace morse {

// splitmix64 finalizer; used to derive uncorrelated seeds for parallel streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix64(base ^ mix64(a ^ mix64(b ^ mix64(c))));
}

// mt19937_64 with explicit sampling algorithms. std::*_distribution output is
// not bit-stable across standard libraries, so we roll our own draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ContractError("Rng::below: n must be positive");
    std::uint64_t x, r;
    do {
      x = gen_();
      r = x % n;
    } while (x - r > std::uint64_t(0) - n);
    return r;
  }

  // [0, 1) with 53-bit resolution.
  Scalar uniform() { return Scalar(gen_() >> 11) * 0x1.0p-53; }

  Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

  bool coin() { return (gen_() & 1ULL) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace morse
