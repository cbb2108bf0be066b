#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace goalgauge {

// Deterministic 64-bit generator (splitmix64). Every stochastic step in the
// library draws through this wrapper so a run is reproducible from a single
// seed regardless of platform or standard-library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased draw from [lo, hi] inclusive, by rejection.
  std::uint64_t uniform_u64(std::uint64_t lo, std::uint64_t hi) {
    if (lo > hi) throw std::invalid_argument("Rng::uniform_u64: lo > hi");
    std::uint64_t range = hi - lo + 1;
    if (range == 0) return next_u64();  // full 64-bit range
    std::uint64_t threshold = (0ULL - range) % range;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return lo + r % range;
    }
  }

  int uniform_int(int lo, int hi) {
    return static_cast<int>(
        uniform_u64(0, static_cast<std::uint64_t>(hi - lo))) + lo;
  }

  // [0, 1), 53-bit resolution.
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_u64(0, i - 1));
      std::swap(values[i - 1], values[j]);
    }
  }

  // First k indices of a Fisher-Yates shuffle of [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    if (k > n) k = n;
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = static_cast<std::size_t>(uniform_u64(i, n - 1));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  // Independent child stream; `stream` distinguishes siblings.
  Rng fork(std::uint64_t stream) {
    Rng child(state_ ^ (0xa0761d6478bd642fULL * (stream + 1)));
    child.next_u64();
    return child;
  }

 private:
  std::uint64_t state_;
};

}  // namespace goalgauge
