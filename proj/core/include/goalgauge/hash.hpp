#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace goalgauge {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

// FNV-1a, 64 bit. Non-cryptographic; used for cache keys, artifact content
// hashes and the mock embedder. `basis` lets callers seed the stream.
inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t basis = kFnvOffsetBasis) {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= static_cast<std::uint64_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

inline std::string to_hex(std::uint64_t value) {
  static const char* kDigits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

inline std::string fnv1a64_hex(std::string_view data,
                               std::uint64_t basis = kFnvOffsetBasis) {
  return to_hex(fnv1a64(data, basis));
}

}  // namespace goalgauge
