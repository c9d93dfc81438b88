#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace mmsurrogate {

// 64-bit FNV-1a; turns a stream tag such as "text" into a seed component.
std::uint64_t tag_hash(std::string_view tag) noexcept;

// Derives an independent stream seed from (seed, tag, index) via splitmix64.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) noexcept;

// Thin wrapper over mt19937_64. Uniform doubles are built from the top 53 bits
// so draws do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n); n > 0.
  std::size_t below(std::size_t n);

  // -1 or +1 with equal probability.
  int sign() { return (engine_() >> 63) != 0 ? 1 : -1; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mmsurrogate
