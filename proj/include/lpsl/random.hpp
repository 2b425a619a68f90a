#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace lpsl {

/// Portable seeded random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are not portable, so bounded integers
/// and unit reals are derived from raw 64-bit draws here:
///
///   uniform_index(k): draw u until u < floor(2^64 / k) * k, return u % k
///   uniform_real():   (u >> 11) * 2^-53, in [0, 1)
///   shuffle(v):       Fisher-Yates from the back, j = uniform_index(i + 1)
///
/// Any implementation following these three rules reproduces the splits,
/// initializations and dropout masks of this library bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  std::uint64_t uniform_index(std::uint64_t bound) {
    const std::uint64_t limit = (UINT64_MAX / bound) * bound;
    std::uint64_t u = engine_();
    while (u >= limit) u = engine_();
    return u % bound;
  }

  double uniform_real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lpsl
