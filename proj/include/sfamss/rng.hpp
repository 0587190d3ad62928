#pragma once

// Random sources. Every component that needs randomness takes a RandomSource
// so protocol runs are reproducible under a fixed seed.

#include <cstdint>
#include <memory>
#include <random>

#include "sfamss/bytes.hpp"

namespace sfamss {

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual std::uint64_t next_u64() = 0;

  void fill(std::uint8_t* out, std::size_t n) {
    while (n >= 8) {
      std::uint64_t v = next_u64();
      for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
      out += 8;
      n -= 8;
    }
    if (n > 0) {
      std::uint64_t v = next_u64();
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    }
  }

  Bytes bytes(std::size_t n) {
    Bytes out(n);
    fill(out.data(), n);
    return out;
  }

  // Uniform draw in [0, bound) by rejection, exact for any bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }
};

// splitmix64; deterministic for a fixed seed
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() override {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

class SystemRandom final : public RandomSource {
 public:
  std::uint64_t next_u64() override {
    return (static_cast<std::uint64_t>(rd_()) << 32) ^ rd_();
  }

 private:
  std::random_device rd_;
};

}  // namespace sfamss
