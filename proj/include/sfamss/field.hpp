#pragma once

// Exact arithmetic over GF(p). All values live in [0, p); no operation ever
// rounds or overflows (products go through 128-bit intermediates).
//
// The modulus is deployment configuration: one PrimeField instance is shared
// by every party of a deployment. It is never carried on the wire.

#include <cstdint>
#include <stdexcept>

#include "sfamss/rng.hpp"

namespace sfamss {

struct ZeroInverseError : std::domain_error {
  ZeroInverseError() : std::domain_error("zero has no multiplicative inverse") {}
};

struct BadModulusError : std::domain_error {
  explicit BadModulusError(const char* what) : std::domain_error(what) {}
};

struct FieldElement {
  std::uint64_t value = 0;
  friend bool operator==(const FieldElement&, const FieldElement&) = default;
  friend auto operator<=>(const FieldElement&, const FieldElement&) = default;
};

// Deterministic Miller-Rabin, exact for all 64-bit inputs with this witness set.
inline bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  auto mulmod = [](std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>(static_cast<__uint128_t>(a) * b % m);
  };
  auto powmod = [&](std::uint64_t b, std::uint64_t e, std::uint64_t m) {
    std::uint64_t r = 1;
    b %= m;
    while (e) {
      if (e & 1) r = mulmod(r, b, m);
      b = mulmod(b, b, m);
      e >>= 1;
    }
    return r;
  };
  std::uint64_t d = n - 1;
  int s = 0;
  while (!(d & 1)) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    std::uint64_t x = powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < s; ++i) {
      x = mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

class PrimeField {
 public:
  explicit PrimeField(std::uint64_t p) : p_(p) {
    if (p >= (1ull << 63)) throw BadModulusError("modulus must fit 63 bits");
    if (!is_prime_u64(p)) throw BadModulusError("modulus must be prime");
    if (p < 5) throw BadModulusError("modulus too small for three distinct shares");
  }

  std::uint64_t modulus() const { return p_; }

  FieldElement element(std::uint64_t v) const { return {v % p_}; }
  FieldElement zero() const { return {0}; }
  FieldElement one() const { return {1}; }

  FieldElement add(FieldElement a, FieldElement b) const {
    std::uint64_t s = a.value + b.value;
    if (s >= p_) s -= p_;
    return {s};
  }

  FieldElement sub(FieldElement a, FieldElement b) const {
    return {a.value >= b.value ? a.value - b.value : a.value + p_ - b.value};
  }

  FieldElement neg(FieldElement a) const {
    return {a.value == 0 ? 0 : p_ - a.value};
  }

  FieldElement mul(FieldElement a, FieldElement b) const {
    return {static_cast<std::uint64_t>(static_cast<__uint128_t>(a.value) * b.value % p_)};
  }

  // Extended Euclid; exact for any prime modulus.
  FieldElement inv(FieldElement a) const {
    if (a.value == 0) throw ZeroInverseError();
    std::int64_t t = 0, new_t = 1;
    std::int64_t r = static_cast<std::int64_t>(p_), new_r = static_cast<std::int64_t>(a.value);
    while (new_r != 0) {
      std::int64_t q = r / new_r;
      std::int64_t tmp = t - q * new_t;
      t = new_t;
      new_t = tmp;
      tmp = r - q * new_r;
      r = new_r;
      new_r = tmp;
    }
    if (t < 0) t += static_cast<std::int64_t>(p_);
    return {static_cast<std::uint64_t>(t)};
  }

  FieldElement sample(RandomSource& rng) const { return {rng.below(p_)}; }

  FieldElement sample_nonzero(RandomSource& rng) const { return {1 + rng.below(p_ - 1)}; }

 private:
  std::uint64_t p_;
};

inline constexpr std::uint64_t kMersenne61 = (1ull << 61) - 1;  // production default
inline constexpr std::uint64_t kTestModulus = 101;              // fixture modulus

}  // namespace sfamss
