#include <catch2/catch.hpp>

#include "sfamss/shares.hpp"

using namespace sfamss;

namespace {

// Brute-force evaluation oracle, independent of poly_eval's Horner path:
// term-by-term products reduced through 128-bit intermediates.
std::uint64_t oracle_eval(std::uint64_t c0, std::uint64_t c1, std::uint64_t c2, std::uint64_t x,
                          std::uint64_t p) {
  __uint128_t t1 = static_cast<__uint128_t>(c1) * x % p;
  __uint128_t t2 = static_cast<__uint128_t>(c2) * x % p;
  t2 = t2 * x % p;
  return static_cast<std::uint64_t>((static_cast<__uint128_t>(c0) + t1 + t2) % p);
}

Polynomial poly(std::uint64_t c0, std::uint64_t c1, std::uint64_t c2) {
  return Polynomial{{FieldElement{c0}, FieldElement{c1}, FieldElement{c2}}};
}

}  // namespace

TEST_CASE("evaluation matches the brute-force oracle", "[shares]") {
  PrimeField f(101);
  Polynomial p = poly(0, 3, 2);

  // 2*25 + 3*5 = 65
  CHECK(oracle_eval(0, 3, 2, 5, 101) == 65);
  CHECK(poly_eval(f, p, {5}).value == 65);

  CHECK(poly_eval(f, p, {0}) == p.c0());
  CHECK(poly_eval(f, poly(0, 0, 0), {77}).value == 0);
  CHECK(poly_eval(f, poly(42, 0, 0), {0}).value == 42);
}

TEST_CASE("evaluation agrees with the oracle on random inputs", "[shares]") {
  SeededRandom rng(5);
  for (std::uint64_t pm : {kTestModulus, kMersenne61}) {
    PrimeField f(pm);
    for (int i = 0; i < 400; ++i) {
      Polynomial p{{f.sample(rng), f.sample(rng), f.sample(rng)}};
      FieldElement x = f.sample(rng);
      CHECK(poly_eval(f, p, x).value ==
            oracle_eval(p.c0().value, p.c1().value, p.c2().value, x.value, pm));
    }
  }
}

TEST_CASE("shift adds to the constant term only", "[shares]") {
  PrimeField f(101);
  Polynomial p = poly(0, 3, 2);

  Polynomial shifted = poly_shift(f, p, {7});
  CHECK(shifted == poly(7, 3, 2));
  CHECK(poly_eval(f, shifted, {0}).value == 7);  // F_new(0) = r for base polynomials

  CHECK(poly_shift(f, p, {0}) == p);
}

TEST_CASE("shift/eval commutation on random inputs", "[shares]") {
  SeededRandom rng(13);
  for (std::uint64_t pm : {kTestModulus, kMersenne61}) {
    PrimeField f(pm);
    for (int i = 0; i < 400; ++i) {
      Polynomial p{{f.sample(rng), f.sample(rng), f.sample(rng)}};
      FieldElement r = f.sample(rng), x = f.sample(rng);
      CHECK(poly_eval(f, poly_shift(f, p, r), x) == f.add(poly_eval(f, p, x), r));
    }
  }
}

TEST_CASE("three-point interpolation reproduces the worked example", "[shares]") {
  PrimeField f(101);

  // Oracle: [7,3,2] evaluated at 0, 5, 9 gives exactly these y values.
  CHECK(oracle_eval(7, 3, 2, 0, 101) == 7);
  CHECK(oracle_eval(7, 3, 2, 5, 101) == 72);
  CHECK(oracle_eval(7, 3, 2, 9, 101) == 95);

  Polynomial got = interpolate(f, {{0}, {7}}, {{5}, {72}}, {{9}, {95}});
  CHECK(got == poly(7, 3, 2));
}

TEST_CASE("interpolation of a constant function", "[shares]") {
  PrimeField f(101);
  Polynomial got = interpolate(f, {{0}, {33}}, {{1}, {33}}, {{2}, {33}});
  CHECK(got == poly(33, 0, 0));
}

TEST_CASE("duplicate abscissas are rejected", "[shares]") {
  PrimeField f(101);
  CHECK_THROWS_AS(interpolate(f, {{0}, {7}}, {{0}, {8}}, {{5}, {1}}), DuplicateAbscissaError);
  CHECK_THROWS_AS(interpolate(f, {{3}, {7}}, {{5}, {8}}, {{3}, {1}}), DuplicateAbscissaError);
}

TEST_CASE("interpolation round trip on random polynomials", "[shares][property]") {
  SeededRandom rng(42);
  for (std::uint64_t pm : {kTestModulus, kMersenne61}) {
    PrimeField f(pm);
    for (int i = 0; i < 1000; ++i) {
      Polynomial p{{f.sample(rng), f.sample(rng), f.sample(rng)}};
      // three distinct x values
      FieldElement x1 = f.sample(rng);
      FieldElement x2 = x1, x3 = x1;
      while (x2 == x1) x2 = f.sample(rng);
      while (x3 == x1 || x3 == x2) x3 = f.sample(rng);
      Polynomial back = interpolate(f, {x1, poly_eval(f, p, x1)}, {x2, poly_eval(f, p, x2)},
                                    {x3, poly_eval(f, p, x3)});
      REQUIRE(back == p);
    }
  }
}

TEST_CASE("base polynomial sampling", "[shares]") {
  PrimeField f(101);
  SeededRandom a(42), b(42), c(43);

  Polynomial pa = sample_base_polynomial(f, a);
  Polynomial pb = sample_base_polynomial(f, b);
  Polynomial pc = sample_base_polynomial(f, c);

  CHECK(pa.c0().value == 0);
  CHECK(poly_eval(f, pa, {0}).value == 0);
  CHECK(pa.c2().value != 0);
  CHECK(pa == pb);  // same seed, same coefficients
  CHECK(pa != pc);
  CHECK(is_base_polynomial(pa));
}

TEST_CASE("authentication path: interpolating shifted shares recovers the shift", "[shares][property]") {
  // The success path of the three-share check: shares of F+r plus the anchor
  // (0, r) interpolate to a polynomial whose constant term is r and which
  // equals poly_shift(F, r) coefficient-for-coefficient.
  SeededRandom rng(99);
  for (std::uint64_t pm : {kTestModulus, kMersenne61}) {
    PrimeField f(pm);
    for (int i = 0; i < 300; ++i) {
      Polynomial base = sample_base_polynomial(f, rng);
      FieldElement r = f.sample(rng);
      FieldElement atm_x = f.sample_nonzero(rng);
      FieldElement user_x = atm_x;
      while (user_x == atm_x) user_x = f.sample_nonzero(rng);

      SharePoint anchor{{0}, r};
      SharePoint user{user_x, f.add(poly_eval(f, base, user_x), r)};
      SharePoint atm{atm_x, f.add(poly_eval(f, base, atm_x), r)};

      Polynomial recovered = interpolate(f, user, atm, anchor);
      REQUIRE(recovered == poly_shift(f, base, r));
      CHECK(recovered.c0() == r);
    }
  }
}

TEST_CASE("share plain encoding is the 16-byte big-endian x||y", "[shares]") {
  SharePoint s{{5}, {65}};
  Bytes enc = share_plain_encoding(s);
  REQUIRE(enc.size() == 16);
  CHECK(enc[7] == 5);
  CHECK(enc[15] == 65);
  CHECK(share_from_plain(enc) == s);
  CHECK_THROWS_AS(share_from_plain(Bytes(15)), std::invalid_argument);
}
