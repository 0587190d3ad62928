#pragma once

// Degree-2 polynomials over GF(p), share evaluation and three-point Lagrange
// interpolation. A polynomial is always the canonical coefficient triple
// [c0, c1, c2]; leading zeros are never trimmed, so equality is coefficient
// equality and stable under serialization.
//
// A base polynomial has c0 = 0 and c2 != 0. The bank holds one base
// polynomial F; an ATM's share is a point on F, a user's share is a point on
// F + r for that user's secret r, and (0, r) is the bank's anchor share.
// Interpolating the three shares reproduces F + r exactly iff all three are
// genuine.

#include <array>
#include <stdexcept>

#include "sfamss/field.hpp"

namespace sfamss {

struct DuplicateAbscissaError : std::domain_error {
  DuplicateAbscissaError() : std::domain_error("interpolation points must have distinct x") {}
};

struct Polynomial {
  std::array<FieldElement, 3> coeffs{};  // [c0, c1, c2]

  FieldElement c0() const { return coeffs[0]; }
  FieldElement c1() const { return coeffs[1]; }
  FieldElement c2() const { return coeffs[2]; }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;
};

struct SharePoint {
  FieldElement x;
  FieldElement y;
  friend bool operator==(const SharePoint&, const SharePoint&) = default;
};

inline FieldElement poly_eval(const PrimeField& f, const Polynomial& p, FieldElement x) {
  // Horner: ((c2*x) + c1)*x + c0
  FieldElement acc = p.coeffs[2];
  acc = f.add(f.mul(acc, x), p.coeffs[1]);
  acc = f.add(f.mul(acc, x), p.coeffs[0]);
  return acc;
}

// F + r: adds r to the constant term only, so (F + r)(x) = F(x) + r for all x
// and (F + r)(0) = r when F is a base polynomial.
inline Polynomial poly_shift(const PrimeField& f, const Polynomial& p, FieldElement r) {
  return Polynomial{{f.add(p.coeffs[0], r), p.coeffs[1], p.coeffs[2]}};
}

// Unique degree-<=2 polynomial through three points with pairwise distinct x,
// in canonical coefficient form. Exact over GF(p).
inline Polynomial interpolate(const PrimeField& f, const SharePoint& p1, const SharePoint& p2,
                              const SharePoint& p3) {
  const SharePoint pts[3] = {p1, p2, p3};
  if (pts[0].x == pts[1].x || pts[0].x == pts[2].x || pts[1].x == pts[2].x)
    throw DuplicateAbscissaError();

  Polynomial out;
  for (int i = 0; i < 3; ++i) {
    FieldElement xi = pts[i].x;
    FieldElement a = pts[(i + 1) % 3].x;
    FieldElement b = pts[(i + 2) % 3].x;
    // weight = y_i / ((x_i - a)(x_i - b)); numerator basis (x - a)(x - b)
    FieldElement denom = f.mul(f.sub(xi, a), f.sub(xi, b));
    FieldElement w = f.mul(pts[i].y, f.inv(denom));
    out.coeffs[0] = f.add(out.coeffs[0], f.mul(w, f.mul(a, b)));
    out.coeffs[1] = f.sub(out.coeffs[1], f.mul(w, f.add(a, b)));
    out.coeffs[2] = f.add(out.coeffs[2], w);
  }
  return out;
}

// Fresh secret base polynomial: c0 = 0 (forced so that (F + r)(0) = r),
// c1 uniform in [0, p), c2 uniform in [1, p) so the degree is exactly 2.
inline Polynomial sample_base_polynomial(const PrimeField& f, RandomSource& rng) {
  return Polynomial{{f.zero(), f.sample(rng), f.sample_nonzero(rng)}};
}

inline bool is_base_polynomial(const Polynomial& p) {
  return p.coeffs[0].value == 0 && p.coeffs[2].value != 0;
}

// 16-byte big-endian x||y encoding; this exact byte string is what the
// confidentiality checks scan for in transcripts, card files and the store.
inline Bytes share_plain_encoding(const SharePoint& s) {
  ByteWriter w;
  w.u64_be(s.x.value);
  w.u64_be(s.y.value);
  return w.take();
}

inline SharePoint share_from_plain(ByteView b) {
  if (b.size() != 16) throw std::invalid_argument("share encoding must be 16 bytes");
  ByteReader r(b);
  SharePoint s;
  s.x.value = r.u64_be();
  s.y.value = r.u64_be();
  return s;
}

}  // namespace sfamss
