#pragma once

// Deterministic crypto backend for reproducible protocol runs.
//
// Schnorr signatures and hashed-ElGamal hybrid encryption over the prime
// subgroup of Z_P^*, with a 62-bit safe prime P. Parameters this small are
// breakable offline and must never protect real money; what matters here is
// that the scheme is genuinely asymmetric (public keys reveal nothing that
// signs or opens), every operation is deterministic under the injected seed,
// and tampering with a box or signed bytes is always detected.
//
// Symmetric boxes are SHA-256-CTR encrypt-then-HMAC.

#include <cstring>
#include <mutex>

#include "sfamss/crypto.hpp"
#include "sfamss/rng.hpp"
#include "sfamss/sha256.hpp"

namespace sfamss {

namespace simdetail {

// Safe prime: P = 2q + 1, q prime. g = 4 generates the order-q subgroup.
inline constexpr std::uint64_t kGroupP = 2305843009213699919ull;  // 0x200000000000174f
inline constexpr std::uint64_t kGroupQ = 1152921504606849959ull;
inline constexpr std::uint64_t kGroupG = 4;

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<__uint128_t>(a) * b % m);
}

inline std::uint64_t powmod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1;
  b %= m;
  while (e) {
    if (e & 1) r = mulmod(r, b, m);
    b = mulmod(b, b, m);
    e >>= 1;
  }
  return r;
}

inline std::uint64_t u64_from_digest(const Digest& d) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
  return v;
}

inline Bytes be64(std::uint64_t v) {
  ByteWriter w;
  w.u64_be(v);
  return w.take();
}

// SHA-256-CTR keystream XOR, used for both box modes.
inline void stream_xor(const Digest& key, Bytes& data) {
  std::uint64_t counter = 0;
  std::size_t off = 0;
  while (off < data.size()) {
    Digest block = sha256_concat({ByteView(key), ByteView(be64(counter))});
    std::size_t n = std::min<std::size_t>(32, data.size() - off);
    for (std::size_t i = 0; i < n; ++i) data[off + i] ^= block[i];
    off += n;
    ++counter;
  }
}

}  // namespace simdetail

class SimBackend final : public CryptoBackend {
 public:
  explicit SimBackend(std::uint64_t seed) : rng_(std::make_unique<SeededRandom>(seed)) {}
  explicit SimBackend(std::unique_ptr<RandomSource> rng) : rng_(std::move(rng)) {}

  std::string name() const override { return "sim"; }

  KeyPair generate_keypair() override {
    using namespace simdetail;
    std::uint64_t x = draw_scalar();
    std::uint64_t y = powmod(kGroupG, x, kGroupP);
    KeyPair kp;
    kp.private_key = be64(x);
    kp.public_key = be64(y);
    kp.key_id = key_id_for_public(kp.public_key);
    return kp;
  }

  SessionKey generate_session_key() override {
    SessionKey k;
    random_bytes(k.bytes.data(), k.bytes.size());
    return k;
  }

  void random_bytes(std::uint8_t* out, std::size_t n) override {
    std::lock_guard lock(mu_);
    rng_->fill(out, n);
  }

  Signature sign(const Bytes& private_key, ByteView msg) override {
    using namespace simdetail;
    std::uint64_t x = parse_scalar(private_key);
    // deterministic nonce bound to key and message
    Digest kd = sha256_concat({ByteView(private_key), msg});
    std::uint64_t k = u64_from_digest(kd) % (kGroupQ - 1) + 1;
    std::uint64_t r = powmod(kGroupG, k, kGroupP);
    std::uint64_t e = challenge(r, msg);
    std::uint64_t s = (k + mulmod(x, e, kGroupQ)) % kGroupQ;
    ByteWriter w;
    w.u64_be(e);
    w.u64_be(s);
    return Signature{w.take()};
  }

  bool verify(const Bytes& public_key, ByteView msg, const Signature& sig) override {
    using namespace simdetail;
    if (sig.bytes.size() != 16 || public_key.size() != 8) return false;
    std::uint64_t y = parse_scalar(public_key);
    if (y == 0 || y >= kGroupP) return false;
    ByteReader r(sig.bytes);
    std::uint64_t e = r.u64_be();
    std::uint64_t s = r.u64_be();
    if (e >= kGroupQ || s >= kGroupQ) return false;
    // r' = g^s * y^(-e); y has order q, so y^(-e) = y^(q-e)
    std::uint64_t rv = mulmod(powmod(kGroupG, s, kGroupP),
                              powmod(y, (kGroupQ - e) % kGroupQ, kGroupP), kGroupP);
    return challenge(rv, msg) == e;
  }

  SealedBox seal_public(const Bytes& public_key, ByteView plaintext) override {
    using namespace simdetail;
    if (public_key.size() != 8) throw CryptoBackendError("bad public key");
    std::uint64_t y = parse_scalar(public_key);
    std::uint64_t k = draw_scalar();
    std::uint64_t eph = powmod(kGroupG, k, kGroupP);
    std::uint64_t shared = powmod(y, k, kGroupP);
    Digest master = sha256_concat({ByteView(to_bytes("sfamss.pk")), ByteView(be64(eph)), ByteView(be64(shared))});
    Bytes ct(plaintext.begin(), plaintext.end());
    stream_xor(enc_key(master), ct);
    Digest tag = hmac_sha256(ByteView(mac_key(master)), ByteView(cat(be64(eph), ct)));
    SealedBox box;
    box.mode = SealMode::PUBLIC_KEY;
    ByteWriter w;
    w.u64_be(eph);
    w.raw(ct);
    w.raw(ByteView(tag));
    box.ciphertext = w.take();
    return box;
  }

  Bytes open_public(const Bytes& private_key, const SealedBox& box) override {
    using namespace simdetail;
    if (box.mode != SealMode::PUBLIC_KEY) throw OpenFailedError("box mode mismatch");
    if (box.ciphertext.size() < 8 + 32) throw OpenFailedError("box too short");
    std::uint64_t x = parse_scalar(private_key);
    ByteReader r(box.ciphertext);
    std::uint64_t eph = r.u64_be();
    Bytes ct = r.raw(box.ciphertext.size() - 8 - 32);
    Bytes tag = r.raw(32);
    std::uint64_t shared = powmod(eph, x, kGroupP);
    Digest master = sha256_concat({ByteView(to_bytes("sfamss.pk")), ByteView(be64(eph)), ByteView(be64(shared))});
    Digest expect = hmac_sha256(ByteView(mac_key(master)), ByteView(cat(be64(eph), ct)));
    if (!std::equal(expect.begin(), expect.end(), tag.begin())) throw OpenFailedError();
    stream_xor(enc_key(master), ct);
    return ct;
  }

  SealedBox seal_symmetric(const SessionKey& key, ByteView plaintext) override {
    using namespace simdetail;
    Bytes nonce(16);
    random_bytes(nonce.data(), nonce.size());
    Digest master = sha256_concat({ByteView(key.bytes), ByteView(nonce)});
    Bytes ct(plaintext.begin(), plaintext.end());
    stream_xor(enc_key(master), ct);
    Digest tag = hmac_sha256(ByteView(mac_key(master)), ByteView(cat(nonce, ct)));
    SealedBox box;
    box.mode = SealMode::SYMMETRIC;
    ByteWriter w;
    w.raw(nonce);
    w.raw(ct);
    w.raw(ByteView(tag));
    box.ciphertext = w.take();
    return box;
  }

  Bytes open_symmetric(const SessionKey& key, const SealedBox& box) override {
    using namespace simdetail;
    if (box.mode != SealMode::SYMMETRIC) throw OpenFailedError("box mode mismatch");
    if (box.ciphertext.size() < 16 + 32) throw OpenFailedError("box too short");
    ByteReader r(box.ciphertext);
    Bytes nonce = r.raw(16);
    Bytes ct = r.raw(box.ciphertext.size() - 16 - 32);
    Bytes tag = r.raw(32);
    Digest master = sha256_concat({ByteView(key.bytes), ByteView(nonce)});
    Digest expect = hmac_sha256(ByteView(mac_key(master)), ByteView(cat(nonce, ct)));
    if (!std::equal(expect.begin(), expect.end(), tag.begin())) throw OpenFailedError();
    stream_xor(enc_key(master), ct);
    return ct;
  }

  SessionKey derive_key(ByteView secret, std::string_view label) override {
    Digest d = hmac_sha256(secret, ByteView(to_bytes(label)));
    SessionKey k;
    std::memcpy(k.bytes.data(), d.data(), d.size());
    return k;
  }

 private:
  std::uint64_t draw_scalar() {
    std::lock_guard lock(mu_);
    return rng_->below(simdetail::kGroupQ - 1) + 1;
  }

  static std::uint64_t parse_scalar(ByteView b) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < b.size() && i < 8; ++i) v = (v << 8) | b[i];
    return v;
  }

  static std::uint64_t challenge(std::uint64_t r, ByteView msg) {
    Digest d = sha256_concat({ByteView(simdetail::be64(r)), msg});
    return simdetail::u64_from_digest(d) % simdetail::kGroupQ;
  }

  static Digest enc_key(const Digest& master) {
    return sha256_concat({ByteView(master), ByteView(to_bytes("enc"))});
  }

  static Digest mac_key(const Digest& master) {
    return sha256_concat({ByteView(master), ByteView(to_bytes("mac"))});
  }

  static Bytes cat(const Bytes& a, const Bytes& b) {
    Bytes out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }

  std::mutex mu_;
  std::unique_ptr<RandomSource> rng_;
};

}  // namespace sfamss
