#pragma once

// Pluggable public-key signature/encryption, symmetric authenticated
// encryption, and the minimal certificate authority. Two backends implement
// this interface: a deterministic seeded one for reproducible protocol tests
// (sim_backend.hpp) and an RSA/AES-GCM one for real deployments
// (openssl_backend.hpp). Protocol code never sees backend internals.

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include "sfamss/bytes.hpp"
#include "sfamss/field.hpp"
#include "sfamss/sha256.hpp"

namespace sfamss {

enum class Role : std::uint8_t { CA = 0, BANK = 1, ATM = 2, USER = 3 };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::CA: return "CA";
    case Role::BANK: return "BANK";
    case Role::ATM: return "ATM";
    case Role::USER: return "USER";
  }
  return "?";
}

enum class SealMode : std::uint8_t { PUBLIC_KEY = 1, SYMMETRIC = 2 };

struct Signature {
  Bytes bytes;
  friend bool operator==(const Signature&, const Signature&) = default;
};

struct SealedBox {
  SealMode mode = SealMode::PUBLIC_KEY;
  Bytes ciphertext;  // includes whatever nonce/tag material the backend needs
  friend bool operator==(const SealedBox&, const SealedBox&) = default;
};

struct SessionKey {
  std::array<std::uint8_t, 32> bytes{};
  friend bool operator==(const SessionKey&, const SessionKey&) = default;
};

struct KeyPair {
  std::string key_id;
  Bytes public_key;
  Bytes private_key;
};

struct Certificate {
  FieldElement subject_id;
  Role role = Role::USER;
  Bytes subject_public;
  FieldElement issuer_id;
  Signature issuer_signature;
  friend bool operator==(const Certificate&, const Certificate&) = default;
};

struct CryptoBackendError : std::runtime_error {
  explicit CryptoBackendError(const std::string& what) : std::runtime_error(what) {}
};

struct OpenFailedError : std::runtime_error {
  OpenFailedError() : std::runtime_error("sealed box failed to open") {}
  explicit OpenFailedError(const std::string& what) : std::runtime_error(what) {}
};

class CryptoBackend {
 public:
  virtual ~CryptoBackend() = default;

  virtual std::string name() const = 0;

  virtual KeyPair generate_keypair() = 0;
  virtual SessionKey generate_session_key() = 0;
  virtual void random_bytes(std::uint8_t* out, std::size_t n) = 0;

  virtual Signature sign(const Bytes& private_key, ByteView msg) = 0;
  // Never throws on malformed input; any defect just verifies false.
  virtual bool verify(const Bytes& public_key, ByteView msg, const Signature& sig) = 0;

  virtual SealedBox seal_public(const Bytes& public_key, ByteView plaintext) = 0;
  virtual Bytes open_public(const Bytes& private_key, const SealedBox& box) = 0;

  virtual SealedBox seal_symmetric(const SessionKey& key, ByteView plaintext) = 0;
  virtual Bytes open_symmetric(const SessionKey& key, const SealedBox& box) = 0;

  // Standard KDF of the backend, used for the bank storage key.
  virtual SessionKey derive_key(ByteView secret, std::string_view label) = 0;
};

// Canonical encoding of the signed portion: everything but the signature.
// Signing always operates over these bytes, never over in-memory forms.
inline Bytes certificate_signing_bytes(const Certificate& c) {
  ByteWriter w;
  w.u64_be(c.subject_id.value);
  w.u8(static_cast<std::uint8_t>(c.role));
  w.lp_bytes(c.subject_public);
  w.u64_be(c.issuer_id.value);
  return w.take();
}

inline Certificate issue_certificate(CryptoBackend& backend, const KeyPair& ca,
                                     FieldElement ca_id, const Bytes& subject_public,
                                     FieldElement subject_id, Role role) {
  Certificate cert;
  cert.subject_id = subject_id;
  cert.role = role;
  cert.subject_public = subject_public;
  cert.issuer_id = ca_id;
  cert.issuer_signature = backend.sign(ca.private_key, certificate_signing_bytes(cert));
  return cert;
}

inline bool verify_certificate(CryptoBackend& backend, const Certificate& cert,
                               const Bytes& ca_public) {
  return backend.verify(ca_public, certificate_signing_bytes(cert), cert.issuer_signature);
}

// ---- key files -------------------------------------------------------------
// PEM-like: one header line naming backend and role, then base64 of the
// canonical keypair bytes.

inline Bytes keypair_encode(const KeyPair& kp) {
  ByteWriter w;
  w.lp_bytes(to_bytes(kp.key_id));
  w.lp_bytes(kp.public_key);
  w.lp_bytes(kp.private_key);
  return w.take();
}

inline KeyPair keypair_decode(ByteView b) {
  ByteReader r(b);
  KeyPair kp;
  Bytes id = r.lp_bytes();
  kp.key_id.assign(id.begin(), id.end());
  kp.public_key = r.lp_bytes();
  kp.private_key = r.lp_bytes();
  if (!r.empty()) throw std::invalid_argument("trailing bytes in key material");
  return kp;
}

inline std::string key_file_text(const KeyPair& kp, std::string_view backend, Role role) {
  std::string out = "SFAMSS-KEY v1 backend=";
  out += backend;
  out += " role=";
  out += role_name(role);
  out += "\n";
  out += base64_encode(keypair_encode(kp));
  out += "\n";
  return out;
}

inline KeyPair key_file_parse(std::string_view text) {
  auto nl = text.find('\n');
  if (nl == std::string_view::npos || text.substr(0, 10) != "SFAMSS-KEY")
    throw std::invalid_argument("not a key file");
  std::string_view body = text.substr(nl + 1);
  return keypair_decode(base64_decode(body));
}

inline std::string key_id_for_public(ByteView public_key) {
  return to_hex(ByteView(sha256(public_key).data(), 8));
}

}  // namespace sfamss
