#pragma once

// RSA-2048 + AES-256-GCM backend on OpenSSL's EVP interface. Signatures are
// RSA PKCS#1 v1.5 over SHA-256; public-key boxes are hybrid (fresh AES-GCM
// key wrapped under RSA-OAEP). Keys travel as DER blobs; the wire format
// length-prefixes them, so sizes are backend-private.
//
// Compiled only when the build found OpenSSL (SFAMSS_HAVE_OPENSSL).

#ifdef SFAMSS_HAVE_OPENSSL

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>

#include <cstring>

#include "sfamss/crypto.hpp"

namespace sfamss {

namespace ossldetail {

struct PkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxDeleter {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};

using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

inline PkeyPtr parse_public(ByteView der) {
  const unsigned char* p = der.data();
  return PkeyPtr(d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size())));
}

inline PkeyPtr parse_private(ByteView der) {
  const unsigned char* p = der.data();
  return PkeyPtr(d2i_AutoPrivateKey(nullptr, &p, static_cast<long>(der.size())));
}

// AES-256-GCM, 12-byte IV, 16-byte tag appended to the ciphertext.
inline Bytes gcm_encrypt(ByteView key32, ByteView iv12, ByteView plaintext) {
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key32.data(), iv12.data()) != 1)
    throw CryptoBackendError("gcm init failed");
  Bytes out(plaintext.size() + 16);
  int len = 0;
  if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1)
    throw CryptoBackendError("gcm encrypt failed");
  int fin = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1)
    throw CryptoBackendError("gcm finalize failed");
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16, out.data() + plaintext.size()) != 1)
    throw CryptoBackendError("gcm tag failed");
  return out;
}

inline Bytes gcm_decrypt(ByteView key32, ByteView iv12, ByteView boxed) {
  if (boxed.size() < 16) throw OpenFailedError("ciphertext too short");
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key32.data(), iv12.data()) != 1)
    throw CryptoBackendError("gcm init failed");
  std::size_t ct_len = boxed.size() - 16;
  Bytes tag(boxed.begin() + ct_len, boxed.end());
  Bytes out(ct_len);
  int len = 0;
  if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, boxed.data(), static_cast<int>(ct_len)) != 1)
    throw OpenFailedError();
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16, tag.data()) != 1)
    throw CryptoBackendError("gcm tag set failed");
  int fin = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + len, &fin) != 1) throw OpenFailedError();
  return out;
}

}  // namespace ossldetail

class OpenSslBackend final : public CryptoBackend {
 public:
  std::string name() const override { return "openssl"; }

  KeyPair generate_keypair() override {
    using namespace ossldetail;
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_RSA, nullptr));
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) != 1 ||
        EVP_PKEY_CTX_set_rsa_keygen_bits(ctx.get(), 2048) != 1)
      throw CryptoBackendError("rsa keygen init failed");
    EVP_PKEY* raw = nullptr;
    if (EVP_PKEY_keygen(ctx.get(), &raw) != 1) throw CryptoBackendError("rsa keygen failed");
    PkeyPtr key(raw);

    KeyPair kp;
    int publen = i2d_PUBKEY(key.get(), nullptr);
    int privlen = i2d_PrivateKey(key.get(), nullptr);
    if (publen <= 0 || privlen <= 0) throw CryptoBackendError("key encode failed");
    kp.public_key.resize(static_cast<std::size_t>(publen));
    kp.private_key.resize(static_cast<std::size_t>(privlen));
    unsigned char* p = kp.public_key.data();
    i2d_PUBKEY(key.get(), &p);
    p = kp.private_key.data();
    i2d_PrivateKey(key.get(), &p);
    kp.key_id = key_id_for_public(kp.public_key);
    return kp;
  }

  SessionKey generate_session_key() override {
    SessionKey k;
    random_bytes(k.bytes.data(), k.bytes.size());
    return k;
  }

  void random_bytes(std::uint8_t* out, std::size_t n) override {
    if (RAND_bytes(out, static_cast<int>(n)) != 1) throw CryptoBackendError("RAND_bytes failed");
  }

  Signature sign(const Bytes& private_key, ByteView msg) override {
    using namespace ossldetail;
    PkeyPtr key = parse_private(private_key);
    if (!key) throw CryptoBackendError("bad private key");
    MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr, key.get()) != 1)
      throw CryptoBackendError("sign init failed");
    std::size_t len = 0;
    if (EVP_DigestSign(ctx.get(), nullptr, &len, msg.data(), msg.size()) != 1)
      throw CryptoBackendError("sign size failed");
    Signature sig;
    sig.bytes.resize(len);
    if (EVP_DigestSign(ctx.get(), sig.bytes.data(), &len, msg.data(), msg.size()) != 1)
      throw CryptoBackendError("sign failed");
    sig.bytes.resize(len);
    return sig;
  }

  bool verify(const Bytes& public_key, ByteView msg, const Signature& sig) override {
    using namespace ossldetail;
    PkeyPtr key = parse_public(public_key);
    if (!key) return false;
    MdCtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr, key.get()) != 1)
      return false;
    return EVP_DigestVerify(ctx.get(), sig.bytes.data(), sig.bytes.size(), msg.data(),
                            msg.size()) == 1;
  }

  SealedBox seal_public(const Bytes& public_key, ByteView plaintext) override {
    using namespace ossldetail;
    PkeyPtr key = parse_public(public_key);
    if (!key) throw CryptoBackendError("bad public key");

    std::uint8_t sym[32], iv[12];
    random_bytes(sym, sizeof sym);
    random_bytes(iv, sizeof iv);

    PkeyCtxPtr ctx(EVP_PKEY_CTX_new(key.get(), nullptr));
    if (!ctx || EVP_PKEY_encrypt_init(ctx.get()) != 1 ||
        EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_PKCS1_OAEP_PADDING) != 1 ||
        EVP_PKEY_CTX_set_rsa_oaep_md(ctx.get(), EVP_sha256()) != 1)
      throw CryptoBackendError("oaep init failed");
    std::size_t wrapped_len = 0;
    if (EVP_PKEY_encrypt(ctx.get(), nullptr, &wrapped_len, sym, sizeof sym) != 1)
      throw CryptoBackendError("oaep size failed");
    Bytes wrapped(wrapped_len);
    if (EVP_PKEY_encrypt(ctx.get(), wrapped.data(), &wrapped_len, sym, sizeof sym) != 1)
      throw CryptoBackendError("oaep encrypt failed");
    wrapped.resize(wrapped_len);

    Bytes body = gcm_encrypt(ByteView(sym, 32), ByteView(iv, 12), plaintext);

    SealedBox box;
    box.mode = SealMode::PUBLIC_KEY;
    ByteWriter w;
    w.lp_bytes(wrapped);
    w.raw(ByteView(iv, 12));
    w.raw(body);
    box.ciphertext = w.take();
    return box;
  }

  Bytes open_public(const Bytes& private_key, const SealedBox& box) override {
    using namespace ossldetail;
    if (box.mode != SealMode::PUBLIC_KEY) throw OpenFailedError("box mode mismatch");
    PkeyPtr key = parse_private(private_key);
    if (!key) throw OpenFailedError("bad private key");
    try {
      ByteReader r(box.ciphertext);
      Bytes wrapped = r.lp_bytes();
      Bytes iv = r.raw(12);
      Bytes body = r.raw(r.remaining());

      PkeyCtxPtr ctx(EVP_PKEY_CTX_new(key.get(), nullptr));
      if (!ctx || EVP_PKEY_decrypt_init(ctx.get()) != 1 ||
          EVP_PKEY_CTX_set_rsa_padding(ctx.get(), RSA_PKCS1_OAEP_PADDING) != 1 ||
          EVP_PKEY_CTX_set_rsa_oaep_md(ctx.get(), EVP_sha256()) != 1)
        throw OpenFailedError("oaep init failed");
      std::size_t sym_len = 0;
      if (EVP_PKEY_decrypt(ctx.get(), nullptr, &sym_len, wrapped.data(), wrapped.size()) != 1)
        throw OpenFailedError();
      Bytes sym(sym_len);
      if (EVP_PKEY_decrypt(ctx.get(), sym.data(), &sym_len, wrapped.data(), wrapped.size()) != 1 ||
          sym_len != 32)
        throw OpenFailedError();
      return gcm_decrypt(ByteView(sym.data(), 32), iv, body);
    } catch (const ByteReaderError&) {
      throw OpenFailedError("malformed box");
    }
  }

  SealedBox seal_symmetric(const SessionKey& sk, ByteView plaintext) override {
    using namespace ossldetail;
    std::uint8_t iv[12];
    random_bytes(iv, sizeof iv);
    Bytes body = gcm_encrypt(ByteView(sk.bytes), ByteView(iv, 12), plaintext);
    SealedBox box;
    box.mode = SealMode::SYMMETRIC;
    ByteWriter w;
    w.raw(ByteView(iv, 12));
    w.raw(body);
    box.ciphertext = w.take();
    return box;
  }

  Bytes open_symmetric(const SessionKey& sk, const SealedBox& box) override {
    using namespace ossldetail;
    if (box.mode != SealMode::SYMMETRIC) throw OpenFailedError("box mode mismatch");
    if (box.ciphertext.size() < 12 + 16) throw OpenFailedError("box too short");
    ByteView iv(box.ciphertext.data(), 12);
    ByteView body(box.ciphertext.data() + 12, box.ciphertext.size() - 12);
    return gcm_decrypt(ByteView(sk.bytes), iv, body);
  }

  SessionKey derive_key(ByteView secret, std::string_view label) override {
    Digest d = hmac_sha256(secret, ByteView(to_bytes(label)));
    SessionKey k;
    std::memcpy(k.bytes.data(), d.data(), d.size());
    return k;
  }
};

}  // namespace sfamss

#endif  // SFAMSS_HAVE_OPENSSL
