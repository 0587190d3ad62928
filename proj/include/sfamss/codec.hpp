#pragma once

// Canonical byte encoding for every message and certificate, so signatures
// survive store-and-forward and golden tests are bit-exact.
//
// Frame layout: magic "SFAM" | version 0x01 | msg type | payload fields in
// declaration order. Field elements, timestamps and amounts are 8-byte
// big-endian; decision flag/reason are single raw bytes; certificates,
// signatures and sealed boxes are 4-byte big-endian length prefix + bytes.
// Total frame size is capped at 1 MiB.

#include <cstdint>
#include <stdexcept>

#include "sfamss/bytes.hpp"
#include "sfamss/messages.hpp"

namespace sfamss {

inline constexpr std::uint8_t kFrameMagic[4] = {'S', 'F', 'A', 'M'};
inline constexpr std::uint8_t kFrameVersion = 0x01;

enum class CodecError : std::uint8_t {
  BadMagic,
  BadVersion,
  UnknownType,
  Truncated,
  TrailingBytes,
  OversizeField,
};

inline const char* codec_error_name(CodecError e) {
  switch (e) {
    case CodecError::BadMagic: return "BadMagic";
    case CodecError::BadVersion: return "BadVersion";
    case CodecError::UnknownType: return "UnknownType";
    case CodecError::Truncated: return "Truncated";
    case CodecError::TrailingBytes: return "TrailingBytes";
    case CodecError::OversizeField: return "OversizeField";
  }
  return "?";
}

struct CodecException : std::runtime_error {
  CodecError kind;
  explicit CodecException(CodecError k) : std::runtime_error(codec_error_name(k)), kind(k) {}
};

struct NotSignableError : std::logic_error {
  NotSignableError() : std::logic_error("message variant carries no signature") {}
};

namespace codecdetail {

inline void put_signature(ByteWriter& w, const Signature& s) { w.lp_bytes(s.bytes); }

inline Signature get_signature(ByteReader& r) { return Signature{r.lp_bytes()}; }

inline void put_box(ByteWriter& w, const SealedBox& b) {
  ByteWriter inner;
  inner.u8(static_cast<std::uint8_t>(b.mode));
  inner.raw(b.ciphertext);
  w.lp_bytes(inner.bytes());
}

inline SealedBox get_box(ByteReader& r) {
  Bytes item = r.lp_bytes();
  if (item.empty()) throw CodecException(CodecError::Truncated);
  std::uint8_t mode = item[0];
  if (mode != static_cast<std::uint8_t>(SealMode::PUBLIC_KEY) &&
      mode != static_cast<std::uint8_t>(SealMode::SYMMETRIC))
    throw CodecException(CodecError::UnknownType);
  SealedBox box;
  box.mode = static_cast<SealMode>(mode);
  box.ciphertext.assign(item.begin() + 1, item.end());
  return box;
}

inline void put_certificate(ByteWriter& w, const Certificate& c) {
  ByteWriter inner;
  inner.u64_be(c.subject_id.value);
  inner.u8(static_cast<std::uint8_t>(c.role));
  inner.lp_bytes(c.subject_public);
  inner.u64_be(c.issuer_id.value);
  inner.lp_bytes(c.issuer_signature.bytes);
  w.lp_bytes(inner.bytes());
}

inline Certificate get_certificate(ByteReader& outer) {
  Bytes item = outer.lp_bytes();
  ByteReader r(item);
  Certificate c;
  c.subject_id.value = r.u64_be();
  std::uint8_t role = r.u8();
  if (role > static_cast<std::uint8_t>(Role::USER)) throw CodecException(CodecError::UnknownType);
  c.role = static_cast<Role>(role);
  c.subject_public = r.lp_bytes();
  c.issuer_id.value = r.u64_be();
  c.issuer_signature.bytes = r.lp_bytes();
  if (!r.empty()) throw CodecException(CodecError::TrailingBytes);
  return c;
}

}  // namespace codecdetail

// Standalone certificate encoding (key/cert files, cert cache).
inline Bytes certificate_encode(const Certificate& c) {
  ByteWriter w;
  codecdetail::put_certificate(w, c);
  return w.take();
}

inline Certificate certificate_decode(ByteView b) {
  try {
    ByteReader r(b);
    Certificate c = codecdetail::get_certificate(r);
    if (!r.empty()) throw CodecException(CodecError::TrailingBytes);
    return c;
  } catch (const ByteReaderError& e) {
    throw CodecException(e.kind == ByteReaderError::Kind::Oversize ? CodecError::OversizeField
                                                                   : CodecError::Truncated);
  }
}

inline Bytes encode(const Message& msg) {
  using namespace codecdetail;
  ByteWriter w;
  w.raw(ByteView(kFrameMagic, 4));
  w.u8(kFrameVersion);
  w.u8(static_cast<std::uint8_t>(message_type(msg)));

  struct V {
    ByteWriter& w;
    void operator()(const M1AtmAssignId& m) { w.u64_be(m.atm_id.value); }
    void operator()(const M2AtmRegisterRequest& m) {
      w.u64_be(m.atm_id.value);
      put_certificate(w, m.atm_certificate);
    }
    void operator()(const M3AtmRegisterResponse& m) { put_box(w, m.sealed_d_atm); }
    void operator()(const M4UserAssignId& m) { w.u64_be(m.user_id.value); }
    void operator()(const M5UserRegisterRequest& m) {
      w.u64_be(m.user_id.value);
      put_certificate(w, m.user_certificate);
      put_box(w, m.sealed_session_key);
    }
    void operator()(const M6UserRegisterResponse& m) { put_box(w, m.sealed_d_user); }
    void operator()(const M7UserAuthRequest& m) {
      w.u64_be(m.user_id.value);
      w.u64_be(m.t_s);
      put_signature(w, m.user_signature);
      put_box(w, m.sealed_d_user);
    }
    void operator()(const M8CertFetch& m) { w.u64_be(m.user_id.value); }
    void operator()(const M8RCertFetchReply& m) { put_certificate(w, m.user_certificate); }
    void operator()(const M9BankAuthRequest& m) {
      w.u64_be(m.user_id.value);
      w.u64_be(m.atm_id.value);
      w.u64_be(m.t_s);
      put_signature(w, m.user_signature);
      put_box(w, m.sealed_d_user);
      put_box(w, m.sealed_d_atm_for_bank);
    }
    void operator()(const M10AuthDecision& m) {
      w.u64_be(m.user_id.value);
      w.u64_be(m.atm_id.value);
      w.u64_be(m.t_s);
      w.u8(m.accepted_raw);
      w.u8(m.reason_raw);
      put_signature(w, m.bank_signature);
    }
    void operator()(const AuthzRequest& m) {
      w.u64_be(m.user_id.value);
      w.u64_be(m.atm_id.value);
      w.u64_be(m.amount);
    }
    void operator()(const AuthzDecision& m) {
      w.u64_be(m.user_id.value);
      w.u64_be(m.atm_id.value);
      w.u64_be(m.amount);
      w.u8(m.allowed_raw);
      w.u8(m.reason_raw);
      put_signature(w, m.bank_signature);
    }
  };
  std::visit(V{w}, msg);

  if (w.bytes().size() > kMaxFrameBytes) throw CodecException(CodecError::OversizeField);
  return w.take();
}

inline Message decode(ByteView frame) {
  using namespace codecdetail;
  if (frame.size() > kMaxFrameBytes) throw CodecException(CodecError::OversizeField);
  if (frame.size() < 4) throw CodecException(CodecError::BadMagic);
  if (std::memcmp(frame.data(), kFrameMagic, 4) != 0) throw CodecException(CodecError::BadMagic);
  if (frame.size() < 5) throw CodecException(CodecError::Truncated);
  if (frame[4] != kFrameVersion) throw CodecException(CodecError::BadVersion);
  if (frame.size() < 6) throw CodecException(CodecError::Truncated);
  std::uint8_t type = frame[5];

  ByteReader r(ByteView(frame.data() + 6, frame.size() - 6));
  try {
    Message out;
    switch (static_cast<MsgType>(type)) {
      case MsgType::M1_ATM_ASSIGN_ID:
        out = M1AtmAssignId{{r.u64_be()}};
        break;
      case MsgType::M2_ATM_REGISTER_REQUEST: {
        M2AtmRegisterRequest m;
        m.atm_id.value = r.u64_be();
        m.atm_certificate = get_certificate(r);
        out = m;
        break;
      }
      case MsgType::M3_ATM_REGISTER_RESPONSE:
        out = M3AtmRegisterResponse{get_box(r)};
        break;
      case MsgType::M4_USER_ASSIGN_ID:
        out = M4UserAssignId{{r.u64_be()}};
        break;
      case MsgType::M5_USER_REGISTER_REQUEST: {
        M5UserRegisterRequest m;
        m.user_id.value = r.u64_be();
        m.user_certificate = get_certificate(r);
        m.sealed_session_key = get_box(r);
        out = m;
        break;
      }
      case MsgType::M6_USER_REGISTER_RESPONSE:
        out = M6UserRegisterResponse{get_box(r)};
        break;
      case MsgType::M7_USER_AUTH_REQUEST: {
        M7UserAuthRequest m;
        m.user_id.value = r.u64_be();
        m.t_s = r.u64_be();
        m.user_signature = get_signature(r);
        m.sealed_d_user = get_box(r);
        out = m;
        break;
      }
      case MsgType::M8_CERT_FETCH:
        out = M8CertFetch{{r.u64_be()}};
        break;
      case MsgType::M8R_CERT_FETCH_REPLY:
        out = M8RCertFetchReply{get_certificate(r)};
        break;
      case MsgType::M9_BANK_AUTH_REQUEST: {
        M9BankAuthRequest m;
        m.user_id.value = r.u64_be();
        m.atm_id.value = r.u64_be();
        m.t_s = r.u64_be();
        m.user_signature = get_signature(r);
        m.sealed_d_user = get_box(r);
        m.sealed_d_atm_for_bank = get_box(r);
        out = m;
        break;
      }
      case MsgType::M10_AUTH_DECISION: {
        M10AuthDecision m;
        m.user_id.value = r.u64_be();
        m.atm_id.value = r.u64_be();
        m.t_s = r.u64_be();
        m.accepted_raw = r.u8();
        m.reason_raw = r.u8();
        m.bank_signature = get_signature(r);
        out = m;
        break;
      }
      case MsgType::AUTHZ_REQUEST: {
        AuthzRequest m;
        m.user_id.value = r.u64_be();
        m.atm_id.value = r.u64_be();
        m.amount = r.u64_be();
        out = m;
        break;
      }
      case MsgType::AUTHZ_DECISION: {
        AuthzDecision m;
        m.user_id.value = r.u64_be();
        m.atm_id.value = r.u64_be();
        m.amount = r.u64_be();
        m.allowed_raw = r.u8();
        m.reason_raw = r.u8();
        m.bank_signature = get_signature(r);
        out = m;
        break;
      }
      default:
        throw CodecException(CodecError::UnknownType);
    }
    if (!r.empty()) throw CodecException(CodecError::TrailingBytes);
    return out;
  } catch (const ByteReaderError& e) {
    throw CodecException(e.kind == ByteReaderError::Kind::Oversize ? CodecError::OversizeField
                                                                   : CodecError::Truncated);
  }
}

// Bytes a signature covers: the canonical encoding of the message with the
// signature omitted. M7 and M9 both carry the user's signature over
// (user_id, t_s), so it survives the ATM's store-and-forward verbatim.
inline Bytes signing_bytes(const Message& msg) {
  ByteWriter w;
  if (const auto* m = std::get_if<M7UserAuthRequest>(&msg)) {
    w.u64_be(m->user_id.value);
    w.u64_be(m->t_s);
  } else if (const auto* m = std::get_if<M9BankAuthRequest>(&msg)) {
    w.u64_be(m->user_id.value);
    w.u64_be(m->t_s);
  } else if (const auto* m = std::get_if<M10AuthDecision>(&msg)) {
    w.u64_be(m->user_id.value);
    w.u64_be(m->atm_id.value);
    w.u64_be(m->t_s);
    w.u8(m->accepted_raw);
    w.u8(m->reason_raw);
  } else if (const auto* m = std::get_if<AuthzDecision>(&msg)) {
    w.u64_be(m->user_id.value);
    w.u64_be(m->atm_id.value);
    w.u64_be(m->amount);
    w.u8(m->allowed_raw);
    w.u8(m->reason_raw);
  } else {
    throw NotSignableError();
  }
  return w.take();
}

inline Bytes auth_signing_bytes(FieldElement user_id, Timestamp t_s) {
  ByteWriter w;
  w.u64_be(user_id.value);
  w.u64_be(t_s);
  return w.take();
}

}  // namespace sfamss
