#pragma once

// The protocol message catalog. M1-M3 register an ATM, M4-M6 register a user,
// M7 opens a user session at an ATM, M8/M8R fetch a user certificate, M9/M10
// run the three-share authentication at the bank. The authorization pair
// carries the post-authentication privilege check for a withdrawal amount.
//
// Decision fields (accepted/reason) are kept as raw bytes so the canonical
// encoding is bijective and signatures cover exactly the bytes on the wire.

#include <cstdint>
#include <variant>

#include "sfamss/crypto.hpp"

namespace sfamss {

using Timestamp = std::uint64_t;  // milliseconds since epoch

enum class MsgType : std::uint8_t {
  M1_ATM_ASSIGN_ID = 0x01,
  M2_ATM_REGISTER_REQUEST = 0x02,
  M3_ATM_REGISTER_RESPONSE = 0x03,
  M4_USER_ASSIGN_ID = 0x04,
  M5_USER_REGISTER_REQUEST = 0x05,
  M6_USER_REGISTER_RESPONSE = 0x06,
  M7_USER_AUTH_REQUEST = 0x07,
  M8_CERT_FETCH = 0x08,
  M9_BANK_AUTH_REQUEST = 0x09,
  M10_AUTH_DECISION = 0x0A,
  M8R_CERT_FETCH_REPLY = 0x0B,
  AUTHZ_REQUEST = 0x0C,
  AUTHZ_DECISION = 0x0D,
};

enum class ReasonCode : std::uint8_t {
  OK = 0,
  UNKNOWN_USER = 1,
  UNKNOWN_ATM = 2,
  STALE = 3,
  REPLAY = 4,
  BAD_SIGNATURE = 5,
  OPEN_FAILED = 6,
  SHARE_MISMATCH = 7,
};

inline const char* reason_name(ReasonCode r) {
  switch (r) {
    case ReasonCode::OK: return "OK";
    case ReasonCode::UNKNOWN_USER: return "UNKNOWN_USER";
    case ReasonCode::UNKNOWN_ATM: return "UNKNOWN_ATM";
    case ReasonCode::STALE: return "STALE";
    case ReasonCode::REPLAY: return "REPLAY";
    case ReasonCode::BAD_SIGNATURE: return "BAD_SIGNATURE";
    case ReasonCode::OPEN_FAILED: return "OPEN_FAILED";
    case ReasonCode::SHARE_MISMATCH: return "SHARE_MISMATCH";
  }
  return "UNKNOWN";
}

enum class AuthzReason : std::uint8_t {
  ALLOWED = 0,
  LIMIT_EXCEEDED = 1,
  UNKNOWN_USER = 2,
  NOT_AUTHENTICATED = 3,
};

inline const char* authz_reason_name(AuthzReason r) {
  switch (r) {
    case AuthzReason::ALLOWED: return "ALLOWED";
    case AuthzReason::LIMIT_EXCEEDED: return "LIMIT_EXCEEDED";
    case AuthzReason::UNKNOWN_USER: return "UNKNOWN_USER";
    case AuthzReason::NOT_AUTHENTICATED: return "NOT_AUTHENTICATED";
  }
  return "UNKNOWN";
}

struct M1AtmAssignId {
  FieldElement atm_id;
  friend bool operator==(const M1AtmAssignId&, const M1AtmAssignId&) = default;
};

struct M2AtmRegisterRequest {
  FieldElement atm_id;
  Certificate atm_certificate;
  friend bool operator==(const M2AtmRegisterRequest&, const M2AtmRegisterRequest&) = default;
};

struct M3AtmRegisterResponse {
  SealedBox sealed_d_atm;  // PUBLIC_KEY, under the ATM's certified key
  friend bool operator==(const M3AtmRegisterResponse&, const M3AtmRegisterResponse&) = default;
};

struct M4UserAssignId {
  FieldElement user_id;
  friend bool operator==(const M4UserAssignId&, const M4UserAssignId&) = default;
};

struct M5UserRegisterRequest {
  FieldElement user_id;
  Certificate user_certificate;
  SealedBox sealed_session_key;  // PUBLIC_KEY, under the bank's key
  friend bool operator==(const M5UserRegisterRequest&, const M5UserRegisterRequest&) = default;
};

struct M6UserRegisterResponse {
  SealedBox sealed_d_user;  // SYMMETRIC, under the session key
  friend bool operator==(const M6UserRegisterResponse&, const M6UserRegisterResponse&) = default;
};

struct M7UserAuthRequest {
  FieldElement user_id;
  Timestamp t_s = 0;
  Signature user_signature;  // over (user_id, t_s)
  SealedBox sealed_d_user;   // forwarded untouched from M6
  friend bool operator==(const M7UserAuthRequest&, const M7UserAuthRequest&) = default;
};

struct M8CertFetch {
  FieldElement user_id;
  friend bool operator==(const M8CertFetch&, const M8CertFetch&) = default;
};

struct M8RCertFetchReply {
  Certificate user_certificate;
  friend bool operator==(const M8RCertFetchReply&, const M8RCertFetchReply&) = default;
};

struct M9BankAuthRequest {
  FieldElement user_id;
  FieldElement atm_id;
  Timestamp t_s = 0;
  Signature user_signature;        // the user's, over (user_id, t_s)
  SealedBox sealed_d_user;         // forwarded untouched
  SealedBox sealed_d_atm_for_bank; // PUBLIC_KEY, re-sealed under the bank key
  friend bool operator==(const M9BankAuthRequest&, const M9BankAuthRequest&) = default;
};

struct M10AuthDecision {
  FieldElement user_id;
  FieldElement atm_id;
  Timestamp t_s = 0;
  std::uint8_t accepted_raw = 0;
  std::uint8_t reason_raw = 0;
  Signature bank_signature;  // over (user_id, atm_id, t_s, accepted, reason)

  bool accepted() const { return accepted_raw != 0; }
  ReasonCode reason() const { return static_cast<ReasonCode>(reason_raw); }
  friend bool operator==(const M10AuthDecision&, const M10AuthDecision&) = default;
};

struct AuthzRequest {
  FieldElement user_id;
  FieldElement atm_id;
  std::uint64_t amount = 0;  // currency minor units
  friend bool operator==(const AuthzRequest&, const AuthzRequest&) = default;
};

struct AuthzDecision {
  FieldElement user_id;
  FieldElement atm_id;
  std::uint64_t amount = 0;
  std::uint8_t allowed_raw = 0;
  std::uint8_t reason_raw = 0;
  Signature bank_signature;  // over (user_id, atm_id, amount, allowed, reason)

  bool allowed() const { return allowed_raw != 0; }
  AuthzReason reason() const { return static_cast<AuthzReason>(reason_raw); }
  friend bool operator==(const AuthzDecision&, const AuthzDecision&) = default;
};

using Message =
    std::variant<M1AtmAssignId, M2AtmRegisterRequest, M3AtmRegisterResponse, M4UserAssignId,
                 M5UserRegisterRequest, M6UserRegisterResponse, M7UserAuthRequest, M8CertFetch,
                 M8RCertFetchReply, M9BankAuthRequest, M10AuthDecision, AuthzRequest,
                 AuthzDecision>;

inline MsgType message_type(const Message& m) {
  struct V {
    MsgType operator()(const M1AtmAssignId&) const { return MsgType::M1_ATM_ASSIGN_ID; }
    MsgType operator()(const M2AtmRegisterRequest&) const { return MsgType::M2_ATM_REGISTER_REQUEST; }
    MsgType operator()(const M3AtmRegisterResponse&) const { return MsgType::M3_ATM_REGISTER_RESPONSE; }
    MsgType operator()(const M4UserAssignId&) const { return MsgType::M4_USER_ASSIGN_ID; }
    MsgType operator()(const M5UserRegisterRequest&) const { return MsgType::M5_USER_REGISTER_REQUEST; }
    MsgType operator()(const M6UserRegisterResponse&) const { return MsgType::M6_USER_REGISTER_RESPONSE; }
    MsgType operator()(const M7UserAuthRequest&) const { return MsgType::M7_USER_AUTH_REQUEST; }
    MsgType operator()(const M8CertFetch&) const { return MsgType::M8_CERT_FETCH; }
    MsgType operator()(const M8RCertFetchReply&) const { return MsgType::M8R_CERT_FETCH_REPLY; }
    MsgType operator()(const M9BankAuthRequest&) const { return MsgType::M9_BANK_AUTH_REQUEST; }
    MsgType operator()(const M10AuthDecision&) const { return MsgType::M10_AUTH_DECISION; }
    MsgType operator()(const AuthzRequest&) const { return MsgType::AUTHZ_REQUEST; }
    MsgType operator()(const AuthzDecision&) const { return MsgType::AUTHZ_DECISION; }
  };
  return std::visit(V{}, m);
}

}  // namespace sfamss
