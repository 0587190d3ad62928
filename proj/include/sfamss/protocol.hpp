#pragma once

// The three role state machines and the four protocol phases:
//
//   ATM registration   M1 -> M2 -> M3   (bank assigns id, verifies the ATM
//                                        certificate, hands out D_ATM sealed
//                                        under the ATM's certified key)
//   user registration  M4 -> M5 -> M6   (card generates the session key and
//                                        sends it sealed to the bank; bank
//                                        draws r, stores (0, r), returns
//                                        D_USER sealed under the session key)
//   user -> ATM        M7  (+ M8/M8R)   (PIN check on the card, signed
//                                        timestamped request, ATM verifies
//                                        certificate + signature + freshness)
//   three-share check  M9 -> M10        (bank interpolates D_USER, D'_ATM and
//                                        (0, r); accept iff the result equals
//                                        F + r coefficient-for-coefficient)
//
// The bank never throws on an authentication attempt: every failure becomes a
// signed M10 with a reason code, and every attempt lands in the audit log.

#include <mutex>
#include <optional>

#include "sfamss/codec.hpp"
#include "sfamss/freshness.hpp"
#include "sfamss/store.hpp"

namespace sfamss {

struct BadCertificateError : std::runtime_error {
  explicit BadCertificateError(const std::string& what = "bad certificate")
      : std::runtime_error(what) {}
};

struct BadSignatureError : std::runtime_error {
  BadSignatureError() : std::runtime_error("signature does not verify") {}
};

struct StaleError : std::runtime_error {
  StaleError() : std::runtime_error("timestamp outside the freshness window") {}
};

struct UnknownIdError : std::runtime_error {
  UnknownIdError() : std::runtime_error("id was never assigned by this bank") {}
};

struct AlreadyRegisteredError : std::runtime_error {
  AlreadyRegisteredError() : std::runtime_error("id is already registered") {}
};

struct IdSpaceExhaustedError : std::runtime_error {
  IdSpaceExhaustedError() : std::runtime_error("no field elements left to assign") {}
};

struct BadPinError : std::runtime_error {
  BadPinError() : std::runtime_error("PIN verification failed") {}
};

struct CardLockedError : std::runtime_error {
  CardLockedError() : std::runtime_error("card locked after repeated PIN failures") {}
};

// ---------------------------------------------------------------------------
// Card: the user's file-backed software token. Holds the user keypair, the
// session key, and D_USER exactly as the bank sealed it; the share plaintext
// never exists on the card.
// ---------------------------------------------------------------------------

class Card {
 public:
  static constexpr int kMaxPinFailures = 3;
  static constexpr int kPinIterations = 1000;

  Card(FieldElement user_id, KeyPair keypair, Certificate certificate, SessionKey session_key,
       SealedBox sealed_d_user, Bytes pin_salt, Digest pin_digest)
      : user_id_(user_id),
        keypair_(std::move(keypair)),
        certificate_(std::move(certificate)),
        session_key_(session_key),
        sealed_d_user_(std::move(sealed_d_user)),
        pin_salt_(std::move(pin_salt)),
        pin_digest_(pin_digest) {}

  static Digest digest_pin(ByteView salt, std::string_view pin) {
    Digest d = sha256_concat({salt, ByteView(to_bytes(pin))});
    for (int i = 1; i < kPinIterations; ++i) d = sha256_concat({salt, ByteView(d)});
    return d;
  }

  // Local PIN check, then a signed session opening: t_s from the injected
  // clock, signature over (user_id, t_s), stored box forwarded untouched.
  M7UserAuthRequest begin_session(std::string_view pin, std::uint64_t now_ms,
                                  CryptoBackend& backend) {
    if (locked_) throw CardLockedError();
    if (digest_pin(pin_salt_, pin) != pin_digest_) {
      if (++pin_failures_ >= kMaxPinFailures) locked_ = true;
      throw BadPinError();
    }
    pin_failures_ = 0;
    M7UserAuthRequest m7;
    m7.user_id = user_id_;
    m7.t_s = now_ms;
    m7.user_signature = backend.sign(keypair_.private_key, auth_signing_bytes(user_id_, now_ms));
    m7.sealed_d_user = sealed_d_user_;
    return m7;
  }

  FieldElement user_id() const { return user_id_; }
  const KeyPair& keypair() const { return keypair_; }
  const Certificate& certificate() const { return certificate_; }
  const SessionKey& session_key() const { return session_key_; }
  const SealedBox& sealed_d_user() const { return sealed_d_user_; }
  const Bytes& pin_salt() const { return pin_salt_; }
  const Digest& pin_digest() const { return pin_digest_; }
  bool locked() const { return locked_; }
  int pin_failures() const { return pin_failures_; }

 private:
  FieldElement user_id_;
  KeyPair keypair_;
  Certificate certificate_;
  SessionKey session_key_;
  SealedBox sealed_d_user_;
  Bytes pin_salt_;
  Digest pin_digest_;
  int pin_failures_ = 0;
  bool locked_ = false;  // process lifetime only
};

// ---------------------------------------------------------------------------
// Atm: holds its keypair, its plaintext D_ATM (opened once from M3 at
// registration) and the bank certificate; re-seals D_ATM under the bank key
// for every M9.
// ---------------------------------------------------------------------------

class Atm {
 public:
  Atm(FieldElement atm_id, KeyPair keypair, Certificate certificate, Bytes ca_public,
      Certificate bank_certificate, SharePoint d_atm)
      : atm_id_(atm_id),
        keypair_(std::move(keypair)),
        certificate_(std::move(certificate)),
        ca_public_(std::move(ca_public)),
        bank_certificate_(std::move(bank_certificate)),
        d_atm_(d_atm) {
    if (d_atm_.x != atm_id_) throw std::invalid_argument("D_ATM abscissa must be the ATM id");
  }

  M9BankAuthRequest handle_user(const M7UserAuthRequest& m7, const Certificate& user_cert,
                                std::uint64_t now_ms, const FreshnessPolicy& policy,
                                CryptoBackend& backend) {
    if (!verify_certificate(backend, user_cert, ca_public_) ||
        user_cert.subject_id != m7.user_id || user_cert.role != Role::USER)
      throw BadCertificateError();
    if (!backend.verify(user_cert.subject_public, auth_signing_bytes(m7.user_id, m7.t_s),
                        m7.user_signature))
      throw BadSignatureError();
    if (abs_diff(now_ms, m7.t_s) > policy.window_ms) throw StaleError();

    M9BankAuthRequest m9;
    m9.user_id = m7.user_id;
    m9.atm_id = atm_id_;
    m9.t_s = m7.t_s;
    m9.user_signature = m7.user_signature;
    m9.sealed_d_user = m7.sealed_d_user;
    m9.sealed_d_atm_for_bank =
        backend.seal_public(bank_certificate_.subject_public, share_plain_encoding(d_atm_));
    return m9;
  }

  bool verify_decision(const M10AuthDecision& m10, CryptoBackend& backend) const {
    return backend.verify(bank_certificate_.subject_public, signing_bytes(Message{m10}),
                          m10.bank_signature);
  }

  bool verify_authz(const AuthzDecision& d, CryptoBackend& backend) const {
    return backend.verify(bank_certificate_.subject_public, signing_bytes(Message{d}),
                          d.bank_signature);
  }

  void cache_certificate(const Certificate& cert) { cert_cache_[cert.subject_id.value] = cert; }

  std::optional<Certificate> cached_certificate(FieldElement user_id) const {
    auto it = cert_cache_.find(user_id.value);
    if (it == cert_cache_.end()) return std::nullopt;
    return it->second;
  }

  FieldElement atm_id() const { return atm_id_; }
  const KeyPair& keypair() const { return keypair_; }
  const Certificate& certificate() const { return certificate_; }
  const Certificate& bank_certificate() const { return bank_certificate_; }
  const SharePoint& d_atm() const { return d_atm_; }

 private:
  FieldElement atm_id_;
  KeyPair keypair_;
  Certificate certificate_;
  Bytes ca_public_;
  Certificate bank_certificate_;
  SharePoint d_atm_;
  std::map<std::uint64_t, Certificate> cert_cache_;
};

// ---------------------------------------------------------------------------
// Bank: owns the store, the base polynomial, the replay cache and the
// freshness policy. May serve many sessions; every mutation runs under one
// mutex, which also makes the replay-cache check-then-insert atomic.
// ---------------------------------------------------------------------------

class Bank {
 public:
  Bank(std::shared_ptr<CryptoBackend> backend, Store store, KeyPair keypair,
       Certificate certificate, Bytes ca_public, FieldElement bank_id, FreshnessPolicy policy,
       std::shared_ptr<RandomSource> rng, Clock clock,
       std::uint64_t default_withdrawal_limit = 50'000)
      : backend_(std::move(backend)),
        store_(std::move(store)),
        keypair_(std::move(keypair)),
        certificate_(std::move(certificate)),
        ca_public_(std::move(ca_public)),
        bank_id_(bank_id),
        policy_(policy),
        rng_(std::move(rng)),
        clock_(std::move(clock)),
        default_limit_(default_withdrawal_limit),
        field_(store_.secrets().modulus) {
    if (!is_base_polynomial(store_.secrets().base_poly))
      throw std::invalid_argument("bank requires a base polynomial (c0 = 0, c2 != 0)");
  }

  const PrimeField& field() const { return field_; }
  const Certificate& certificate() const { return certificate_; }
  const Bytes& ca_public() const { return ca_public_; }
  const FreshnessPolicy& policy() const { return policy_; }
  Store& store() { return store_; }
  CryptoBackend& backend() { return *backend_; }

  // Ids are never zero: x = 0 is reserved for the bank's anchor share (0, r).
  FieldElement assign_id(Role role) {
    std::lock_guard lock(mu_);
    (void)role;
    StoreSecrets& s = store_.secrets();
    if (s.next_id >= field_.modulus()) throw IdSpaceExhaustedError();
    FieldElement id{s.next_id++};
    s.assigned_ids.insert(id.value);
    store_.save();
    return id;
  }

  M3AtmRegisterResponse register_atm(const M2AtmRegisterRequest& m2) {
    std::lock_guard lock(mu_);
    const Certificate& cert = m2.atm_certificate;
    if (!verify_certificate(*backend_, cert, ca_public_) || cert.subject_id != m2.atm_id ||
        cert.role != Role::ATM)
      throw BadCertificateError();
    if (!store_.secrets().assigned_ids.count(m2.atm_id.value)) throw UnknownIdError();
    if (store_.has_atm(m2.atm_id)) throw AlreadyRegisteredError();

    SharePoint d_atm{m2.atm_id, poly_eval(field_, store_.secrets().base_poly, m2.atm_id)};
    M3AtmRegisterResponse m3;
    m3.sealed_d_atm = backend_->seal_public(cert.subject_public, share_plain_encoding(d_atm));

    store_.upsert_atm(AtmRecord{m2.atm_id, cert, EntityStatus::ACTIVE});
    store_.append_audit(clock_(), AuditEvent::REGISTER_ATM, 0, {0}, m2.atm_id, Bytes{});
    return m3;
  }

  M6UserRegisterResponse register_user(const M5UserRegisterRequest& m5) {
    std::lock_guard lock(mu_);
    const Certificate& cert = m5.user_certificate;
    if (!verify_certificate(*backend_, cert, ca_public_) || cert.subject_id != m5.user_id ||
        cert.role != Role::USER)
      throw BadCertificateError();
    if (!store_.secrets().assigned_ids.count(m5.user_id.value)) throw UnknownIdError();
    if (store_.has_user(m5.user_id)) throw AlreadyRegisteredError();

    Bytes key_bytes = backend_->open_public(keypair_.private_key, m5.sealed_session_key);
    if (key_bytes.size() != 32) throw OpenFailedError("session key must be 32 bytes");
    SessionKey session_key;
    std::copy(key_bytes.begin(), key_bytes.end(), session_key.bytes.begin());

    FieldElement r = field_.sample(*rng_);
    FieldElement y = field_.add(poly_eval(field_, store_.secrets().base_poly, m5.user_id), r);
    SharePoint d_user{m5.user_id, y};

    M6UserRegisterResponse m6;
    m6.sealed_d_user = backend_->seal_symmetric(session_key, share_plain_encoding(d_user));

    store_.upsert_user(UserRecord{m5.user_id, cert, r, session_key, default_limit_,
                                  EntityStatus::ACTIVE});
    store_.append_audit(clock_(), AuditEvent::REGISTER_USER, 0, m5.user_id, {0}, Bytes{});
    return m6;
  }

  const Certificate& user_certificate(FieldElement user_id) {
    std::lock_guard lock(mu_);
    return store_.get_user(user_id).certificate;
  }

  bool has_user(FieldElement user_id) {
    std::lock_guard lock(mu_);
    return store_.has_user(user_id);
  }

  // The three-share authentication. Total: every syntactically valid M9 gets
  // a signed decision, and (user_id, t_s) enters the replay cache whatever
  // the outcome.
  M10AuthDecision authenticate(const M9BankAuthRequest& m9, std::uint64_t now_ms) {
    std::lock_guard lock(mu_);
    ReasonCode reason = ReasonCode::OK;
    bool accepted = false;

    do {
      if (!store_.has_user(m9.user_id)) {
        reason = ReasonCode::UNKNOWN_USER;
        break;
      }
      if (!store_.has_atm(m9.atm_id)) {
        reason = ReasonCode::UNKNOWN_ATM;
        break;
      }
      const UserRecord& user = store_.get_user(m9.user_id);

      Freshness fr = check_freshness(policy_, m9.t_s, now_ms, replay_cache_,
                                     {m9.user_id.value, m9.t_s});
      if (fr == Freshness::STALE) {
        reason = ReasonCode::STALE;
        break;
      }
      if (fr == Freshness::REPLAY) {
        reason = ReasonCode::REPLAY;
        break;
      }

      if (!backend_->verify(user.certificate.subject_public,
                            auth_signing_bytes(m9.user_id, m9.t_s), m9.user_signature)) {
        reason = ReasonCode::BAD_SIGNATURE;
        break;
      }

      SharePoint d_user, d_atm;
      try {
        d_user = share_from_plain(backend_->open_symmetric(user.session_key, m9.sealed_d_user));
        d_atm = share_from_plain(
            backend_->open_public(keypair_.private_key, m9.sealed_d_atm_for_bank));
      } catch (const OpenFailedError&) {
        reason = ReasonCode::OPEN_FAILED;
        break;
      } catch (const std::invalid_argument&) {
        reason = ReasonCode::OPEN_FAILED;
        break;
      }

      if (d_user.x != m9.user_id || d_atm.x != m9.atm_id) {
        reason = ReasonCode::SHARE_MISMATCH;
        break;
      }

      SharePoint d_atm_shifted{d_atm.x, field_.add(d_atm.y, user.r_user)};
      SharePoint anchor{{0}, user.r_user};
      try {
        Polynomial recovered = interpolate(field_, d_user, d_atm_shifted, anchor);
        if (recovered == poly_shift(field_, store_.secrets().base_poly, user.r_user))
          accepted = true;
        else
          reason = ReasonCode::SHARE_MISMATCH;
      } catch (const DuplicateAbscissaError&) {
        reason = ReasonCode::SHARE_MISMATCH;
      }
    } while (false);

    M10AuthDecision m10;
    m10.user_id = m9.user_id;
    m10.atm_id = m9.atm_id;
    m10.t_s = m9.t_s;
    m10.accepted_raw = accepted ? 1 : 0;
    m10.reason_raw = static_cast<std::uint8_t>(accepted ? ReasonCode::OK : reason);
    m10.bank_signature = backend_->sign(keypair_.private_key, signing_bytes(Message{m10}));

    store_.append_audit(clock_(), accepted ? AuditEvent::AUTH_ACCEPT : AuditEvent::AUTH_REJECT,
                        m10.reason_raw, m9.user_id, m9.atm_id,
                        audit_evidence(auth_signing_bytes(m9.user_id, m9.t_s),
                                       m9.user_signature));

    replay_cache_.insert({m9.user_id.value, m9.t_s});
    replay_cache_.evict_expired(now_ms, policy_.window_ms);
    return m10;
  }

  // Privilege check for a withdrawal amount. The caller states whether this
  // connection already authenticated the user (the daemon tracks that).
  AuthzDecision authorize(const AuthzRequest& req, bool session_authenticated) {
    std::lock_guard lock(mu_);
    AuthzReason reason;
    bool allowed = false;
    if (!session_authenticated) {
      reason = AuthzReason::NOT_AUTHENTICATED;
    } else if (!store_.has_user(req.user_id)) {
      reason = AuthzReason::UNKNOWN_USER;
    } else if (req.amount <= store_.get_user(req.user_id).withdrawal_limit) {
      allowed = true;
      reason = AuthzReason::ALLOWED;
    } else {
      reason = AuthzReason::LIMIT_EXCEEDED;
    }

    AuthzDecision d;
    d.user_id = req.user_id;
    d.atm_id = req.atm_id;
    d.amount = req.amount;
    d.allowed_raw = allowed ? 1 : 0;
    d.reason_raw = static_cast<std::uint8_t>(reason);
    d.bank_signature = backend_->sign(keypair_.private_key, signing_bytes(Message{d}));

    store_.append_audit(clock_(), allowed ? AuditEvent::AUTHZ_ALLOW : AuditEvent::AUTHZ_DENY,
                        d.reason_raw, req.user_id, req.atm_id, Bytes{});
    return d;
  }

  void set_withdrawal_limit(FieldElement user_id, std::uint64_t limit) {
    std::lock_guard lock(mu_);
    UserRecord rec = store_.get_user(user_id);
    rec.withdrawal_limit = limit;
    store_.upsert_user(rec);
    store_.save();
  }

  std::size_t replay_cache_size() {
    std::lock_guard lock(mu_);
    return replay_cache_.size();
  }

 private:
  std::mutex mu_;
  std::shared_ptr<CryptoBackend> backend_;
  Store store_;
  KeyPair keypair_;
  Certificate certificate_;
  Bytes ca_public_;
  FieldElement bank_id_;
  FreshnessPolicy policy_;
  std::shared_ptr<RandomSource> rng_;
  Clock clock_;
  std::uint64_t default_limit_;
  PrimeField field_;
  ReplayCache replay_cache_;
};

}  // namespace sfamss
