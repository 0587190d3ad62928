#pragma once

// Client side of a networked ATM session: PIN check on the card (before any
// network traffic), certificate fetch, the M9/M10 exchange, and the optional
// authorization request for a withdrawal amount.

#include <optional>

#include "sfamss/protocol.hpp"
#include "sfamss/transport.hpp"

namespace sfamss {

struct SessionResult {
  std::optional<M10AuthDecision> decision;
  std::optional<AuthzDecision> authz;
  bool bank_signature_ok = false;
  std::vector<std::string> steps;  // human-readable trail for reports

  bool accepted() const { return decision && decision->accepted() && bank_signature_ok; }
};

class AtmClient {
 public:
  AtmClient(Atm& atm, std::string host, std::uint16_t port, FreshnessPolicy policy, Clock clock,
            CryptoBackend& backend)
      : atm_(atm),
        host_(std::move(host)),
        port_(port),
        policy_(policy),
        clock_(std::move(clock)),
        backend_(backend) {}

  // Throws BadPinError/CardLockedError before any connection is made, and
  // TransportError (ConnectFailed and friends) for network trouble. Protocol
  // rejections come back inside the result, never as exceptions.
  SessionResult run(Card& card, const std::string& pin, std::optional<std::uint64_t> amount) {
    SessionResult result;

    M7UserAuthRequest m7 = card.begin_session(pin, clock_(), backend_);
    result.steps.emplace_back("pin-verified");

    TcpStream conn = TcpStream::connect(host_, port_);
    result.steps.emplace_back("connected");

    Certificate user_cert;
    if (auto cached = atm_.cached_certificate(m7.user_id)) {
      user_cert = *cached;
    } else {
      conn.send_frame(encode(Message{M8CertFetch{m7.user_id}}));
      Message reply = decode(conn.recv_frame());
      const auto* m8r = std::get_if<M8RCertFetchReply>(&reply);
      if (!m8r) throw TransportError(TransportError::Kind::IoError, "unexpected reply to M8");
      user_cert = m8r->user_certificate;
      atm_.cache_certificate(user_cert);
    }
    result.steps.emplace_back("certificate-fetched");

    M9BankAuthRequest m9 = atm_.handle_user(m7, user_cert, clock_(), policy_, backend_);
    result.steps.emplace_back("atm-verified-user");

    conn.send_frame(encode(Message{m9}));
    Message reply = decode(conn.recv_frame());
    const auto* m10 = std::get_if<M10AuthDecision>(&reply);
    if (!m10) throw TransportError(TransportError::Kind::IoError, "unexpected reply to M9");
    result.decision = *m10;
    result.bank_signature_ok = atm_.verify_decision(*m10, backend_);
    result.steps.emplace_back(std::string("decision-") +
                              (m10->accepted() ? "accept" : reason_name(m10->reason())));

    if (amount && result.accepted()) {
      conn.send_frame(encode(Message{AuthzRequest{m7.user_id, atm_.atm_id(), *amount}}));
      Message authz_reply = decode(conn.recv_frame());
      const auto* d = std::get_if<AuthzDecision>(&authz_reply);
      if (!d) throw TransportError(TransportError::Kind::IoError, "unexpected authz reply");
      if (!atm_.verify_authz(*d, backend_))
        throw TransportError(TransportError::Kind::IoError, "authz reply signature invalid");
      result.authz = *d;
      result.steps.emplace_back(std::string("authz-") + authz_reason_name(d->reason()));
    }
    return result;
  }

 private:
  Atm& atm_;
  std::string host_;
  std::uint16_t port_;
  FreshnessPolicy policy_;
  Clock clock_;
  CryptoBackend& backend_;
};

}  // namespace sfamss
