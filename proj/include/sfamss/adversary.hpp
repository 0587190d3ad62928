#pragma once

// Scriptable in-network adversary for in-process sessions. The adversary sits
// on every hop (user->ATM, ATM->bank and back), sees every raw frame, and can
// deliver, drop, tamper, replay captured frames or inject arbitrary bytes —
// everything a byte-level man-in-the-middle could do, minus breaking the
// cryptography.
//
// Script semantics: actions apply in order. Deliver/Drop/Tamper consume the
// next frame crossing the channel; Replay and Inject synthesize a delivery
// without consuming one. When the script runs out, the trailing default is
// Deliver, so an empty script is the identity adversary.

#include <deque>
#include <map>

#include "sfamss/protocol.hpp"

namespace sfamss {

enum class Hop : std::uint8_t { UserToAtm, AtmToBank, BankToAtm, AtmToUser };

inline const char* hop_name(Hop h) {
  switch (h) {
    case Hop::UserToAtm: return "user->atm";
    case Hop::AtmToBank: return "atm->bank";
    case Hop::BankToAtm: return "bank->atm";
    case Hop::AtmToUser: return "atm->user";
  }
  return "?";
}

struct ChannelAction {
  enum class Kind { Deliver, Drop, Replay, Tamper, Inject };
  Kind kind = Kind::Deliver;
  std::size_t replay_index = 0;   // Replay: index into the transcript so far
  std::size_t tamper_offset = 0;  // Tamper: byte offset, xor mask
  std::uint8_t xor_mask = 0;
  Bytes inject_bytes;             // Inject: raw frame and target hop
  Hop inject_hop = Hop::AtmToBank;

  static ChannelAction deliver() { return {}; }
  static ChannelAction drop() {
    ChannelAction a;
    a.kind = Kind::Drop;
    return a;
  }
  static ChannelAction replay(std::size_t index) {
    ChannelAction a;
    a.kind = Kind::Replay;
    a.replay_index = index;
    return a;
  }
  static ChannelAction tamper(std::size_t offset, std::uint8_t mask) {
    ChannelAction a;
    a.kind = Kind::Tamper;
    a.tamper_offset = offset;
    a.xor_mask = mask;
    return a;
  }
  static ChannelAction inject(Hop hop, Bytes bytes) {
    ChannelAction a;
    a.kind = Kind::Inject;
    a.inject_hop = hop;
    a.inject_bytes = std::move(bytes);
    return a;
  }
};

struct ChannelScript {
  std::vector<ChannelAction> actions;

  static ChannelScript deliver_all() { return {}; }
};

struct TranscriptEntry {
  Hop hop;
  Bytes frame;
  std::uint64_t timestamp_ms = 0;
};

struct Transcript {
  std::vector<TranscriptEntry> entries;  // append-only during a session

  Digest digest() const {
    Sha256 h;
    for (const auto& e : entries) {
      std::uint8_t tag = static_cast<std::uint8_t>(e.hop);
      h.update(ByteView(&tag, 1));
      h.update(e.frame);
    }
    return h.finish();
  }

  bool contains(ByteView needle) const {
    for (const auto& e : entries)
      if (contains_subsequence(e.frame, needle)) return true;
    return false;
  }
};

struct SessionOutcome {
  std::vector<M10AuthDecision> decisions;   // every signed bank decision seen
  std::map<std::string, int> detections;    // reason name -> count, ATM side included
  int malformed_frames = 0;
  int dropped_frames = 0;
  Transcript transcript;

  bool any_accept() const {
    for (const auto& d : decisions)
      if (d.accepted()) return true;
    return false;
  }

  int detection_count() const {
    int n = 0;
    for (const auto& [k, v] : detections) n += v;
    return n;
  }
};

// Drives one authentication flow between in-process parties with the
// adversary interposed on every hop.
class AdversarialSession {
 public:
  AdversarialSession(Bank& bank, Atm& atm, Card& card, Clock clock)
      : bank_(bank), atm_(atm), card_(card), clock_(std::move(clock)) {}

  SessionOutcome run(const ChannelScript& script, const std::string& pin) {
    SessionOutcome outcome;
    std::deque<std::pair<Hop, Bytes>> queue;
    std::deque<M7UserAuthRequest> pending_m7;
    std::size_t cursor = 0;

    M7UserAuthRequest m7 = card_.begin_session(pin, clock_(), bank_.backend());
    queue.emplace_back(Hop::UserToAtm, encode(Message{m7}));

    auto capture = [&](Hop hop, const Bytes& frame) {
      outcome.transcript.entries.push_back({hop, frame, clock_()});
    };

    auto dispatch = [&](Hop hop, const Bytes& frame) {
      Message msg;
      try {
        msg = decode(frame);
      } catch (const CodecException&) {
        ++outcome.malformed_frames;
        return;
      }
      deliver(msg, hop, queue, pending_m7, outcome);
    };

    while (true) {
      // non-consuming actions fire as soon as they are next in the script
      while (cursor < script.actions.size() &&
             (script.actions[cursor].kind == ChannelAction::Kind::Replay ||
              script.actions[cursor].kind == ChannelAction::Kind::Inject)) {
        const ChannelAction& a = script.actions[cursor++];
        if (a.kind == ChannelAction::Kind::Replay) {
          if (a.replay_index >= outcome.transcript.entries.size()) continue;
          TranscriptEntry entry = outcome.transcript.entries[a.replay_index];
          capture(entry.hop, entry.frame);
          dispatch(entry.hop, entry.frame);
        } else {
          capture(a.inject_hop, a.inject_bytes);
          dispatch(a.inject_hop, a.inject_bytes);
        }
      }

      if (queue.empty()) break;
      auto [hop, frame] = std::move(queue.front());
      queue.pop_front();

      ChannelAction action =
          cursor < script.actions.size() ? script.actions[cursor++] : ChannelAction::deliver();
      switch (action.kind) {
        case ChannelAction::Kind::Deliver:
          capture(hop, frame);
          dispatch(hop, frame);
          break;
        case ChannelAction::Kind::Drop:
          capture(hop, frame);  // the eavesdropper still saw it
          ++outcome.dropped_frames;
          break;
        case ChannelAction::Kind::Tamper: {
          Bytes bent = frame;
          if (!bent.empty()) bent[action.tamper_offset % bent.size()] ^= action.xor_mask;
          capture(hop, bent);
          dispatch(hop, bent);
          break;
        }
        default:
          // Replay/Inject never consume; handled above
          capture(hop, frame);
          dispatch(hop, frame);
          break;
      }
    }
    return outcome;
  }

 private:
  void deliver(const Message& msg, Hop hop, std::deque<std::pair<Hop, Bytes>>& queue,
               std::deque<M7UserAuthRequest>& pending_m7, SessionOutcome& outcome) {
    switch (hop) {
      case Hop::UserToAtm:
        if (const auto* m7 = std::get_if<M7UserAuthRequest>(&msg)) {
          pending_m7.push_back(*m7);
          queue.emplace_back(Hop::AtmToBank, encode(Message{M8CertFetch{m7->user_id}}));
        }
        break;

      case Hop::AtmToBank:
        if (const auto* m8 = std::get_if<M8CertFetch>(&msg)) {
          if (bank_.has_user(m8->user_id)) {
            queue.emplace_back(Hop::BankToAtm,
                               encode(Message{M8RCertFetchReply{
                                   bank_.user_certificate(m8->user_id)}}));
          } else {
            ++outcome.dropped_frames;  // bank has nothing truthful to answer
          }
        } else if (const auto* m9 = std::get_if<M9BankAuthRequest>(&msg)) {
          M10AuthDecision m10 = bank_.authenticate(*m9, clock_());
          outcome.decisions.push_back(m10);
          if (!m10.accepted()) ++outcome.detections[reason_name(m10.reason())];
          queue.emplace_back(Hop::BankToAtm, encode(Message{m10}));
        }
        break;

      case Hop::BankToAtm:
        if (const auto* m8r = std::get_if<M8RCertFetchReply>(&msg)) {
          if (pending_m7.empty()) break;
          M7UserAuthRequest next = pending_m7.front();
          pending_m7.pop_front();
          try {
            M9BankAuthRequest m9 = atm_.handle_user(next, m8r->user_certificate, clock_(),
                                                    bank_.policy(), bank_.backend());
            queue.emplace_back(Hop::AtmToBank, encode(Message{m9}));
          } catch (const BadCertificateError&) {
            ++outcome.detections["BAD_CERTIFICATE"];
          } catch (const BadSignatureError&) {
            ++outcome.detections[reason_name(ReasonCode::BAD_SIGNATURE)];
          } catch (const StaleError&) {
            ++outcome.detections[reason_name(ReasonCode::STALE)];
          }
        } else if (const auto* m10 = std::get_if<M10AuthDecision>(&msg)) {
          if (!atm_.verify_decision(*m10, bank_.backend()))
            ++outcome.detections[reason_name(ReasonCode::BAD_SIGNATURE)];
          queue.emplace_back(Hop::AtmToUser, encode(Message{*m10}));
        }
        break;

      case Hop::AtmToUser:
        break;  // terminal display to the user
    }
  }

  Bank& bank_;
  Atm& atm_;
  Card& card_;
  Clock clock_;
};

inline SessionOutcome apply_adversary(const ChannelScript& script, Bank& bank, Atm& atm,
                                      Card& card, const std::string& pin, Clock clock) {
  AdversarialSession session(bank, atm, card, std::move(clock));
  return session.run(script, pin);
}

// ---- attack catalog --------------------------------------------------------

enum class AttackKind { Replay, Tamper, Impersonate, Eavesdrop };

inline std::optional<AttackKind> attack_kind_from_name(std::string_view name) {
  if (name == "replay") return AttackKind::Replay;
  if (name == "tamper") return AttackKind::Tamper;
  if (name == "impersonate") return AttackKind::Impersonate;
  if (name == "eavesdrop") return AttackKind::Eavesdrop;
  return std::nullopt;
}

inline const char* attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::Replay: return "replay";
    case AttackKind::Tamper: return "tamper";
    case AttackKind::Impersonate: return "impersonate";
    case AttackKind::Eavesdrop: return "eavesdrop";
  }
  return "?";
}

struct AttackReport {
  std::string kind;
  bool detected = false;
  std::string detail;
  SessionOutcome outcome;
};

// M9 frame layout: magic(4) version(1) type(1) user_id(8) atm_id(8) t_s(8)...
// Flipping the low byte of t_s keeps the timestamp fresh and the replay key
// distinct, so the attempt reaches the signature check and dies there.
inline constexpr std::size_t kM9TimestampLowByte = 6 + 8 + 8 + 7;

inline AttackReport run_attack(AttackKind kind, Bank& bank, Atm& atm, Card& card,
                               const std::string& pin, Clock clock) {
  AttackReport report;
  report.kind = attack_name(kind);

  switch (kind) {
    case AttackKind::Replay: {
      // honest exchange (5 frames), then the captured M7 is re-delivered
      ChannelScript script;
      script.actions.assign(5, ChannelAction::deliver());
      script.actions.push_back(ChannelAction::replay(0));
      report.outcome = apply_adversary(script, bank, atm, card, pin, clock);
      report.detected = report.outcome.detections[reason_name(ReasonCode::REPLAY)] >= 1;
      report.detail = "re-delivered captured M7";
      break;
    }

    case AttackKind::Tamper: {
      ChannelScript script;
      script.actions.assign(3, ChannelAction::deliver());  // M7, M8, M8R
      script.actions.push_back(ChannelAction::tamper(kM9TimestampLowByte, 0x80));
      script.actions.push_back(ChannelAction::deliver());  // M10
      report.outcome = apply_adversary(script, bank, atm, card, pin, clock);
      report.detected =
          report.outcome.detections[reason_name(ReasonCode::BAD_SIGNATURE)] >= 1 &&
          !report.outcome.any_accept();
      report.detail = "flipped a signed byte of M9 in flight";
      break;
    }

    case AttackKind::Impersonate: {
      // unregistered keypair claiming the real user id; the card-local PIN
      // check is the attacker's own, so it passes — detection happens at the
      // signature verification against the registered certificate
      KeyPair imposter_kp = bank.backend().generate_keypair();
      Bytes salt{9, 9, 9, 9};
      Card imposter(card.user_id(), imposter_kp, card.certificate(), SessionKey{},
                    SealedBox{SealMode::SYMMETRIC, Bytes(48, 0x00)}, salt,
                    Card::digest_pin(salt, "0000"));
      report.outcome =
          apply_adversary(ChannelScript::deliver_all(), bank, atm, imposter, "0000", clock);
      report.detected =
          (report.outcome.detections[reason_name(ReasonCode::BAD_SIGNATURE)] >= 1 ||
           report.outcome.detections[reason_name(ReasonCode::SHARE_MISMATCH)] >= 1) &&
          !report.outcome.any_accept();
      report.detail = "fresh keypair claiming registered user id";
      break;
    }

    case AttackKind::Eavesdrop: {
      report.outcome =
          apply_adversary(ChannelScript::deliver_all(), bank, atm, card, pin, clock);
      // the evaluation knows the bank's secrets, the adversary does not:
      // reconstruct D_USER and look for its plaintext in the captured frames
      const UserRecord& rec = bank.store().get_user(card.user_id());
      const PrimeField& f = bank.field();
      FieldElement y =
          f.add(poly_eval(f, bank.store().secrets().base_poly, card.user_id()), rec.r_user);
      Bytes needle = share_plain_encoding({card.user_id(), y});
      bool leaked = report.outcome.transcript.contains(needle);
      report.detected = !leaked && report.outcome.any_accept();
      report.detail = leaked ? "plaintext share found in transcript"
                             : "no plaintext share bytes in any captured frame";
      break;
    }
  }
  return report;
}

}  // namespace sfamss
