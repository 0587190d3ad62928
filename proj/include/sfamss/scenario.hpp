#pragma once

// Declarative scenario files: participants, actions, and expectations, one
// directive per line. '#' starts a comment.
//
//   scenario replay-detection
//   seed 42
//   clock 1700000000000
//   atm a1
//   user u1 pin 2468 limit 50000
//   attack replay u1 a1 pin 2468
//   expect accepted 1
//   expect rejected 1
//   expect detection REPLAY 1
//
// Directives: scenario, seed, clock, window, modulus, atm, user, session,
// attack, expect. A session is an honest run through the identity adversary;
// an attack runs the named script from the attack catalog.

#include <map>
#include <sstream>

#include "sfamss/adversary.hpp"
#include "sfamss/deployment.hpp"

namespace sfamss {

struct ScenarioParseError : std::runtime_error {
  int line;
  ScenarioParseError(int line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
};

struct ScenarioSpec {
  std::string name = "unnamed";
  std::uint64_t seed = 42;
  std::uint64_t clock_ms = 1'700'000'000'000ull;
  std::uint64_t window_ms = 30'000;
  std::uint64_t modulus = kMersenne61;

  struct UserDecl {
    std::string name;
    std::string pin;
    std::optional<std::uint64_t> limit;
  };
  struct Action {
    bool is_attack = false;
    std::string attack_kind;
    std::string user;
    std::string atm;
    std::string pin;
    std::optional<std::uint64_t> amount;
  };
  struct Expect {
    enum class Kind { Accepted, Rejected, Detection } kind;
    std::string reason;  // Detection only
    int count = 0;
  };

  std::vector<std::string> atms;
  std::vector<UserDecl> users;
  std::vector<Action> actions;
  std::vector<Expect> expects;
};

struct ScenarioReport {
  std::string scenario;
  std::vector<std::pair<std::string, std::string>> steps;  // (step, outcome)
  int accepted = 0;
  int rejected = 0;
  std::map<std::string, int> detections;
  std::string transcript_digest;
  bool ok = true;
  std::vector<std::string> mismatches;

  nlohmann::json to_json() const {
    nlohmann::json steps_json = nlohmann::json::array();
    for (const auto& [step, outcome] : steps)
      steps_json.push_back({{"step", step}, {"outcome", outcome}});
    return {{"scenario", scenario},
            {"steps", steps_json},
            {"accepted", accepted},
            {"rejected", rejected},
            {"detections", detections},
            {"transcript_digest", transcript_digest},
            {"ok", ok},
            {"mismatches", mismatches}};
  }
};

inline ScenarioSpec parse_scenario(const std::string& text) {
  ScenarioSpec spec;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  bool saw_scenario = false;

  auto want_u64 = [&](const std::string& tok, const char* what) -> std::uint64_t {
    try {
      std::size_t used = 0;
      std::uint64_t v = std::stoull(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (...) {
      throw ScenarioParseError(line_no, std::string("expected a number for ") + what);
    }
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    const std::string& head = tok[0];
    if (head == "scenario") {
      if (tok.size() != 2) throw ScenarioParseError(line_no, "scenario needs a name");
      spec.name = tok[1];
      saw_scenario = true;
    } else if (head == "seed") {
      if (tok.size() != 2) throw ScenarioParseError(line_no, "seed needs a value");
      spec.seed = want_u64(tok[1], "seed");
    } else if (head == "clock") {
      if (tok.size() != 2) throw ScenarioParseError(line_no, "clock needs a value");
      spec.clock_ms = want_u64(tok[1], "clock");
    } else if (head == "window") {
      if (tok.size() != 2) throw ScenarioParseError(line_no, "window needs a value");
      spec.window_ms = want_u64(tok[1], "window");
    } else if (head == "modulus") {
      if (tok.size() != 2) throw ScenarioParseError(line_no, "modulus needs a value");
      spec.modulus = want_u64(tok[1], "modulus");
    } else if (head == "atm") {
      if (tok.size() != 2) throw ScenarioParseError(line_no, "atm needs a name");
      spec.atms.push_back(tok[1]);
    } else if (head == "user") {
      if (tok.size() != 4 && tok.size() != 6)
        throw ScenarioParseError(line_no, "user NAME pin PIN [limit N]");
      if (tok[2] != "pin") throw ScenarioParseError(line_no, "expected 'pin'");
      ScenarioSpec::UserDecl u{tok[1], tok[3], std::nullopt};
      if (tok.size() == 6) {
        if (tok[4] != "limit") throw ScenarioParseError(line_no, "expected 'limit'");
        u.limit = want_u64(tok[5], "limit");
      }
      spec.users.push_back(std::move(u));
    } else if (head == "session") {
      if (tok.size() != 5 && tok.size() != 7)
        throw ScenarioParseError(line_no, "session USER ATM pin PIN [amount N]");
      if (tok[3] != "pin") throw ScenarioParseError(line_no, "expected 'pin'");
      ScenarioSpec::Action a;
      a.user = tok[1];
      a.atm = tok[2];
      a.pin = tok[4];
      if (tok.size() == 7) {
        if (tok[5] != "amount") throw ScenarioParseError(line_no, "expected 'amount'");
        a.amount = want_u64(tok[6], "amount");
      }
      spec.actions.push_back(std::move(a));
    } else if (head == "attack") {
      if (tok.size() != 6) throw ScenarioParseError(line_no, "attack KIND USER ATM pin PIN");
      if (!attack_kind_from_name(tok[1]))
        throw ScenarioParseError(line_no, "unknown attack kind: " + tok[1]);
      if (tok[4] != "pin") throw ScenarioParseError(line_no, "expected 'pin'");
      ScenarioSpec::Action a;
      a.is_attack = true;
      a.attack_kind = tok[1];
      a.user = tok[2];
      a.atm = tok[3];
      a.pin = tok[5];
      spec.actions.push_back(std::move(a));
    } else if (head == "expect") {
      if (tok.size() < 3) throw ScenarioParseError(line_no, "expect needs arguments");
      ScenarioSpec::Expect e;
      if (tok[1] == "accepted" && tok.size() == 3) {
        e.kind = ScenarioSpec::Expect::Kind::Accepted;
        e.count = static_cast<int>(want_u64(tok[2], "count"));
      } else if (tok[1] == "rejected" && tok.size() == 3) {
        e.kind = ScenarioSpec::Expect::Kind::Rejected;
        e.count = static_cast<int>(want_u64(tok[2], "count"));
      } else if (tok[1] == "detection" && tok.size() == 4) {
        e.kind = ScenarioSpec::Expect::Kind::Detection;
        e.reason = tok[2];
        e.count = static_cast<int>(want_u64(tok[3], "count"));
      } else {
        throw ScenarioParseError(line_no, "expect accepted N | rejected N | detection REASON N");
      }
      spec.expects.push_back(std::move(e));
    } else {
      throw ScenarioParseError(line_no, "unknown directive: " + head);
    }
  }
  if (!saw_scenario) throw ScenarioParseError(line_no ? line_no : 1, "missing 'scenario' line");
  return spec;
}

// Executes the scenario in a throwaway deployment under scratch_dir and diffs
// outcomes against the expectations.
inline ScenarioReport run_scenario(const ScenarioSpec& spec,
                                   const std::filesystem::path& scratch_dir) {
  ScenarioReport report;
  report.scenario = spec.name;

  Deployment::InitOptions opt;
  opt.modulus = spec.modulus;
  opt.window_ms = spec.window_ms;
  opt.seed = spec.seed;
  Deployment deployment = Deployment::init(scratch_dir, opt);
  Bank bank = deployment.open_bank(fixed_clock(spec.clock_ms));

  std::map<std::string, Atm> atms;
  std::map<std::string, Card> cards;
  for (const auto& name : spec.atms) {
    auto file = deployment.register_atm(bank);
    atms.emplace(name, deployment.load_atm(file));
    report.steps.emplace_back("register-atm " + name, "ok");
  }
  for (const auto& u : spec.users) {
    auto file = deployment.register_user(bank, u.pin, u.limit);
    cards.emplace(u.name, deployment.load_card(file));
    report.steps.emplace_back("register-user " + u.name, "ok");
  }

  Sha256 digest_acc;
  std::size_t action_index = 0;
  for (const auto& action : spec.actions) {
    // one deterministic second between user interactions, so consecutive
    // sessions by the same user do not collide in the replay cache
    Clock clock = fixed_clock(spec.clock_ms + 1000 * action_index++);
    auto atm_it = atms.find(action.atm);
    auto card_it = cards.find(action.user);
    if (atm_it == atms.end() || card_it == cards.end()) {
      report.ok = false;
      report.mismatches.push_back("unknown participant in action");
      continue;
    }

    SessionOutcome outcome;
    std::string label;
    if (action.is_attack) {
      AttackKind kind = *attack_kind_from_name(action.attack_kind);
      AttackReport attack =
          run_attack(kind, bank, atm_it->second, card_it->second, action.pin, clock);
      outcome = std::move(attack.outcome);
      label = "attack-" + action.attack_kind;
      report.steps.emplace_back(label, attack.detected ? "detected" : "NOT-DETECTED");
      if (!attack.detected) {
        report.ok = false;
        report.mismatches.push_back(label + " was not detected");
      }
    } else {
      try {
        outcome = apply_adversary(ChannelScript::deliver_all(), bank, atm_it->second,
                                  card_it->second, action.pin, clock);
        label = "session " + action.user + "@" + action.atm;
        report.steps.emplace_back(
            label, outcome.any_accept() ? "accept"
                                        : (outcome.decisions.empty()
                                               ? "no-decision"
                                               : reason_name(outcome.decisions[0].reason())));
        if (action.amount && outcome.any_accept()) {
          AuthzDecision d =
              bank.authorize({card_it->second.user_id(), atm_it->second.atm_id(), *action.amount},
                             true);
          report.steps.emplace_back("authz " + action.user,
                                    d.allowed() ? "ALLOWED" : authz_reason_name(d.reason()));
        }
      } catch (const BadPinError&) {
        report.steps.emplace_back("session " + action.user + "@" + action.atm, "BAD_PIN");
      }
    }

    for (const auto& d : outcome.decisions)
      d.accepted() ? ++report.accepted : ++report.rejected;
    for (const auto& [reason, n] : outcome.detections) report.detections[reason] += n;
    Digest t = outcome.transcript.digest();
    digest_acc.update(ByteView(t));
  }
  report.transcript_digest = to_hex(ByteView(digest_acc.finish()));

  for (const auto& e : spec.expects) {
    switch (e.kind) {
      case ScenarioSpec::Expect::Kind::Accepted:
        if (report.accepted != e.count) {
          report.ok = false;
          report.mismatches.push_back("expected accepted " + std::to_string(e.count) + ", got " +
                                      std::to_string(report.accepted));
        }
        break;
      case ScenarioSpec::Expect::Kind::Rejected:
        if (report.rejected != e.count) {
          report.ok = false;
          report.mismatches.push_back("expected rejected " + std::to_string(e.count) + ", got " +
                                      std::to_string(report.rejected));
        }
        break;
      case ScenarioSpec::Expect::Kind::Detection: {
        int got = 0;
        if (auto it = report.detections.find(e.reason); it != report.detections.end())
          got = it->second;
        if (got != e.count) {
          report.ok = false;
          report.mismatches.push_back("expected detection " + e.reason + " " +
                                      std::to_string(e.count) + ", got " + std::to_string(got));
        }
        break;
      }
    }
  }
  return report;
}

}  // namespace sfamss
