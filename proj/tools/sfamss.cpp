// sfamss command-line tool: deployment initialization, registration, the bank
// daemon, ATM sessions, the scripted attack suite, scenario runs, and audit
// verification. Reports are JSON lines on stdout.
//
// Exit codes: 0 expected outcome, 1 protocol rejection in an honest run,
// 2 usage/parse error, 3 connectivity trouble.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <iostream>

#include "sfamss/client.hpp"
#include "sfamss/scenario.hpp"
#include "sfamss/server.hpp"

using namespace sfamss;

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

void emit(const nlohmann::json& j) { std::cout << j.dump() << "\n" << std::flush; }

Clock make_clock(const std::optional<std::uint64_t>& fixed_ms) {
  if (fixed_ms) return fixed_clock(*fixed_ms);
  return system_clock_ms;
}

int cmd_init(const std::string& dir, std::optional<std::uint64_t> seed, std::uint16_t port,
             std::uint64_t modulus, std::uint64_t window, const std::string& backend_name) {
  Deployment::InitOptions opt;
  opt.modulus = modulus;
  opt.window_ms = window;
  opt.port = port;
  opt.backend_name = backend_name;
  opt.seed = seed;
  Deployment d = Deployment::init(dir, opt);
  emit({{"event", "init"},
        {"dir", dir},
        {"deployment_id", d.config().deployment_id},
        {"modulus", d.config().modulus},
        {"freshness_window_ms", d.config().window_ms},
        {"backend", d.config().backend},
        {"bank_port", d.config().bank_port}});
  return 0;
}

int cmd_register(const std::string& dir, const std::string& role, const std::string& pin,
                 std::optional<std::uint64_t> limit, std::optional<std::uint64_t> seed,
                 std::optional<std::uint64_t> clock_ms) {
  Deployment d = Deployment::load(dir, seed);
  Bank bank = d.open_bank(make_clock(clock_ms));
  std::filesystem::path file;
  if (role == "atm") {
    file = d.register_atm(bank);
  } else if (role == "user") {
    if (pin.empty()) throw PinRequiredError();
    file = d.register_user(bank, pin, limit);
  } else {
    emit({{"event", "error"}, {"error", "role must be atm or user"}});
    return 2;
  }
  emit({{"event", "registered"}, {"role", role}, {"file", file.string()}});
  return 0;
}

int cmd_serve(const std::string& dir, std::optional<std::uint16_t> port,
              std::optional<std::uint64_t> clock_ms, std::optional<std::uint64_t> seed) {
  Deployment d = Deployment::load(dir, seed);
  Bank bank = d.open_bank(make_clock(clock_ms));
  std::uint16_t bind_port = port.value_or(d.config().bank_port);

  BankServer server(bank, bind_port, make_clock(clock_ms));
  try {
    server.start();
  } catch (const TransportError& e) {
    emit({{"event", "error"}, {"error", e.what()}});
    return 3;
  }

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  emit({{"event", "serving"}, {"port", server.port()}, {"dir", dir}});

  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();

  auto chain = bank.store().verify_audit_chain();
  emit({{"event", "stopped"},
        {"audit_records", bank.store().audit_count()},
        {"audit_ok", chain.ok}});
  return chain.ok ? 0 : 1;
}

int cmd_atm(const std::string& dir, const std::string& atm_file, const std::string& card_file,
            const std::string& pin, std::optional<std::uint64_t> amount,
            std::optional<std::uint64_t> clock_ms, std::optional<std::uint64_t> seed,
            std::optional<std::uint16_t> port) {
  Deployment d = Deployment::load(dir, seed);
  Atm atm = d.load_atm(atm_file);
  Card card = d.load_card(card_file);

  AtmClient client(atm, d.config().bank_host, port.value_or(d.config().bank_port),
                   FreshnessPolicy{d.config().window_ms}, make_clock(clock_ms), *d.backend());
  SessionResult result;
  try {
    result = client.run(card, pin, amount);
  } catch (const BadPinError&) {
    emit({{"event", "session"}, {"outcome", "BAD_PIN"}});
    return 1;
  } catch (const CardLockedError&) {
    emit({{"event", "session"}, {"outcome", "CARD_LOCKED"}});
    return 1;
  }

  for (const auto& step : result.steps) emit({{"event", "step"}, {"name", step}});
  nlohmann::json j{{"event", "session"},
                   {"user_id", card.user_id().value},
                   {"atm_id", atm.atm_id().value},
                   {"accepted", result.accepted()},
                   {"bank_signature_ok", result.bank_signature_ok}};
  if (result.decision) j["reason"] = reason_name(result.decision->reason());
  if (result.authz) {
    j["authz"] = result.authz->allowed() ? "AUTHZ_ALLOW" : "AUTHZ_DENY";
    j["authz_reason"] = authz_reason_name(result.authz->reason());
  }
  emit(j);
  return result.accepted() ? 0 : 1;
}

int cmd_attack(const std::string& dir, const std::string& kind_name,
               std::optional<std::uint64_t> seed, std::optional<std::uint64_t> clock_ms) {
  auto kind = attack_kind_from_name(kind_name);
  if (!kind) {
    emit({{"event", "error"}, {"error", "unknown attack kind: " + kind_name}});
    return 2;
  }

  Deployment d = Deployment::load(dir, seed);
  Bank bank = d.open_bank(make_clock(clock_ms));

  // scratch participants registered just for this run
  Atm atm = d.load_atm(d.register_atm(bank));
  Card card = d.load_card(d.register_user(bank, "0000"));

  AttackReport report = run_attack(*kind, bank, atm, card, "0000", make_clock(clock_ms));

  nlohmann::json detections(report.outcome.detections);
  emit({{"event", "attack"},
        {"kind", report.kind},
        {"detected", report.detected},
        {"detail", report.detail},
        {"detections", detections},
        {"decisions", report.outcome.decisions.size()},
        {"accepted_any", report.outcome.any_accept()},
        {"transcript_digest", to_hex(ByteView(report.outcome.transcript.digest()))}});
  return report.detected ? 0 : 1;
}

int cmd_scenario(const std::string& file) {
  std::string text;
  try {
    text = deploydetail::read_text(file);
  } catch (const std::exception& e) {
    emit({{"event", "error"}, {"error", e.what()}});
    return 2;
  }

  ScenarioSpec spec;
  try {
    spec = parse_scenario(text);
  } catch (const ScenarioParseError& e) {
    emit({{"event", "parse-error"}, {"line", e.line}, {"error", e.what()}});
    return 2;
  }

  std::filesystem::path scratch =
      std::filesystem::temp_directory_path() /
      ("sfamss-scn-" + std::to_string(::getpid()) + "-" + spec.name);
  std::filesystem::remove_all(scratch);
  ScenarioReport report = run_scenario(spec, scratch);
  std::filesystem::remove_all(scratch);

  for (const auto& [step, outcome] : report.steps)
    emit({{"event", "step"}, {"name", step}, {"outcome", outcome}});
  emit(report.to_json());
  return report.ok ? 0 : 1;
}

int cmd_audit_verify(const std::string& dir, std::optional<std::uint64_t> seed) {
  Deployment d = Deployment::load(dir, seed);
  Store store = d.open_store();
  auto chain = store.verify_audit_chain();
  if (chain.ok) {
    for (const auto& rec : store.read_audit())
      emit({{"event", "audit-record"},
            {"seq", rec.seq},
            {"timestamp_ms", rec.timestamp_ms},
            {"kind", audit_event_name(rec.event)},
            {"user_id", rec.user_id.value},
            {"atm_id", rec.atm_id.value}});
  }
  emit({{"event", "audit"},
        {"records", store.audit_count()},
        {"ok", chain.ok},
        {"broken_seq", chain.broken_seq}});
  return chain.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SFAMSS: secret-share-based ATM authentication framework"};
  app.require_subcommand(1);

  std::string dir, pin, role, atm_file, card_file, kind, scenario_file;
  std::string backend_name = "sim";
  std::uint64_t modulus = kMersenne61;
  std::uint64_t window = 30'000;
  std::uint16_t init_port = 7845;
  std::optional<std::uint64_t> seed, clock_ms, amount, limit;
  std::optional<std::uint16_t> port;

  auto add_dir = [&](CLI::App* cmd) {
    cmd->add_option("--dir", dir, "deployment directory")->envname("SFAMSS_DIR")->required();
  };

  CLI::App* init = app.add_subcommand("init", "create a new deployment");
  add_dir(init);
  init->add_option("--seed", seed, "deterministic seed for keys and the base polynomial");
  init->add_option("--port", init_port, "bank port recorded in the config");
  init->add_option("--modulus", modulus, "prime modulus for the share field");
  init->add_option("--window", window, "freshness window in milliseconds");
  init->add_option("--backend", backend_name, "crypto backend: sim or openssl");

  CLI::App* reg = app.add_subcommand("register", "register an ATM or a user");
  add_dir(reg);
  reg->add_option("--role", role, "atm or user")->required();
  reg->add_option("--pin", pin, "PIN for the new card (user role)");
  reg->add_option("--limit", limit, "withdrawal limit in minor units");
  reg->add_option("--seed", seed, "deterministic seed");
  reg->add_option("--clock", clock_ms, "fixed clock (ms since epoch)");

  CLI::App* serve = app.add_subcommand("serve", "run the bank daemon");
  add_dir(serve);
  serve->add_option("--port", port, "listen port (default: config)");
  serve->add_option("--clock", clock_ms, "fixed clock (ms since epoch)");
  serve->add_option("--seed", seed, "deterministic seed");

  CLI::App* atm = app.add_subcommand("atm", "run one ATM session against the daemon");
  add_dir(atm);
  atm->add_option("atm-file", atm_file, "ATM state file")->required();
  atm->add_option("card-file", card_file, "card file")->required();
  atm->add_option("--pin", pin, "PIN")->required();
  atm->add_option("--amount", amount, "withdrawal amount to authorize");
  atm->add_option("--clock", clock_ms, "fixed clock (ms since epoch)");
  atm->add_option("--seed", seed, "deterministic seed");
  atm->add_option("--port", port, "bank port (default: config)");

  CLI::App* attack = app.add_subcommand("attack", "run a scripted attack in-process");
  add_dir(attack);
  attack->add_option("kind", kind, "replay | tamper | impersonate | eavesdrop")->required();
  attack->add_option("--seed", seed, "deterministic seed");
  attack->add_option("--clock", clock_ms, "fixed clock (ms since epoch)");

  CLI::App* scenario = app.add_subcommand("scenario", "run a declarative scenario file");
  scenario->add_option("file", scenario_file, "scenario file")->required();

  CLI::App* audit = app.add_subcommand("audit-verify", "decrypt and verify the audit chain");
  add_dir(audit);
  audit->add_option("--seed", seed, "deterministic seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (init->parsed()) return cmd_init(dir, seed, init_port, modulus, window, backend_name);
    if (reg->parsed()) return cmd_register(dir, role, pin, limit, seed, clock_ms);
    if (serve->parsed()) return cmd_serve(dir, port, clock_ms, seed);
    if (atm->parsed()) return cmd_atm(dir, atm_file, card_file, pin, amount, clock_ms, seed, port);
    if (attack->parsed()) return cmd_attack(dir, kind, seed, clock_ms);
    if (scenario->parsed()) return cmd_scenario(scenario_file);
    if (audit->parsed()) return cmd_audit_verify(dir, seed);
  } catch (const TransportError& e) {
    emit({{"event", "error"}, {"error", e.what()}});
    return 3;
  } catch (const DirNotEmptyError& e) {
    emit({{"event", "error"}, {"error", e.what()}});
    return 2;
  } catch (const PinRequiredError& e) {
    emit({{"event", "error"}, {"error", e.what()}});
    return 2;
  } catch (const UnknownBackendError& e) {
    emit({{"event", "error"}, {"error", e.what()}});
    return 2;
  } catch (const std::exception& e) {
    emit({{"event", "error"}, {"error", e.what()}});
    return 1;
  }
  return 2;
}
