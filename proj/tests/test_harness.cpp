#include <catch2/catch.hpp>

#include <thread>

#include "fixtures.hpp"
#include "sfamss/client.hpp"
#include "sfamss/scenario.hpp"
#include "sfamss/server.hpp"

using namespace sfamss;
using namespace sfamss::testing;

TEST_CASE("seeded init is reproducible", "[harness]") {
  TempDir a, b;
  Deployment::InitOptions opt;
  opt.modulus = 101;
  opt.seed = 42;

  Deployment da = Deployment::init(a.path / "d", opt);
  Deployment db = Deployment::init(b.path / "d", opt);

  Store sa = da.open_store();
  Store sb = db.open_store();
  CHECK(sa.secrets().base_poly == sb.secrets().base_poly);
  CHECK(is_base_polynomial(sa.secrets().base_poly));

  // fresh store: empty audit log that verifies vacuously
  CHECK(sa.audit_count() == 0);
  CHECK(sa.verify_audit_chain().ok);
}

TEST_CASE("init refuses a non-empty directory", "[harness]") {
  TempDir dir;
  deploydetail::write_text(dir.path / "leftover.txt", "x");
  Deployment::InitOptions opt;
  CHECK_THROWS_AS(Deployment::init(dir.path, opt), DirNotEmptyError);
}

TEST_CASE("registration writes loadable state files", "[harness]") {
  TempDir dir;
  Deployment::InitOptions opt;
  opt.modulus = 101;
  opt.seed = 7;
  Deployment d = Deployment::init(dir.path / "d", opt);
  Bank bank = d.open_bank(fixed_clock(kT0));

  auto atm_file = d.register_atm(bank);
  auto card_file = d.register_user(bank, "2468");

  CHECK(bank.store().atms().size() == 1);
  CHECK(bank.store().users().size() == 1);
  CHECK(bank.store().audit_count() == 2);

  SECTION("card file carries no plaintext share bytes") {
    Bytes card_bytes = to_bytes(deploydetail::read_text(card_file));
    const UserRecord& rec = bank.store().users().begin()->second;
    const PrimeField& f = bank.field();
    FieldElement y =
        f.add(poly_eval(f, bank.store().secrets().base_poly, rec.user_id), rec.r_user);
    Bytes needle = share_plain_encoding({rec.user_id, y});
    CHECK_FALSE(contains_subsequence(card_bytes, needle));
  }

  SECTION("loaded ATM and card complete an honest session") {
    Atm atm = d.load_atm(atm_file);
    Card card = d.load_card(card_file);
    SessionOutcome outcome = apply_adversary(ChannelScript::deliver_all(), bank, atm, card,
                                             "2468", fixed_clock(kT0));
    REQUIRE(outcome.decisions.size() == 1);
    CHECK(outcome.decisions[0].accepted());
  }

  SECTION("user registration without a PIN is refused") {
    CHECK_THROWS_AS(d.register_user(bank, ""), PinRequiredError);
  }

  SECTION("files from another deployment are rejected") {
    TempDir other;
    Deployment::InitOptions opt2;
    opt2.modulus = 101;
    opt2.seed = 8;
    Deployment d2 = Deployment::init(other.path / "d", opt2);
    CHECK_THROWS_AS(d2.load_card(card_file), DeploymentMismatchError);
  }
}

TEST_CASE("registration honors an explicit withdrawal limit", "[harness]") {
  TempDir dir;
  Deployment::InitOptions opt;
  opt.modulus = 101;
  opt.seed = 7;
  Deployment d = Deployment::init(dir.path / "d", opt);
  Bank bank = d.open_bank(fixed_clock(kT0));
  d.register_user(bank, "1111", 777);
  CHECK(bank.store().users().begin()->second.withdrawal_limit == 777);
}

TEST_CASE("networked session over loopback", "[harness]") {
  TempDir dir;
  Deployment::InitOptions opt;
  opt.modulus = 101;
  opt.seed = 99;
  Deployment d = Deployment::init(dir.path / "d", opt);

  auto clock = fixed_clock(kT0);
  Bank bank = d.open_bank(clock);
  auto atm_file = d.register_atm(bank);
  auto card_file = d.register_user(bank, "1357", 1000);

  BankServer server(bank, 0, clock);
  server.start();

  Atm atm = d.load_atm(atm_file);
  Card card = d.load_card(card_file);
  AtmClient client(atm, "127.0.0.1", server.port(), bank.policy(), clock, *d.backend());

  SECTION("honest run is accepted, in-limit authorization allowed") {
    SessionResult r = client.run(card, "1357", 600);
    REQUIRE(r.decision.has_value());
    CHECK(r.accepted());
    REQUIRE(r.authz.has_value());
    CHECK(r.authz->allowed());
  }

  SECTION("amount above the privilege limit is denied") {
    SessionResult r = client.run(card, "1357", 1001);
    CHECK(r.accepted());
    REQUIRE(r.authz.has_value());
    CHECK_FALSE(r.authz->allowed());
    CHECK(r.authz->reason() == AuthzReason::LIMIT_EXCEEDED);
  }

  SECTION("wrong PIN fails before any network traffic") {
    CHECK_THROWS_AS(client.run(card, "9999", std::nullopt), BadPinError);
  }

  SECTION("two concurrent sessions both accept") {
    auto card_file2 = d.register_user(bank, "8642");
    Atm atm2 = d.load_atm(atm_file);
    Card card2 = d.load_card(card_file2);

    SessionResult r1, r2;
    std::thread t1([&] {
      AtmClient c1(atm, "127.0.0.1", server.port(), bank.policy(), clock, *d.backend());
      r1 = c1.run(card, "1357", std::nullopt);
    });
    std::thread t2([&] {
      AtmClient c2(atm2, "127.0.0.1", server.port(), bank.policy(), clock, *d.backend());
      r2 = c2.run(card2, "8642", std::nullopt);
    });
    t1.join();
    t2.join();
    CHECK(r1.accepted());
    CHECK(r2.accepted());
  }

  server.stop();
  CHECK(bank.store().verify_audit_chain().ok);
}

#ifdef SFAMSS_HAVE_OPENSSL
TEST_CASE("the protocol layer is backend-agnostic: full session on OpenSSL", "[harness]") {
  TempDir dir;
  Deployment::InitOptions opt;
  opt.modulus = 101;
  opt.backend_name = "openssl";
  Deployment d = Deployment::init(dir.path / "d", opt);
  Bank bank = d.open_bank(fixed_clock(kT0));

  Atm atm = d.load_atm(d.register_atm(bank));
  Card card = d.load_card(d.register_user(bank, "2468"));

  SessionOutcome outcome =
      apply_adversary(ChannelScript::deliver_all(), bank, atm, card, "2468", fixed_clock(kT0));
  REQUIRE(outcome.decisions.size() == 1);
  CHECK(outcome.decisions[0].accepted());

  AttackReport tamper =
      run_attack(AttackKind::Tamper, bank, atm, card, "2468", fixed_clock(kT0 + 60'000));
  CHECK(tamper.detected);
}
#endif

TEST_CASE("scenario files parse", "[harness]") {
  const std::string good = R"(# a comment
scenario demo
seed 11
clock 1700000000000
atm a1
user u1 pin 2468 limit 500
session u1 a1 pin 2468 amount 100
attack replay u1 a1 pin 2468
expect accepted 2
expect rejected 1
expect detection REPLAY 1
)";
  ScenarioSpec spec = parse_scenario(good);
  CHECK(spec.name == "demo");
  CHECK(spec.seed == 11);
  CHECK(spec.atms.size() == 1);
  CHECK(spec.users.size() == 1);
  REQUIRE(spec.actions.size() == 2);
  CHECK(spec.actions[1].is_attack);
  CHECK(spec.expects.size() == 3);

  SECTION("unknown directives carry a line number") {
    try {
      parse_scenario("scenario x\nbogus directive\n");
      FAIL("expected ScenarioParseError");
    } catch (const ScenarioParseError& e) {
      CHECK(e.line == 2);
    }
  }

  SECTION("missing scenario header") {
    CHECK_THROWS_AS(parse_scenario("atm a1\n"), ScenarioParseError);
  }

  SECTION("malformed numbers") {
    CHECK_THROWS_AS(parse_scenario("scenario x\nseed banana\n"), ScenarioParseError);
  }
}

TEST_CASE("scenario runner executes sessions and attacks", "[harness]") {
  TempDir scratch;
  const std::string text = R"(scenario mixed
seed 21
clock 1700000000000
modulus 101
atm a1
user u1 pin 2468
session u1 a1 pin 2468
attack replay u1 a1 pin 2468
attack tamper u1 a1 pin 2468
expect accepted 2
expect rejected 2
expect detection REPLAY 1
expect detection BAD_SIGNATURE 1
)";
  ScenarioReport report = run_scenario(parse_scenario(text), scratch.path / "run");
  INFO(report.to_json().dump(2));
  CHECK(report.ok);
  CHECK(report.accepted == 2);
  CHECK(report.rejected == 2);
  CHECK(report.detections["REPLAY"] == 1);
  CHECK(report.detections["BAD_SIGNATURE"] == 1);
  CHECK_FALSE(report.transcript_digest.empty());
}

TEST_CASE("scenario reports are deterministic", "[harness]") {
  const std::string text = R"(scenario det
seed 33
clock 1700000000000
modulus 101
atm a1
user u1 pin 1111
session u1 a1 pin 1111
expect accepted 1
)";
  TempDir s1, s2;
  ScenarioReport a = run_scenario(parse_scenario(text), s1.path / "r");
  ScenarioReport b = run_scenario(parse_scenario(text), s2.path / "r");
  CHECK(a.transcript_digest == b.transcript_digest);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("scenario expectation mismatches are reported", "[harness]") {
  TempDir scratch;
  const std::string text = R"(scenario wrong
seed 5
modulus 101
atm a1
user u1 pin 2222
session u1 a1 pin 2222
expect accepted 3
)";
  ScenarioReport report = run_scenario(parse_scenario(text), scratch.path / "run");
  CHECK_FALSE(report.ok);
  REQUIRE_FALSE(report.mismatches.empty());
}
