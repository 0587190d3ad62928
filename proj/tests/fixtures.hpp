#pragma once

// Shared test fixtures: a disposable deployment with CA, bank, and helpers to
// mint registered ATMs and cards, all deterministic under a fixed seed.

#include <deque>
#include <filesystem>
#include <optional>
#include <unistd.h>

#include "sfamss/protocol.hpp"
#include "sfamss/sim_backend.hpp"

namespace sfamss::testing {

constexpr std::uint64_t kT0 = 1'700'000'000'000ull;  // fixed session epoch

inline Polynomial fixture_poly() {  // F = [0, 3, 2], the worked example
  return Polynomial{{FieldElement{0}, FieldElement{3}, FieldElement{2}}};
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("sfamss-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Plays scripted values first (to force specific r draws), then falls back to
// a seeded stream.
struct ScriptedRandom final : RandomSource {
  std::deque<std::uint64_t> script;
  SeededRandom fallback{12345};
  std::uint64_t next_u64() override {
    if (!script.empty()) {
      std::uint64_t v = script.front();
      script.pop_front();
      return v;
    }
    return fallback.next_u64();
  }
};

struct ProtoFixture {
  TempDir dir;
  std::shared_ptr<CryptoBackend> backend;
  std::shared_ptr<ScriptedRandom> rng;
  KeyPair ca_kp;
  Certificate ca_cert;
  Certificate bank_cert;
  std::optional<Bank> bank;

  explicit ProtoFixture(std::uint64_t modulus, Polynomial base_poly, std::uint64_t seed = 7,
                        std::uint64_t window_ms = 30'000) {
    backend = std::make_shared<SimBackend>(seed);
    rng = std::make_shared<ScriptedRandom>();
    rng->fallback = SeededRandom{seed * 1000003 + 17};
    ca_kp = backend->generate_keypair();
    ca_cert = issue_certificate(*backend, ca_kp, {1}, ca_kp.public_key, {1}, Role::CA);
    KeyPair bank_kp = backend->generate_keypair();
    bank_cert = issue_certificate(*backend, ca_kp, {1}, bank_kp.public_key, {2}, Role::BANK);

    StoreSecrets secrets;
    secrets.modulus = modulus;
    secrets.base_poly = base_poly;
    secrets.next_id = 3;
    secrets.assigned_ids = {1, 2};
    secrets.deployment_id = "test";

    SessionKey storage_key;
    storage_key.bytes.fill(0x5A);
    Store store = Store::create(dir.file("bank.store"), storage_key, backend, secrets);
    bank.emplace(backend, std::move(store), bank_kp, bank_cert, ca_kp.public_key,
                 FieldElement{2}, FreshnessPolicy{window_ms}, rng, fixed_clock(kT0));
  }

  Atm make_atm() {
    FieldElement id = bank->assign_id(Role::ATM);
    KeyPair kp = backend->generate_keypair();
    Certificate cert = issue_certificate(*backend, ca_kp, {1}, kp.public_key, id, Role::ATM);
    M3AtmRegisterResponse m3 = bank->register_atm({id, cert});
    SharePoint d_atm = share_from_plain(backend->open_public(kp.private_key, m3.sealed_d_atm));
    return Atm(id, kp, cert, ca_kp.public_key, bank_cert, d_atm);
  }

  Card make_card(const std::string& pin, std::optional<std::uint64_t> forced_r = std::nullopt) {
    FieldElement id = bank->assign_id(Role::USER);
    KeyPair kp = backend->generate_keypair();
    Certificate cert = issue_certificate(*backend, ca_kp, {1}, kp.public_key, id, Role::USER);
    SessionKey ks = backend->generate_session_key();
    if (forced_r) rng->script.push_back(*forced_r);
    M5UserRegisterRequest m5{
        id, cert, backend->seal_public(bank_cert.subject_public, ByteView(ks.bytes))};
    M6UserRegisterResponse m6 = bank->register_user(m5);
    Bytes salt{1, 2, 3, 4, 5, 6, 7, 8};
    return Card(id, kp, cert, ks, m6.sealed_d_user, salt, Card::digest_pin(salt, pin));
  }
};

// pre-burn assignments so the next id lands where a worked example wants it
inline void burn_ids(Bank& bank, std::uint64_t until_next) {
  while (bank.store().secrets().next_id < until_next) bank.assign_id(Role::USER);
}

inline M9BankAuthRequest honest_m9(ProtoFixture& fx, Atm& atm, Card& card,
                                   const std::string& pin, std::uint64_t at) {
  M7UserAuthRequest m7 = card.begin_session(pin, at, *fx.backend);
  return atm.handle_user(m7, card.certificate(), at, fx.bank->policy(), *fx.backend);
}

}  // namespace sfamss::testing
