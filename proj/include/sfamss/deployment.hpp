#pragma once

// Deployment directory layout and the operator-facing flows: initialization
// (CA + bank keys, base polynomial, empty store), in-process registration of
// ATMs and users, and loading of the state files they produce.
//
//   <dir>/config.json    shared config: modulus, freshness window, bank
//                        address, backend, deployment id
//   <dir>/ca.key|ca.cert fabric of trust for every certificate
//   <dir>/bank.key|bank.cert
//   <dir>/bank.master    secret the storage key is derived from
//   <dir>/bank.store     encrypted store image
//   <dir>/atms/atm-<id>.json
//   <dir>/cards/user-<id>.card
//
// Every artifact carries the deployment id, so files from one deployment
// cannot silently be used with another.

#include <fstream>

#include <json.hpp>

#include "sfamss/backend.hpp"
#include "sfamss/protocol.hpp"

namespace sfamss {

struct DirNotEmptyError : std::runtime_error {
  explicit DirNotEmptyError(const std::string& dir)
      : std::runtime_error("directory not empty: " + dir) {}
};

struct PinRequiredError : std::runtime_error {
  PinRequiredError() : std::runtime_error("user registration requires a PIN") {}
};

struct DeploymentMismatchError : std::runtime_error {
  DeploymentMismatchError() : std::runtime_error("file belongs to a different deployment") {}
};

struct DeploymentConfig {
  std::uint64_t modulus = kMersenne61;
  std::uint64_t window_ms = 30'000;
  std::string bank_host = "127.0.0.1";
  std::uint16_t bank_port = 7845;
  std::string backend = "sim";
  std::string deployment_id;

  nlohmann::json to_json() const {
    return {{"modulus", modulus},       {"freshness_window_ms", window_ms},
            {"bank_host", bank_host},   {"bank_port", bank_port},
            {"backend", backend},       {"deployment_id", deployment_id}};
  }

  static DeploymentConfig from_json(const nlohmann::json& j) {
    DeploymentConfig c;
    c.modulus = j.at("modulus").get<std::uint64_t>();
    c.window_ms = j.at("freshness_window_ms").get<std::uint64_t>();
    c.bank_host = j.at("bank_host").get<std::string>();
    c.bank_port = j.at("bank_port").get<std::uint16_t>();
    c.backend = j.at("backend").get<std::string>();
    c.deployment_id = j.at("deployment_id").get<std::string>();
    return c;
  }
};

namespace deploydetail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw StorageFailureError("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StorageFailureError("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::string cert_file_text(const Certificate& cert) {
  std::string out = "SFAMSS-CERT v1 role=";
  out += role_name(cert.role);
  out += "\n";
  out += base64_encode(certificate_encode(cert));
  out += "\n";
  return out;
}

inline Certificate cert_file_parse(const std::string& text) {
  auto nl = text.find('\n');
  if (nl == std::string::npos || text.rfind("SFAMSS-CERT", 0) != 0)
    throw std::invalid_argument("not a certificate file");
  return certificate_decode(base64_decode(std::string_view(text).substr(nl + 1)));
}

inline Bytes box_to_bytes(const SealedBox& b) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(b.mode));
  w.raw(b.ciphertext);
  return w.take();
}

inline SealedBox box_from_bytes(ByteView b) {
  if (b.empty()) throw std::invalid_argument("empty box blob");
  SealedBox box;
  box.mode = static_cast<SealMode>(b[0]);
  box.ciphertext.assign(b.begin() + 1, b.end());
  return box;
}

// registration rounds every message through the wire codec, so the file
// contents always reflect what would have crossed a real link
template <typename T>
T codec_round_trip(const T& msg) {
  return std::get<T>(decode(encode(Message{msg})));
}

}  // namespace deploydetail

class Deployment {
 public:
  struct InitOptions {
    std::uint64_t modulus = kMersenne61;
    std::uint64_t window_ms = 30'000;
    std::uint16_t port = 7845;
    std::string backend_name = "sim";
    std::optional<std::uint64_t> seed;
    std::uint64_t default_limit = 50'000;
  };

  static Deployment init(const std::filesystem::path& dir, const InitOptions& opt) {
    namespace fs = std::filesystem;
    using namespace deploydetail;
    if (fs::exists(dir) && !fs::is_empty(dir)) throw DirNotEmptyError(dir.string());
    fs::create_directories(dir / "atms");
    fs::create_directories(dir / "cards");

    auto backend = make_backend(opt.backend_name, opt.seed);
    std::unique_ptr<RandomSource> rng =
        opt.seed ? std::unique_ptr<RandomSource>(std::make_unique<SeededRandom>(*opt.seed))
                 : std::unique_ptr<RandomSource>(std::make_unique<SystemRandom>());
    PrimeField field(opt.modulus);

    KeyPair ca_kp = backend->generate_keypair();
    Certificate ca_cert = issue_certificate(*backend, ca_kp, {1}, ca_kp.public_key, {1}, Role::CA);
    KeyPair bank_kp = backend->generate_keypair();
    Certificate bank_cert =
        issue_certificate(*backend, ca_kp, {1}, bank_kp.public_key, {2}, Role::BANK);

    Bytes master(32);
    rng->fill(master.data(), master.size());

    DeploymentConfig config;
    config.modulus = opt.modulus;
    config.window_ms = opt.window_ms;
    config.bank_port = opt.port;
    config.backend = opt.backend_name;
    {
      ByteWriter w;
      w.raw(master);
      w.u64_be(opt.modulus);
      w.u64_be(opt.window_ms);
      w.u64_be(opt.port);
      w.raw(to_bytes(opt.backend_name));
      config.deployment_id = to_hex(ByteView(sha256(w.bytes()).data(), 16));
    }

    StoreSecrets secrets;
    secrets.modulus = opt.modulus;
    secrets.base_poly = sample_base_polynomial(field, *rng);
    secrets.next_id = 3;  // 1 = CA, 2 = bank
    secrets.assigned_ids = {1, 2};
    secrets.deployment_id = config.deployment_id;

    write_text(dir / "config.json", config.to_json().dump(2) + "\n");
    write_text(dir / "ca.key", key_file_text(ca_kp, opt.backend_name, Role::CA));
    write_text(dir / "ca.cert", cert_file_text(ca_cert));
    write_text(dir / "bank.key", key_file_text(bank_kp, opt.backend_name, Role::BANK));
    write_text(dir / "bank.cert", cert_file_text(bank_cert));
    write_text(dir / "bank.master", "SFAMSS-MASTER v1\n" + base64_encode(master) + "\n");

    SessionKey storage_key = backend->derive_key(master, "sfamss.storage");
    { Store store = Store::create((dir / "bank.store").string(), storage_key, backend, secrets); }

    Deployment d;
    d.dir_ = dir;
    d.config_ = config;
    d.backend_ = backend;
    d.seed_ = opt.seed;
    d.default_limit_ = opt.default_limit;
    d.load_keys();
    return d;
  }

  static Deployment load(const std::filesystem::path& dir,
                         std::optional<std::uint64_t> seed = std::nullopt) {
    using namespace deploydetail;
    Deployment d;
    d.dir_ = dir;
    d.config_ = DeploymentConfig::from_json(nlohmann::json::parse(read_text(dir / "config.json")));
    d.backend_ = make_backend(d.config_.backend, seed);
    d.seed_ = seed;
    d.load_keys();
    return d;
  }

  const DeploymentConfig& config() const { return config_; }
  const std::filesystem::path& dir() const { return dir_; }
  const std::shared_ptr<CryptoBackend>& backend() const { return backend_; }
  const Certificate& ca_certificate() const { return ca_cert_; }
  const Certificate& bank_certificate() const { return bank_cert_; }

  SessionKey storage_key() const {
    using namespace deploydetail;
    std::string master_text = read_text(dir_ / "bank.master");
    auto nl = master_text.find('\n');
    if (nl == std::string::npos || master_text.rfind("SFAMSS-MASTER", 0) != 0)
      throw std::invalid_argument("not a master secret file");
    Bytes master = base64_decode(std::string_view(master_text).substr(nl + 1));
    return backend_->derive_key(master, "sfamss.storage");
  }

  Store open_store() const {
    return Store::open((dir_ / "bank.store").string(), storage_key(), backend_);
  }

  Bank open_bank(Clock clock) const {
    Store store = open_store();
    if (store.secrets().deployment_id != config_.deployment_id) throw DeploymentMismatchError();
    std::shared_ptr<RandomSource> rng =
        seed_ ? std::shared_ptr<RandomSource>(
                    std::make_shared<SeededRandom>(*seed_ ^ 0x517cc1b727220a95ull))
              : std::shared_ptr<RandomSource>(std::make_shared<SystemRandom>());
    return Bank(backend_, std::move(store), bank_kp_, bank_cert_, ca_kp_.public_key,
                bank_cert_.subject_id, FreshnessPolicy{config_.window_ms}, rng, std::move(clock),
                default_limit_);
  }

  // M1 -> M2 -> M3 in-process; writes the ATM state file.
  std::filesystem::path register_atm(Bank& bank) const {
    using namespace deploydetail;
    M1AtmAssignId m1 = codec_round_trip(M1AtmAssignId{bank.assign_id(Role::ATM)});
    KeyPair kp = backend_->generate_keypair();
    Certificate cert =
        issue_certificate(*backend_, ca_kp_, ca_cert_.subject_id, kp.public_key, m1.atm_id,
                          Role::ATM);
    M2AtmRegisterRequest m2 = codec_round_trip(M2AtmRegisterRequest{m1.atm_id, cert});
    M3AtmRegisterResponse m3 = codec_round_trip(bank.register_atm(m2));
    SharePoint d_atm = share_from_plain(backend_->open_public(kp.private_key, m3.sealed_d_atm));

    nlohmann::json j{{"deployment_id", config_.deployment_id},
                     {"atm_id", m1.atm_id.value},
                     {"key", base64_encode(keypair_encode(kp))},
                     {"certificate", base64_encode(certificate_encode(cert))},
                     {"bank_certificate", base64_encode(certificate_encode(bank_cert_))},
                     {"d_atm_x", d_atm.x.value},
                     {"d_atm_y", d_atm.y.value}};
    std::filesystem::path file =
        dir_ / "atms" / ("atm-" + std::to_string(m1.atm_id.value) + ".json");
    write_text(file, j.dump(2) + "\n");
    return file;
  }

  // M4 -> M5 -> M6 in-process; writes the card file. The sealed D_USER is
  // stored exactly as issued, never opened on the card side.
  std::filesystem::path register_user(Bank& bank, const std::string& pin,
                                      std::optional<std::uint64_t> limit = std::nullopt) const {
    using namespace deploydetail;
    if (pin.empty()) throw PinRequiredError();

    M4UserAssignId m4 = codec_round_trip(M4UserAssignId{bank.assign_id(Role::USER)});
    KeyPair kp = backend_->generate_keypair();
    Certificate cert =
        issue_certificate(*backend_, ca_kp_, ca_cert_.subject_id, kp.public_key, m4.user_id,
                          Role::USER);
    SessionKey session_key = backend_->generate_session_key();
    M5UserRegisterRequest m5 = codec_round_trip(M5UserRegisterRequest{
        m4.user_id, cert,
        backend_->seal_public(bank_cert_.subject_public, ByteView(session_key.bytes))});
    M6UserRegisterResponse m6 = codec_round_trip(bank.register_user(m5));
    if (limit) bank.set_withdrawal_limit(m4.user_id, *limit);

    Bytes salt(16);
    backend_->random_bytes(salt.data(), salt.size());
    Digest pin_digest = Card::digest_pin(salt, pin);

    nlohmann::json j{{"deployment_id", config_.deployment_id},
                     {"user_id", m4.user_id.value},
                     {"key", base64_encode(keypair_encode(kp))},
                     {"certificate", base64_encode(certificate_encode(cert))},
                     {"session_key", base64_encode(ByteView(session_key.bytes))},
                     {"sealed_d_user", base64_encode(box_to_bytes(m6.sealed_d_user))},
                     {"pin_salt", to_hex(salt)},
                     {"pin_digest", to_hex(ByteView(pin_digest))}};
    std::filesystem::path file =
        dir_ / "cards" / ("user-" + std::to_string(m4.user_id.value) + ".card");
    write_text(file, j.dump(2) + "\n");
    return file;
  }

  Atm load_atm(const std::filesystem::path& file) const {
    using namespace deploydetail;
    nlohmann::json j = nlohmann::json::parse(read_text(file));
    if (j.at("deployment_id").get<std::string>() != config_.deployment_id)
      throw DeploymentMismatchError();
    KeyPair kp = keypair_decode(base64_decode(j.at("key").get<std::string>()));
    Certificate cert = certificate_decode(base64_decode(j.at("certificate").get<std::string>()));
    Certificate bank_cert =
        certificate_decode(base64_decode(j.at("bank_certificate").get<std::string>()));
    SharePoint d_atm{{j.at("d_atm_x").get<std::uint64_t>()},
                     {j.at("d_atm_y").get<std::uint64_t>()}};
    return Atm(cert.subject_id, kp, cert, ca_kp_.public_key, bank_cert, d_atm);
  }

  Card load_card(const std::filesystem::path& file) const {
    using namespace deploydetail;
    nlohmann::json j = nlohmann::json::parse(read_text(file));
    if (j.at("deployment_id").get<std::string>() != config_.deployment_id)
      throw DeploymentMismatchError();
    KeyPair kp = keypair_decode(base64_decode(j.at("key").get<std::string>()));
    Certificate cert = certificate_decode(base64_decode(j.at("certificate").get<std::string>()));
    Bytes key_bytes = base64_decode(j.at("session_key").get<std::string>());
    SessionKey session_key;
    std::copy(key_bytes.begin(), key_bytes.end(), session_key.bytes.begin());
    SealedBox sealed = box_from_bytes(base64_decode(j.at("sealed_d_user").get<std::string>()));
    Bytes salt = from_hex(j.at("pin_salt").get<std::string>());
    Bytes digest_bytes = from_hex(j.at("pin_digest").get<std::string>());
    Digest pin_digest;
    std::copy(digest_bytes.begin(), digest_bytes.end(), pin_digest.begin());
    return Card(cert.subject_id, kp, cert, session_key, sealed, salt, pin_digest);
  }

  std::vector<std::filesystem::path> atm_files() const { return list_dir(dir_ / "atms"); }
  std::vector<std::filesystem::path> card_files() const { return list_dir(dir_ / "cards"); }

 private:
  Deployment() = default;

  void load_keys() {
    using namespace deploydetail;
    ca_kp_ = key_file_parse(read_text(dir_ / "ca.key"));
    ca_cert_ = cert_file_parse(read_text(dir_ / "ca.cert"));
    bank_kp_ = key_file_parse(read_text(dir_ / "bank.key"));
    bank_cert_ = cert_file_parse(read_text(dir_ / "bank.cert"));
  }

  static std::vector<std::filesystem::path> list_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::exists(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_regular_file()) out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
  }

  std::filesystem::path dir_;
  DeploymentConfig config_;
  std::shared_ptr<CryptoBackend> backend_;
  std::optional<std::uint64_t> seed_;
  std::uint64_t default_limit_ = 50'000;
  KeyPair ca_kp_;
  Certificate ca_cert_;
  KeyPair bank_kp_;
  Certificate bank_cert_;
};

}  // namespace sfamss
