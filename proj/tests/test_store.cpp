#include <catch2/catch.hpp>

#include <filesystem>
#include <unistd.h>

#include "sfamss/sim_backend.hpp"
#include "sfamss/store.hpp"

using namespace sfamss;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("sfamss-store-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::shared_ptr<CryptoBackend> backend() { return std::make_shared<SimBackend>(99); }

SessionKey key_of(std::uint8_t fill) {
  SessionKey k;
  k.bytes.fill(fill);
  return k;
}

StoreSecrets fixture_secrets() {
  StoreSecrets s;
  s.modulus = 101;
  s.base_poly = Polynomial{{FieldElement{0}, FieldElement{3}, FieldElement{2}}};
  s.next_id = 10;
  s.assigned_ids = {1, 2, 5, 9};
  s.deployment_id = "deadbeef";
  return s;
}

UserRecord fixture_user(CryptoBackend& b, const KeyPair& ca) {
  KeyPair kp = b.generate_keypair();
  UserRecord u;
  u.user_id = {9};
  u.certificate = issue_certificate(b, ca, {1}, kp.public_key, {9}, Role::USER);
  u.r_user = {7};
  u.session_key = b.generate_session_key();
  u.withdrawal_limit = 50'000;
  u.status = EntityStatus::ACTIVE;
  return u;
}

}  // namespace

TEST_CASE("save then open round trips records and secrets", "[store]") {
  TempDir dir;
  auto be = backend();
  KeyPair ca = be->generate_keypair();
  SessionKey key = key_of(0x11);
  UserRecord user = fixture_user(*be, ca);

  AtmRecord atm;
  atm.atm_id = {5};
  atm.certificate =
      issue_certificate(*be, ca, {1}, be->generate_keypair().public_key, {5}, Role::ATM);

  {
    Store s = Store::create(dir.file("bank.store"), key, be, fixture_secrets());
    s.upsert_user(user);
    s.upsert_atm(atm);
    s.save();
  }
  Store back = Store::open(dir.file("bank.store"), key, be);
  CHECK(back.secrets() == fixture_secrets());
  CHECK(back.get_user({9}) == user);
  CHECK(back.get_atm({5}) == atm);
  CHECK(back.audit_count() == 0);
  CHECK(back.verify_audit_chain().ok);  // empty log verifies vacuously
}

TEST_CASE("opening with a different key fails as WrongKey", "[store]") {
  TempDir dir;
  auto be = backend();
  { Store s = Store::create(dir.file("bank.store"), key_of(0x11), be, fixture_secrets()); }
  CHECK_THROWS_AS(Store::open(dir.file("bank.store"), key_of(0x22), be), WrongKeyError);
}

TEST_CASE("flipping an image byte fails as CorruptImage", "[store]") {
  TempDir dir;
  auto be = backend();
  SessionKey key = key_of(0x11);
  { Store s = Store::create(dir.file("bank.store"), key, be, fixture_secrets()); }

  Bytes image = storedetail::read_file(dir.file("bank.store"));
  image[80] ^= 0x01;  // inside the secrets box
  storedetail::write_file_durable(dir.file("bank.store"), image);
  CHECK_THROWS_AS(Store::open(dir.file("bank.store"), key, be), CorruptImageError);
}

TEST_CASE("record upsert and lookup semantics", "[store]") {
  TempDir dir;
  auto be = backend();
  KeyPair ca = be->generate_keypair();
  Store s = Store::create(dir.file("bank.store"), key_of(0x11), be, fixture_secrets());

  CHECK_THROWS_AS(s.get_user({404}), NotFoundError);
  CHECK_THROWS_AS(s.get_atm({404}), NotFoundError);

  UserRecord u = fixture_user(*be, ca);
  s.upsert_user(u);
  CHECK(s.get_user({9}) == u);

  u.withdrawal_limit = 123;  // last writer wins
  s.upsert_user(u);
  CHECK(s.get_user({9}).withdrawal_limit == 123);
}

TEST_CASE("audit genesis and chaining", "[store]") {
  TempDir dir;
  auto be = backend();
  Store s = Store::create(dir.file("bank.store"), key_of(0x11), be, fixture_secrets());

  const AuditRecord& first = s.append_audit(1000, AuditEvent::REGISTER_ATM, 0, {0}, {5}, Bytes{});
  CHECK(first.seq == 1);
  CHECK(first.prev_hash == Digest{});  // genesis: 32 zero bytes

  s.append_audit(1001, AuditEvent::REGISTER_USER, 0, {9}, {0}, Bytes{});
  s.append_audit(1002, AuditEvent::AUTH_ACCEPT, 0, {9}, {5}, Bytes{1, 2, 3});
  CHECK(s.audit_count() == 3);
  CHECK(s.verify_audit_chain().ok);

  auto records = s.read_audit();
  REQUIRE(records.size() == 3);
  CHECK(records[2].evidence == Bytes{1, 2, 3});
  CHECK(records[1].seq == 2);
}

TEST_CASE("audit survives reopen and stays verifiable", "[store]") {
  TempDir dir;
  auto be = backend();
  SessionKey key = key_of(0x11);
  {
    Store s = Store::create(dir.file("bank.store"), key, be, fixture_secrets());
    for (int i = 0; i < 5; ++i)
      s.append_audit(1000 + i, AuditEvent::AUTH_REJECT, 4, {9}, {5}, Bytes{std::uint8_t(i)});
  }
  Store s = Store::open(dir.file("bank.store"), key, be);
  CHECK(s.audit_count() == 5);
  CHECK(s.verify_audit_chain().ok);
  s.append_audit(2000, AuditEvent::AUTHZ_ALLOW, 0, {9}, {5}, Bytes{});
  CHECK(s.verify_audit_chain().ok);
  CHECK(s.read_audit().back().seq == 6);
}

TEST_CASE("byte flip in record 2 of 5 breaks the chain at record 3", "[store]") {
  TempDir dir;
  auto be = backend();
  SessionKey key = key_of(0x11);
  {
    Store s = Store::create(dir.file("bank.store"), key, be, fixture_secrets());
    for (int i = 0; i < 5; ++i)
      s.append_audit(1000 + i, AuditEvent::AUTH_ACCEPT, 0, {9}, {5}, Bytes(8, std::uint8_t(i)));
  }

  Bytes image = storedetail::read_file(dir.file("bank.store"));
  auto [begin, end] = Store::audit_region(image);
  // walk to record 2's encrypted body: count, record 1, record 2's header
  ByteReader r(ByteView(image.data() + begin, end - begin));
  r.u32_be();
  r.u64_be();
  r.raw(32);
  r.lp_bytes();
  r.u64_be();
  r.raw(32);
  std::size_t body2_off = end - r.remaining();
  image[body2_off + 10] ^= 0x01;
  storedetail::write_file_durable(dir.file("bank.store"), image);

  Store s = Store::open(dir.file("bank.store"), key, be);
  auto status = s.verify_audit_chain();
  CHECK_FALSE(status.ok);
  CHECK(status.broken_seq == 3);  // record 3's prev_hash no longer matches
  CHECK_THROWS_AS(s.read_audit(), CorruptImageError);
}

TEST_CASE("flip in the final record is still detected", "[store]") {
  TempDir dir;
  auto be = backend();
  SessionKey key = key_of(0x11);
  {
    Store s = Store::create(dir.file("bank.store"), key, be, fixture_secrets());
    for (int i = 0; i < 3; ++i)
      s.append_audit(1000 + i, AuditEvent::AUTH_ACCEPT, 0, {9}, {5}, Bytes(8, std::uint8_t(i)));
  }
  Bytes image = storedetail::read_file(dir.file("bank.store"));
  image[image.size() - 4] ^= 0x80;  // tail of the last record's body
  storedetail::write_file_durable(dir.file("bank.store"), image);

  Store s = Store::open(dir.file("bank.store"), key, be);
  auto status = s.verify_audit_chain();
  CHECK_FALSE(status.ok);
  CHECK(status.broken_seq == 3);  // no successor link, caught by body authentication
}

TEST_CASE("raw image never contains plaintext secret encodings", "[store]") {
  TempDir dir;
  auto be = backend();
  KeyPair ca = be->generate_keypair();
  SessionKey key = key_of(0x11);
  StoreSecrets secrets;
  secrets.modulus = kMersenne61;
  secrets.base_poly = Polynomial{
      {FieldElement{0}, FieldElement{0x1122334455667788ull}, FieldElement{0x0102030405060708ull}}};
  secrets.next_id = 3;
  secrets.deployment_id = "feedface";

  UserRecord u = fixture_user(*be, ca);
  u.r_user = {0x1020304050607080ull};
  {
    Store s = Store::create(dir.file("bank.store"), key, be, secrets);
    s.upsert_user(u);
    s.save();
  }
  Bytes image = storedetail::read_file(dir.file("bank.store"));

  ByteWriter coeff1, coeff2, r_user;
  coeff1.u64_be(0x1122334455667788ull);
  coeff2.u64_be(0x0102030405060708ull);
  r_user.u64_be(0x1020304050607080ull);
  CHECK_FALSE(contains_subsequence(image, coeff1.bytes()));
  CHECK_FALSE(contains_subsequence(image, coeff2.bytes()));
  CHECK_FALSE(contains_subsequence(image, r_user.bytes()));
  CHECK_FALSE(contains_subsequence(image, ByteView(u.session_key.bytes)));
}

TEST_CASE("second handle on the same store is refused", "[store]") {
  TempDir dir;
  auto be = backend();
  SessionKey key = key_of(0x11);
  Store s = Store::create(dir.file("bank.store"), key, be, fixture_secrets());
  CHECK_THROWS_AS(Store::open(dir.file("bank.store"), key, be), StoreLockedError);
}

TEST_CASE("store magic is bit-exact", "[store]") {
  TempDir dir;
  auto be = backend();
  { Store s = Store::create(dir.file("bank.store"), key_of(0x11), be, fixture_secrets()); }
  Bytes image = storedetail::read_file(dir.file("bank.store"));
  REQUIRE(image.size() >= 5);
  CHECK(image[0] == 'S');
  CHECK(image[1] == 'F');
  CHECK(image[2] == 'S');
  CHECK(image[3] == 'T');
  CHECK(image[4] == 0x01);
}

TEST_CASE("audit evidence payload round trips", "[store]") {
  Bytes signed_bytes{1, 2, 3, 4};
  Signature sig{{9, 9, 9}};
  Bytes ev = audit_evidence(signed_bytes, sig);
  auto [sb, back] = audit_evidence_parse(ev);
  CHECK(sb == signed_bytes);
  CHECK(back == sig);
}
