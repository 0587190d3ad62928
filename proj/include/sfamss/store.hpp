#pragma once

// Persistent, encrypted bank-side state: user/ATM records, the secret
// material (base polynomial, per-user r and session keys), and the
// append-only hash-chained audit log.
//
// On disk the store is a single image file, replaced atomically on save:
//
//   "SFST" | version | salt(16) | key_check(32)
//   | lp(secrets box) | lp(records box)
//   | audit_count(u32) | { seq(u64) | prev_hash(32) | lp(body box) }*
//
// Secrets and records are sealed wholesale under the storage key, so the raw
// file never contains plaintext coefficient, r or session-key bytes. Audit
// bodies are sealed individually; each record's prev_hash is the SHA-256 of
// the previous record's full stored bytes (genesis: 32 zero bytes), which
// makes any byte flip in the region land on a verifiable break.

#include <sys/file.h>
#include <sys/stat.h>
#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "sfamss/codec.hpp"
#include "sfamss/crypto.hpp"
#include "sfamss/shares.hpp"

namespace sfamss {

struct WrongKeyError : std::runtime_error {
  WrongKeyError() : std::runtime_error("store cannot be opened with this key") {}
};

struct CorruptImageError : std::runtime_error {
  explicit CorruptImageError(const std::string& what = "store image is corrupt")
      : std::runtime_error(what) {}
};

struct NotFoundError : std::runtime_error {
  explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

struct StorageFailureError : std::runtime_error {
  explicit StorageFailureError(const std::string& what) : std::runtime_error(what) {}
};

struct StoreLockedError : std::runtime_error {
  StoreLockedError() : std::runtime_error("store is locked by another handle") {}
};

enum class EntityStatus : std::uint8_t { ACTIVE = 1, LOCKED = 2 };

struct UserRecord {
  FieldElement user_id;
  Certificate certificate;
  FieldElement r_user;        // y of the anchor share (0, r)
  SessionKey session_key;
  std::uint64_t withdrawal_limit = 0;
  EntityStatus status = EntityStatus::ACTIVE;
  friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

struct AtmRecord {
  FieldElement atm_id;
  Certificate certificate;
  EntityStatus status = EntityStatus::ACTIVE;
  friend bool operator==(const AtmRecord&, const AtmRecord&) = default;
};

enum class AuditEvent : std::uint8_t {
  REGISTER_ATM = 1,
  REGISTER_USER = 2,
  AUTH_ACCEPT = 3,
  AUTH_REJECT = 4,
  AUTHZ_ALLOW = 5,
  AUTHZ_DENY = 6,
};

inline const char* audit_event_name(AuditEvent e) {
  switch (e) {
    case AuditEvent::REGISTER_ATM: return "REGISTER_ATM";
    case AuditEvent::REGISTER_USER: return "REGISTER_USER";
    case AuditEvent::AUTH_ACCEPT: return "AUTH_ACCEPT";
    case AuditEvent::AUTH_REJECT: return "AUTH_REJECT";
    case AuditEvent::AUTHZ_ALLOW: return "AUTHZ_ALLOW";
    case AuditEvent::AUTHZ_DENY: return "AUTHZ_DENY";
  }
  return "?";
}

struct AuditRecord {
  std::uint64_t seq = 0;
  std::uint64_t timestamp_ms = 0;
  AuditEvent event = AuditEvent::REGISTER_ATM;
  std::uint8_t reason_raw = 0;
  FieldElement user_id;
  FieldElement atm_id;
  Bytes evidence;
  Digest prev_hash{};
  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

// Evidence payload of authentication records: the signed bytes and the user's
// signature, so acceptance can be re-verified later from the log alone.
inline Bytes audit_evidence(ByteView signed_bytes, const Signature& sig) {
  ByteWriter w;
  w.lp_bytes(signed_bytes);
  w.lp_bytes(sig.bytes);
  return w.take();
}

inline std::pair<Bytes, Signature> audit_evidence_parse(ByteView evidence) {
  ByteReader r(evidence);
  Bytes signed_bytes = r.lp_bytes();
  Signature sig{r.lp_bytes()};
  return {signed_bytes, sig};
}

struct StoreSecrets {
  std::uint64_t modulus = 0;
  Polynomial base_poly;
  std::uint64_t next_id = 1;
  std::set<std::uint64_t> assigned_ids;
  std::string deployment_id;
  friend bool operator==(const StoreSecrets&, const StoreSecrets&) = default;
};

namespace storedetail {

inline constexpr std::uint8_t kStoreMagic[4] = {'S', 'F', 'S', 'T'};
inline constexpr std::uint8_t kStoreVersion = 0x01;

inline Bytes serialize_secrets(const StoreSecrets& s) {
  ByteWriter w;
  w.u64_be(s.modulus);
  for (const auto& c : s.base_poly.coeffs) w.u64_be(c.value);
  w.u64_be(s.next_id);
  w.u32_be(static_cast<std::uint32_t>(s.assigned_ids.size()));
  for (std::uint64_t id : s.assigned_ids) w.u64_be(id);
  w.lp_bytes(to_bytes(s.deployment_id));
  return w.take();
}

inline StoreSecrets parse_secrets(ByteView b) {
  ByteReader r(b);
  StoreSecrets s;
  s.modulus = r.u64_be();
  for (auto& c : s.base_poly.coeffs) c.value = r.u64_be();
  s.next_id = r.u64_be();
  std::uint32_t n = r.u32_be();
  for (std::uint32_t i = 0; i < n; ++i) s.assigned_ids.insert(r.u64_be());
  Bytes id = r.lp_bytes();
  s.deployment_id.assign(id.begin(), id.end());
  if (!r.empty()) throw CorruptImageError("trailing bytes in secrets blob");
  return s;
}

inline void put_user(ByteWriter& w, const UserRecord& u) {
  w.u64_be(u.user_id.value);
  w.lp_bytes(certificate_encode(u.certificate));
  w.u64_be(u.r_user.value);
  w.raw(ByteView(u.session_key.bytes));
  w.u64_be(u.withdrawal_limit);
  w.u8(static_cast<std::uint8_t>(u.status));
}

inline UserRecord get_user(ByteReader& r) {
  UserRecord u;
  u.user_id.value = r.u64_be();
  u.certificate = certificate_decode(r.lp_bytes());
  u.r_user.value = r.u64_be();
  Bytes key = r.raw(32);
  std::copy(key.begin(), key.end(), u.session_key.bytes.begin());
  u.withdrawal_limit = r.u64_be();
  u.status = static_cast<EntityStatus>(r.u8());
  return u;
}

inline void put_atm(ByteWriter& w, const AtmRecord& a) {
  w.u64_be(a.atm_id.value);
  w.lp_bytes(certificate_encode(a.certificate));
  w.u8(static_cast<std::uint8_t>(a.status));
}

inline AtmRecord get_atm(ByteReader& r) {
  AtmRecord a;
  a.atm_id.value = r.u64_be();
  a.certificate = certificate_decode(r.lp_bytes());
  a.status = static_cast<EntityStatus>(r.u8());
  return a;
}

inline Bytes serialize_audit_body(const AuditRecord& rec) {
  ByteWriter w;
  w.u64_be(rec.timestamp_ms);
  w.u8(static_cast<std::uint8_t>(rec.event));
  w.u8(rec.reason_raw);
  w.u64_be(rec.user_id.value);
  w.u64_be(rec.atm_id.value);
  w.lp_bytes(rec.evidence);
  return w.take();
}

inline void parse_audit_body(ByteView b, AuditRecord& rec) {
  ByteReader r(b);
  rec.timestamp_ms = r.u64_be();
  rec.event = static_cast<AuditEvent>(r.u8());
  rec.reason_raw = r.u8();
  rec.user_id.value = r.u64_be();
  rec.atm_id.value = r.u64_be();
  rec.evidence = r.lp_bytes();
  if (!r.empty()) throw CorruptImageError("trailing bytes in audit body");
}

inline Bytes box_bytes(const SealedBox& b) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(b.mode));
  w.raw(b.ciphertext);
  return w.take();
}

inline SealedBox box_from_bytes(ByteView b) {
  if (b.empty()) throw CorruptImageError("empty box");
  SealedBox box;
  box.mode = static_cast<SealMode>(b[0]);
  if (box.mode != SealMode::SYMMETRIC && box.mode != SealMode::PUBLIC_KEY)
    throw CorruptImageError("bad box mode");
  box.ciphertext.assign(b.begin() + 1, b.end());
  return box;
}

// RAII advisory lock; one writer handle per store file.
class FileLock {
 public:
  FileLock() = default;

  explicit FileLock(const std::string& path) : path_(path + ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR, 0600);
    if (fd_ < 0) throw StorageFailureError("cannot create lock file " + path_);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw StoreLockedError();
    }
  }

  FileLock(FileLock&& other) noexcept : path_(std::move(other.path_)), fd_(other.fd_) {
    other.fd_ = -1;
  }

  FileLock& operator=(FileLock&& other) noexcept {
    release();
    path_ = std::move(other.path_);
    fd_ = other.fd_;
    other.fd_ = -1;
    return *this;
  }

  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

  ~FileLock() { release(); }

 private:
  void release() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
      fd_ = -1;
    }
  }

  std::string path_;
  int fd_ = -1;
};

inline void write_file_durable(const std::string& path, ByteView data) {
  std::string tmp = path + ".tmp";
  int fd = ::open(tmp.c_str(), O_CREAT | O_TRUNC | O_WRONLY, 0600);
  if (fd < 0) throw StorageFailureError("cannot open " + tmp);
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n <= 0) {
      ::close(fd);
      throw StorageFailureError("short write to " + tmp);
    }
    off += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw StorageFailureError("rename failed: " + ec.message());
}

inline Bytes read_file(const std::string& path) {
  int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw StorageFailureError("cannot open " + path);
  Bytes out;
  std::uint8_t buf[65536];
  ssize_t n;
  while ((n = ::read(fd, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + n);
  ::close(fd);
  if (n < 0) throw StorageFailureError("read failed for " + path);
  return out;
}

}  // namespace storedetail

class Store {
 public:
  struct ChainStatus {
    bool ok = true;
    std::uint64_t broken_seq = 0;  // first record whose chain/content check fails
  };

  static Store create(const std::string& path, const SessionKey& storage_key,
                      std::shared_ptr<CryptoBackend> backend, StoreSecrets secrets) {
    Store s(path, storage_key, std::move(backend));
    s.secrets_ = std::move(secrets);
    s.salt_ = s.backend_->generate_session_key();  // 32 random bytes; first 16 used
    s.save();
    return s;
  }

  static Store open(const std::string& path, const SessionKey& storage_key,
                    std::shared_ptr<CryptoBackend> backend) {
    Store s(path, storage_key, std::move(backend));
    s.load();
    return s;
  }

  Store(Store&&) = default;
  Store& operator=(Store&&) = default;

  const std::string& path() const { return path_; }

  StoreSecrets& secrets() { return secrets_; }
  const StoreSecrets& secrets() const { return secrets_; }

  void upsert_user(const UserRecord& u) { users_[u.user_id.value] = u; }
  void upsert_atm(const AtmRecord& a) { atms_[a.atm_id.value] = a; }

  bool has_user(FieldElement id) const { return users_.count(id.value) != 0; }
  bool has_atm(FieldElement id) const { return atms_.count(id.value) != 0; }

  const UserRecord& get_user(FieldElement id) const {
    auto it = users_.find(id.value);
    if (it == users_.end()) throw NotFoundError("unknown user id");
    return it->second;
  }

  const AtmRecord& get_atm(FieldElement id) const {
    auto it = atms_.find(id.value);
    if (it == atms_.end()) throw NotFoundError("unknown atm id");
    return it->second;
  }

  const std::map<std::uint64_t, UserRecord>& users() const { return users_; }
  const std::map<std::uint64_t, AtmRecord>& atms() const { return atms_; }

  std::uint64_t audit_count() const { return audit_count_; }

  // Appends, encrypts, chains and persists one audit record. Durable before
  // return: the whole image is rewritten through the atomic-rename path.
  const AuditRecord& append_audit(std::uint64_t timestamp_ms, AuditEvent event,
                                  std::uint8_t reason_raw, FieldElement user_id,
                                  FieldElement atm_id, Bytes evidence) {
    using namespace storedetail;
    if (!audit_intact_) throw CorruptImageError("refusing to append to a broken audit chain");
    AuditRecord rec;
    rec.seq = audit_count_ + 1;
    rec.timestamp_ms = timestamp_ms;
    rec.event = event;
    rec.reason_raw = reason_raw;
    rec.user_id = user_id;
    rec.atm_id = atm_id;
    rec.evidence = std::move(evidence);
    rec.prev_hash = last_digest_;

    SealedBox body = backend_->seal_symmetric(storage_key_, serialize_audit_body(rec));
    ByteWriter w;
    w.u64_be(rec.seq);
    w.raw(ByteView(rec.prev_hash));
    w.lp_bytes(box_bytes(body));
    Bytes stored = w.take();

    last_digest_ = sha256(stored);
    audit_raw_.insert(audit_raw_.end(), stored.begin(), stored.end());
    ++audit_count_;
    audit_plain_.push_back(rec);
    save();
    return audit_plain_.back();
  }

  // Walks the raw (still-encrypted) audit region: sequence must be gapless,
  // every prev_hash must equal the digest of the previous stored record, and
  // every body must decrypt under the storage key. Reports the first break.
  ChainStatus verify_audit_chain() const {
    using namespace storedetail;
    ByteReader r(audit_raw_);
    Digest prev{};
    std::vector<std::pair<std::uint64_t, Bytes>> bodies;
    for (std::uint64_t i = 1; i <= audit_count_; ++i) {
      Bytes stored;
      std::uint64_t seq;
      Digest ph;
      try {
        ByteWriter w;
        seq = r.u64_be();
        Bytes hash = r.raw(32);
        std::copy(hash.begin(), hash.end(), ph.begin());
        Bytes body = r.lp_bytes();
        w.u64_be(seq);
        w.raw(hash);
        w.lp_bytes(body);
        stored = w.take();
        bodies.emplace_back(i, body);
      } catch (const ByteReaderError&) {
        return {false, i};
      }
      if (seq != i) return {false, i};
      if (ph != prev) return {false, i};
      prev = sha256(stored);
    }
    if (!r.empty()) return {false, audit_count_ + 1};
    for (auto& [seq, body] : bodies) {
      try {
        AuditRecord rec;
        parse_audit_body(backend_->open_symmetric(storage_key_, box_from_bytes(body)), rec);
      } catch (...) {
        return {false, seq};
      }
    }
    return {true, 0};
  }

  std::vector<AuditRecord> read_audit() const {
    if (!audit_intact_) throw CorruptImageError("audit region does not verify");
    return audit_plain_;
  }

  void save() {
    using namespace storedetail;
    ByteWriter w;
    w.raw(ByteView(kStoreMagic, 4));
    w.u8(kStoreVersion);
    w.raw(ByteView(salt_.bytes.data(), 16));
    w.raw(ByteView(key_check()));

    w.lp_bytes(box_bytes(backend_->seal_symmetric(storage_key_, serialize_secrets(secrets_))));

    ByteWriter recs;
    recs.u32_be(static_cast<std::uint32_t>(users_.size()));
    for (const auto& [id, u] : users_) put_user(recs, u);
    recs.u32_be(static_cast<std::uint32_t>(atms_.size()));
    for (const auto& [id, a] : atms_) put_atm(recs, a);
    w.lp_bytes(box_bytes(backend_->seal_symmetric(storage_key_, recs.bytes())));

    w.u32_be(static_cast<std::uint32_t>(audit_count_));
    w.raw(audit_raw_);

    write_file_durable(path_, w.bytes());
  }

  // Byte range [begin, end) of the audit region inside an image, for
  // tamper-evidence checks that flip raw file bytes.
  static std::pair<std::size_t, std::size_t> audit_region(ByteView image) {
    using namespace storedetail;
    ByteReader r(image);
    try {
      r.raw(4 + 1 + 16 + 32);
      r.lp_bytes();
      r.lp_bytes();
      std::size_t begin = image.size() - r.remaining();
      return {begin, image.size()};
    } catch (const ByteReaderError&) {
      throw CorruptImageError("image header unparsable");
    }
  }

 private:
  Store(std::string path, const SessionKey& key, std::shared_ptr<CryptoBackend> backend)
      : path_(std::move(path)),
        storage_key_(key),
        backend_(std::move(backend)),
        lock_(path_) {}

  Digest key_check() const {
    Bytes salted = to_bytes("sfst.check");
    salted.insert(salted.end(), salt_.bytes.begin(), salt_.bytes.begin() + 16);
    return hmac_sha256(ByteView(storage_key_.bytes), salted);
  }

  void load() {
    using namespace storedetail;
    Bytes image = read_file(path_);
    ByteReader r(image);
    try {
      Bytes magic = r.raw(4);
      if (std::memcmp(magic.data(), kStoreMagic, 4) != 0)
        throw CorruptImageError("bad store magic");
      if (r.u8() != kStoreVersion) throw CorruptImageError("unsupported store version");
      Bytes salt = r.raw(16);
      std::copy(salt.begin(), salt.end(), salt_.bytes.begin());
      Bytes check = r.raw(32);
      Digest expect = key_check();
      if (!std::equal(expect.begin(), expect.end(), check.begin())) throw WrongKeyError();

      Bytes secrets_blob, records_blob;
      try {
        secrets_blob = backend_->open_symmetric(storage_key_, box_from_bytes(r.lp_bytes()));
        records_blob = backend_->open_symmetric(storage_key_, box_from_bytes(r.lp_bytes()));
      } catch (const OpenFailedError&) {
        throw CorruptImageError("store blobs fail authentication");
      }
      secrets_ = parse_secrets(secrets_blob);

      ByteReader rr(records_blob);
      std::uint32_t nu = rr.u32_be();
      for (std::uint32_t i = 0; i < nu; ++i) {
        UserRecord u = storedetail::get_user(rr);
        users_[u.user_id.value] = u;
      }
      std::uint32_t na = rr.u32_be();
      for (std::uint32_t i = 0; i < na; ++i) {
        AtmRecord a = storedetail::get_atm(rr);
        atms_[a.atm_id.value] = a;
      }
      if (!rr.empty()) throw CorruptImageError("trailing bytes in records blob");

      audit_count_ = r.u32_be();
      audit_raw_ = r.raw(r.remaining());
      load_audit_plain();
    } catch (const ByteReaderError&) {
      throw CorruptImageError("truncated store image");
    } catch (const CodecException&) {
      throw CorruptImageError("malformed record encoding");
    }
  }

  // Tolerant of a damaged audit region: the handle still opens so that
  // verify_audit_chain can point at the break; reads and appends then refuse.
  void load_audit_plain() {
    using namespace storedetail;
    audit_plain_.clear();
    last_digest_ = Digest{};
    audit_intact_ = true;
    ByteReader r(audit_raw_);
    try {
      for (std::uint64_t i = 1; i <= audit_count_; ++i) {
        ByteWriter w;
        std::uint64_t seq = r.u64_be();
        Bytes hash = r.raw(32);
        Bytes body = r.lp_bytes();
        w.u64_be(seq);
        w.raw(hash);
        w.lp_bytes(body);

        AuditRecord rec;
        parse_audit_body(backend_->open_symmetric(storage_key_, box_from_bytes(body)), rec);
        rec.seq = seq;
        std::copy(hash.begin(), hash.end(), rec.prev_hash.begin());
        audit_plain_.push_back(rec);
        last_digest_ = sha256(w.bytes());
      }
      if (!r.empty()) audit_intact_ = false;
    } catch (...) {
      audit_intact_ = false;
      audit_plain_.clear();
    }
  }

  std::string path_;
  SessionKey storage_key_;
  std::shared_ptr<CryptoBackend> backend_;
  storedetail::FileLock lock_;
  SessionKey salt_;  // 16 bytes used
  StoreSecrets secrets_;
  std::map<std::uint64_t, UserRecord> users_;
  std::map<std::uint64_t, AtmRecord> atms_;
  Bytes audit_raw_;
  std::vector<AuditRecord> audit_plain_;
  std::uint64_t audit_count_ = 0;
  Digest last_digest_{};
  bool audit_intact_ = true;
};

}  // namespace sfamss
