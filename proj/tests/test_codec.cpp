#include <catch2/catch.hpp>

#include <map>

#include "sfamss/codec.hpp"
#include "sfamss/sim_backend.hpp"

using namespace sfamss;

namespace {

Bytes rand_bytes(RandomSource& rng, std::size_t max_len) {
  return rng.bytes(rng.below(max_len + 1));
}

Signature rand_sig(RandomSource& rng) { return Signature{rand_bytes(rng, 80)}; }

SealedBox rand_box(RandomSource& rng) {
  SealedBox b;
  b.mode = rng.below(2) == 0 ? SealMode::PUBLIC_KEY : SealMode::SYMMETRIC;
  b.ciphertext = rand_bytes(rng, 120);
  return b;
}

Certificate rand_cert(RandomSource& rng) {
  Certificate c;
  c.subject_id.value = rng.next_u64();
  c.role = static_cast<Role>(rng.below(4));
  c.subject_public = rand_bytes(rng, 64);
  c.issuer_id.value = rng.next_u64();
  c.issuer_signature = rand_sig(rng);
  return c;
}

Message random_message(RandomSource& rng) {
  switch (rng.below(13)) {
    case 0: return M1AtmAssignId{{rng.next_u64()}};
    case 1: return M2AtmRegisterRequest{{rng.next_u64()}, rand_cert(rng)};
    case 2: return M3AtmRegisterResponse{rand_box(rng)};
    case 3: return M4UserAssignId{{rng.next_u64()}};
    case 4: return M5UserRegisterRequest{{rng.next_u64()}, rand_cert(rng), rand_box(rng)};
    case 5: return M6UserRegisterResponse{rand_box(rng)};
    case 6: return M7UserAuthRequest{{rng.next_u64()}, rng.next_u64(), rand_sig(rng), rand_box(rng)};
    case 7: return M8CertFetch{{rng.next_u64()}};
    case 8: return M8RCertFetchReply{rand_cert(rng)};
    case 9:
      return M9BankAuthRequest{{rng.next_u64()}, {rng.next_u64()}, rng.next_u64(), rand_sig(rng),
                               rand_box(rng),    rand_box(rng)};
    case 10: {
      M10AuthDecision m;
      m.user_id.value = rng.next_u64();
      m.atm_id.value = rng.next_u64();
      m.t_s = rng.next_u64();
      m.accepted_raw = static_cast<std::uint8_t>(rng.below(256));
      m.reason_raw = static_cast<std::uint8_t>(rng.below(256));
      m.bank_signature = rand_sig(rng);
      return m;
    }
    case 11: return AuthzRequest{{rng.next_u64()}, {rng.next_u64()}, rng.next_u64()};
    default: {
      AuthzDecision m;
      m.user_id.value = rng.next_u64();
      m.atm_id.value = rng.next_u64();
      m.amount = rng.next_u64();
      m.allowed_raw = static_cast<std::uint8_t>(rng.below(256));
      m.reason_raw = static_cast<std::uint8_t>(rng.below(256));
      m.bank_signature = rand_sig(rng);
      return m;
    }
  }
}

CodecError decode_error_kind(const Bytes& frame) {
  try {
    decode(frame);
    FAIL("decode unexpectedly succeeded");
  } catch (const CodecException& e) {
    return e.kind;
  }
  return CodecError::BadMagic;  // unreachable
}

}  // namespace

TEST_CASE("golden frame: M1 with atm_id 5", "[codec]") {
  Bytes frame = encode(M1AtmAssignId{{5}});
  const std::uint8_t expected[] = {0x53, 0x46, 0x41, 0x4D, 0x01, 0x01,
                                   0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x05};
  REQUIRE(frame.size() == sizeof expected);
  CHECK(std::equal(frame.begin(), frame.end(), expected));

  Message back = decode(frame);
  REQUIRE(std::holds_alternative<M1AtmAssignId>(back));
  CHECK(std::get<M1AtmAssignId>(back).atm_id.value == 5);
}

TEST_CASE("decode/encode identity over a randomized corpus", "[codec][property]") {
  SeededRandom rng(2024);
  for (int i = 0; i < 3000; ++i) {
    Message m = random_message(rng);
    Bytes frame = encode(m);
    Message back = decode(frame);
    REQUIRE(back == m);
    CHECK(encode(back) == frame);
  }
}

TEST_CASE("encoding is injective over a randomized corpus", "[codec][property]") {
  SeededRandom rng(77);
  std::map<Bytes, Message> seen;
  for (int i = 0; i < 3000; ++i) {
    Message m = random_message(rng);
    Bytes frame = encode(m);
    auto [it, inserted] = seen.emplace(frame, m);
    if (!inserted) REQUIRE(it->second == m);
  }
}

TEST_CASE("each decode error kind is reachable and distinct", "[codec]") {
  Bytes valid = encode(M7UserAuthRequest{{9}, 1234, Signature{{1, 2, 3}}, SealedBox{SealMode::SYMMETRIC, {4, 5}}});

  SECTION("BadMagic") {
    Bytes b = valid;
    b[0] ^= 0xFF;
    CHECK(decode_error_kind(b) == CodecError::BadMagic);
    CHECK(decode_error_kind(Bytes{}) == CodecError::BadMagic);
  }
  SECTION("BadVersion") {
    Bytes b = valid;
    b[4] = 0x02;
    CHECK(decode_error_kind(b) == CodecError::BadVersion);
  }
  SECTION("UnknownType") {
    Bytes b = valid;
    b[5] = 0x7F;
    CHECK(decode_error_kind(b) == CodecError::UnknownType);
  }
  SECTION("Truncated") {
    Bytes b = valid;
    b.pop_back();
    CHECK(decode_error_kind(b) == CodecError::Truncated);
    CHECK(decode_error_kind(Bytes(valid.begin(), valid.begin() + 5)) == CodecError::Truncated);
  }
  SECTION("TrailingBytes") {
    Bytes b = valid;
    b.push_back(0x00);
    CHECK(decode_error_kind(b) == CodecError::TrailingBytes);
  }
  SECTION("OversizeField") {
    // length prefix claims 2 MiB for the signature
    Bytes b(Bytes{0x53, 0x46, 0x41, 0x4D, 0x01, 0x07});
    ByteWriter w;
    w.u64_be(9);
    w.u64_be(1234);
    w.u32_be(2u << 20);
    Bytes payload = w.take();
    b.insert(b.end(), payload.begin(), payload.end());
    CHECK(decode_error_kind(b) == CodecError::OversizeField);
  }
}

TEST_CASE("oversize frames are rejected on both paths", "[codec]") {
  M3AtmRegisterResponse big;
  big.sealed_d_atm.mode = SealMode::SYMMETRIC;
  big.sealed_d_atm.ciphertext.resize(kMaxFrameBytes + 1);
  CHECK_THROWS_AS(encode(Message{big}), CodecException);

  Bytes oversized(kMaxFrameBytes + 1, 0x00);
  CHECK(decode_error_kind(oversized) == CodecError::OversizeField);
}

TEST_CASE("signing bytes cover exactly the signed fields", "[codec]") {
  M7UserAuthRequest m7{{9}, 0x0102030405060708ull, Signature{{0xAA}}, SealedBox{}};
  Bytes sb = signing_bytes(Message{m7});
  REQUIRE(sb.size() == 16);
  CHECK(sb[7] == 9);
  CHECK(sb[8] == 0x01);
  CHECK(sb[15] == 0x08);
  CHECK(sb == auth_signing_bytes({9}, 0x0102030405060708ull));

  // M9 forwards the user's signature, so its signing bytes equal M7's.
  M9BankAuthRequest m9;
  m9.user_id = {9};
  m9.t_s = 0x0102030405060708ull;
  CHECK(signing_bytes(Message{m9}) == sb);

  M10AuthDecision m10;
  m10.user_id = {9};
  m10.atm_id = {5};
  m10.t_s = 7;
  m10.accepted_raw = 1;
  m10.reason_raw = 0;
  Bytes sb10 = signing_bytes(Message{m10});
  REQUIRE(sb10.size() == 26);
  CHECK(sb10[24] == 1);

  CHECK_THROWS_AS(signing_bytes(Message{M1AtmAssignId{{1}}}), NotSignableError);
  CHECK_THROWS_AS(signing_bytes(Message{M8CertFetch{{1}}}), NotSignableError);
}

TEST_CASE("signing bytes are invariant under decode/encode round trips", "[codec][property]") {
  SeededRandom rng(555);
  for (int i = 0; i < 500; ++i) {
    Message m = random_message(rng);
    MsgType t = message_type(m);
    if (t != MsgType::M7_USER_AUTH_REQUEST && t != MsgType::M9_BANK_AUTH_REQUEST &&
        t != MsgType::M10_AUTH_DECISION && t != MsgType::AUTHZ_DECISION)
      continue;
    CHECK(signing_bytes(decode(encode(m))) == signing_bytes(m));
  }
}

TEST_CASE("random-byte fuzzing of decode never crashes", "[codec][fuzz]") {
  SeededRandom rng(31337);
  int decoded = 0, rejected = 0;
  for (int i = 0; i < 20000; ++i) {
    Bytes junk = rng.bytes(rng.below(64));
    if (rng.below(4) == 0) {
      // bias towards plausible prefixes so inner paths get exercised
      Bytes prefixed = {0x53, 0x46, 0x41, 0x4D, 0x01,
                        static_cast<std::uint8_t>(1 + rng.below(13))};
      prefixed.insert(prefixed.end(), junk.begin(), junk.end());
      junk = prefixed;
    }
    try {
      decode(junk);
      ++decoded;
    } catch (const CodecException&) {
      ++rejected;
    }
  }
  CHECK(rejected > 0);
}
