#include <gtest/gtest.h>

#include "twofe/bytes.hpp"
#include "twofe/error.hpp"
#include "twofe/hashing.hpp"
#include "oracles.hpp"

namespace twofe {
namespace {

TEST(Bytes, HexRoundTrip) {
  const Bytes b{0x00, 0x7f, 0xff, 0x10};
  EXPECT_EQ(to_hex(b), "007fff10");
  EXPECT_EQ(from_hex("007FFF10"), b);
  EXPECT_THROW(from_hex("abc"), Error);
  EXPECT_THROW(from_hex("zz"), Error);
}

TEST(Bytes, WriterReaderRoundTrip) {
  ByteWriter w;
  w.u8(1).u16(0x0203).u32(0x04050607).u64(0x08090a0b0c0d0e0fULL).field(to_bytes("hello")).raw(Bytes{9});
  const Bytes out = w.take();
  ByteReader r(out);
  EXPECT_EQ(r.u8(), 1);
  EXPECT_EQ(r.u16(), 0x0203);
  EXPECT_EQ(r.u32(), 0x04050607u);
  EXPECT_EQ(r.u64(), 0x08090a0b0c0d0e0fULL);
  EXPECT_EQ(r.field_string(), "hello");
  EXPECT_EQ(r.u8(), 9);
  EXPECT_TRUE(r.done());
}

TEST(Bytes, ReaderRejectsTruncation) {
  const Bytes out{0, 0, 0, 5, 'a'};
  ByteReader r(out);
  try {
    r.field();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_encoding);
  }
}

TEST(Bytes, ConstantTimeEqual) {
  EXPECT_TRUE(constant_time_equal(Bytes{1, 2}, Bytes{1, 2}));
  EXPECT_FALSE(constant_time_equal(Bytes{1, 2}, Bytes{1, 3}));
  EXPECT_FALSE(constant_time_equal(Bytes{1, 2}, Bytes{1}));
}

TEST(Hashing, FrameIsInjectiveOverSplits) {
  const Bytes ab = to_bytes("ab"), a = to_bytes("a"), b = to_bytes("b");
  const std::array<ByteView, 1> one{ab};
  const std::array<ByteView, 2> two{a, b};
  EXPECT_NE(frame("T", one), frame("T", two));
}

TEST(Hashing, CommitGoldenAllZero) {
  const Bytes zero(32, 0);
  EXPECT_EQ(to_hex(commit(zero)), testing::golden("commit_zero"));
}

TEST(Hashing, CommitBindsEveryBit) {
  Bytes s0(32, 0x5a);
  const Commitment c = commit(s0);
  EXPECT_TRUE(verify_commitment(c, s0));
  for (std::size_t bit = 0; bit < 256; ++bit) {
    Bytes flipped = s0;
    flipped[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    EXPECT_FALSE(verify_commitment(c, flipped));
  }
}

TEST(Hashing, CommitRejectsWrongLength) {
  try {
    commit(Bytes(31, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::bad_length);
  }
}

TEST(Errors, CodesAndNames) {
  EXPECT_EQ(error_name(ErrorCode::policy_denied), "policy-denied");
  EXPECT_EQ(exit_code(ErrorCode::bad_proof), 21);
  Error e(ErrorCode::tag_exists, "t");
  EXPECT_EQ(e.code(), ErrorCode::tag_exists);
}

}  // namespace
}  // namespace twofe
