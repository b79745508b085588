#include <gtest/gtest.h>

#include <set>

#include "twofe/random.hpp"
#include "twofe/ristretto.hpp"
#include "twofe/toy_group.hpp"
#include "oracles.hpp"

namespace twofe {
namespace {

using Scalar = Ristretto255::Scalar;
using Element = Ristretto255::Element;

TEST(Ristretto, ScalarEncodingRoundTripsAndIsBigEndian) {
  const Scalar one = Scalar::one();
  Bytes expected(32, 0);
  expected[31] = 1;
  EXPECT_EQ(one.encode(), expected);
  for (int i = 0; i < 200; ++i) {
    const Scalar s = Scalar::random();
    EXPECT_EQ(Scalar::decode(s.encode()), s);
  }
}

TEST(Ristretto, ScalarDecodeRejectsNonCanonical) {
  // l itself, big-endian.
  const Bytes order = from_hex("1000000000000000000000000000000014def9dea2f79cd65812631a5cf5d3ed");
  EXPECT_THROW(Scalar::decode(order), Error);
  EXPECT_THROW(Scalar::decode(Bytes(32, 0xff)), Error);
  EXPECT_THROW(Scalar::decode(Bytes(31, 0)), Error);
  Bytes below = order;
  below[31] -= 1;
  EXPECT_EQ(Scalar::decode(below) + Scalar::one(), Scalar::zero());
}

TEST(Ristretto, ScalarFieldIdentities) {
  for (int i = 0; i < 200; ++i) {
    const Scalar a = Scalar::random(), b = Scalar::random();
    EXPECT_EQ((a + b) + (-b), a);
    EXPECT_EQ(a - a, Scalar::zero());
    EXPECT_EQ(a * Scalar::one(), a);
  }
  EXPECT_EQ(Scalar::from_u64(6) * Scalar::from_u64(7), Scalar::from_u64(42));
}

TEST(Ristretto, ThousandDrawsDistinct) {
  std::set<Bytes> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(Scalar::random().encode());
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(Ristretto, ScalarByteFrequencyChiSquare) {
  DeterministicRandom rng(0x5ca1a5);
  std::array<std::uint64_t, 256> counts{};
  for (int i = 0; i < 100000; ++i) {
    const Bytes e = Scalar::random().encode();
    // The top byte is biased by the modulus (l < 2^253); skip it.
    for (std::size_t j = 1; j < e.size(); ++j) ++counts[e[j]];
  }
  EXPECT_GT(testing::chi_square_uniform_p(counts), 0.01);
}

TEST(Ristretto, ElementArithmetic) {
  const Element g = Element::base();
  const Scalar a = Scalar::random(), b = Scalar::random();
  EXPECT_EQ(a * g + b * g, (a + b) * g);
  EXPECT_EQ(a * (b * g), (a * b) * g);
  EXPECT_TRUE((Scalar::zero() * g).is_identity());
  EXPECT_EQ(Element::decode((a * g).encode()), a * g);
  EXPECT_EQ(g - g, Element::identity());
}

TEST(Ristretto, ElementDecodeRejectsInvalid) {
  Bytes bad(32, 0xff);
  EXPECT_THROW(Element::decode(bad), Error);
  EXPECT_THROW(Element::decode(Bytes(31, 0)), Error);
  EXPECT_TRUE(Element::decode(Bytes(32, 0)).is_identity());
}

TEST(Ristretto, HashToGroupDeterministicDistinctAndValid) {
  Ristretto255 group;
  EXPECT_EQ(group.hash_to_group(to_bytes("a")), group.hash_to_group(to_bytes("a")));
  EXPECT_NE(group.hash_to_group(to_bytes("a")), group.hash_to_group(to_bytes("b")));
  EXPECT_THROW(group.hash_to_group(Bytes{}), Error);
  for (int i = 0; i < 10000; ++i) {
    const Bytes in = random_vector(1 + i % 48);
    const Element e = group.hash_to_group(in);
    EXPECT_FALSE(e.is_identity());
    ASSERT_EQ(Element::decode(e.encode()), e);
  }
}

TEST(Ristretto, HashToScalarGoldenAndFraming) {
  Ristretto255 group;
  const Bytes a = to_bytes("a"), bc = to_bytes("bc"), ab = to_bytes("ab"), c = to_bytes("c");
  const std::array<ByteView, 2> p1{a, bc};
  EXPECT_EQ(to_hex(group.hash_to_scalar("2FE-NIZK", p1).encode()), testing::golden("hash_to_scalar_abc"));
  EXPECT_EQ(to_hex(group.hash_to_scalar("2FE-NIZK", {}).encode()), testing::golden("hash_to_scalar_empty"));

  const std::array<ByteView, 2> split{ab, c};
  const std::array<ByteView, 2> swapped{bc, a};
  EXPECT_NE(group.hash_to_scalar("2FE-NIZK", p1), group.hash_to_scalar("2FE-NIZK", split));
  EXPECT_NE(group.hash_to_scalar("2FE-NIZK", p1), group.hash_to_scalar("2FE-NIZK", swapped));
  EXPECT_NE(group.hash_to_scalar("2FE-NIZK", p1), group.hash_to_scalar("2FE-KDF", p1));
}

TEST(ToyGroup, ArithmeticMod101) {
  using S = ToyGroup::Scalar;
  using E = ToyGroup::Element;
  ToyGroup g;
  EXPECT_EQ((S(7) * g.generator()).value(), 7u);
  EXPECT_EQ((S(7) * E(13)).value(), 91u);
  EXPECT_EQ((S(4) + S(7)).value(), 11u);
  EXPECT_EQ((-S(4)).value(), 97u);
  EXPECT_EQ(S::decode(S(100).encode()).value(), 100u);
  EXPECT_THROW(S::decode(Bytes{101}), Error);
  EXPECT_FALSE(g.hash_to_group(to_bytes("x")).is_identity());
}

}  // namespace
}  // namespace twofe
