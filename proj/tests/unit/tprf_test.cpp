#include <gtest/gtest.h>

#include <set>

#include "twofe/random.hpp"
#include "twofe/ristretto.hpp"
#include "twofe/toy_group.hpp"
#include "twofe/tprf.hpp"
#include "oracles.hpp"

namespace twofe {
namespace {

using S = ToyGroup::Scalar;
using E = ToyGroup::Element;
using Scalar = Ristretto255::Scalar;

PrfInput sample_input() {
  Bytes tag(16), seed(32);
  for (int i = 0; i < 16; ++i) tag[i] = static_cast<std::uint8_t>(i);
  for (int i = 0; i < 32; ++i) seed[i] = static_cast<std::uint8_t>(32 + i);
  return PrfInput::from(tag, seed);
}

ToyGroup toy_with_h13() {
  ToyGroup g;
  g.hash_to_group_stub = [](ByteView) { return E(13); };
  return g;
}

TEST(Tprf, InputLayoutGolden) {
  EXPECT_EQ(to_hex(sample_input().bytes()), testing::golden("prf_input"));
}

TEST(Tprf, ToyWorkedExample) {
  const ToyGroup g = toy_with_h13();
  const PrfInput x = sample_input();
  const auto resp = tprf_respond(g, x, S(7));
  EXPECT_EQ(resp.blinded.value(), 91u);
  const DerivedKey k = tprf_finish(g, x, S(4), S(7) * g.generator(), resp);
  EXPECT_EQ(k, tprf_oracle(g, x, S(11)));
  EXPECT_EQ(to_hex(k.bytes()), testing::golden("kdf_toy_42"));
}

TEST(Tprf, ToyZeroShares) {
  const ToyGroup g = toy_with_h13();
  const PrfInput x = sample_input();
  const auto resp = tprf_respond(g, x, S(0));
  EXPECT_TRUE(resp.blinded.is_identity());
  EXPECT_EQ(tprf_finish(g, x, S(9), E(0), resp), tprf_oracle(g, x, S(9)));
  const auto r2 = tprf_respond(g, x, S(7));
  EXPECT_EQ(tprf_finish(g, x, S(0), E(7), r2), prf_output<ToyGroup>(x, E(91)));
}

// Over Z_101 a random-oracle challenge collides with probability 1/101, so
// a sweep of 100 wrong shares would expect about one false accept. The sweep
// therefore uses a challenge that is injective in the public key slot, which
// isolates what is under test: the verifier binds the enrolled pk.
ToyGroup toy_with_binding_challenge() {
  ToyGroup g = toy_with_h13();
  g.hash_to_scalar_stub = [](std::string_view, std::span<const ByteView> parts) {
    return S(parts[1][0]);
  };
  return g;
}

TEST(Tprf, ToyExhaustiveWrongShareDetected) {
  const ToyGroup g = toy_with_binding_challenge();
  {
    const auto honest = tprf_respond(g, sample_input(), S(7));
    EXPECT_NO_THROW(tprf_finish(g, sample_input(), S(4), E(7), honest));
  }
  const PrfInput x = sample_input();
  const S kd(7);
  const E pk = kd * g.generator();
  int detected = 0;
  for (std::uint32_t v = 0; v < 101; ++v) {
    if (v == 7) continue;
    const auto resp = tprf_respond(g, x, S(v));
    try {
      tprf_finish(g, x, S(4), pk, resp);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::bad_proof) ++detected;
    }
  }
  EXPECT_EQ(detected, 100);
}

TEST(Tprf, ToyRandomOracleSoundnessMatchesBound) {
  // With the hashed challenge, false accepts over all 100 wrong shares and
  // 50 nonces each stay near the 1/101 bound.
  const ToyGroup g = toy_with_h13();
  DeterministicRandom rng(3);
  int accepted = 0, trials = 0;
  for (std::uint32_t v = 0; v < 101; ++v) {
    if (v == 7) continue;
    for (int rep = 0; rep < 50; ++rep, ++trials) {
      try {
        tprf_finish(g, sample_input(), S(4), E(7), tprf_respond(g, sample_input(), S(v)));
        ++accepted;
      } catch (const Error&) {
      }
    }
  }
  EXPECT_LT(accepted, 3 * trials / 101 + 10);
}

TEST(Tprf, OracleEquivalenceProduction) {
  Ristretto255 g;
  for (int i = 0; i < 200; ++i) {
    const Scalar kc = Scalar::random(), kd = Scalar::random();
    const PrfInput x = PrfInput::from(random_vector(16), random_vector(32));
    const auto resp = tprf_respond(g, x, kd);
    ASSERT_EQ(tprf_finish(g, x, kc, kd * g.generator(), resp), tprf_oracle(g, x, kc + kd));
  }
}

TEST(Tprf, SameInputSameBlindedFreshProof) {
  Ristretto255 g;
  const Scalar kd = Scalar::random();
  const PrfInput x = sample_input();
  const auto a = tprf_respond(g, x, kd), b = tprf_respond(g, x, kd);
  EXPECT_EQ(a.blinded, b.blinded);
  EXPECT_NE(a.proof.response, b.proof.response);
}

TEST(Tprf, TamperedBlindedIsRejected) {
  Ristretto255 g;
  const Scalar kc = Scalar::random(), kd = Scalar::random();
  const PrfInput x = sample_input();
  auto resp = tprf_respond(g, x, kd);
  resp.blinded = resp.blinded + g.generator();
  try {
    tprf_finish(g, x, kc, kd * g.generator(), resp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::bad_proof);
  }
}

TEST(Tprf, DerivedKeysBalancedAndDistinct) {
  Ristretto255 g;
  DeterministicRandom rng(77);
  const Scalar phi = Scalar::random();
  std::set<Bytes> seen;
  std::vector<Bytes> keys;
  for (int i = 0; i < 10000; ++i) {
    const PrfInput x = PrfInput::from(random_vector(16), random_vector(32));
    keys.push_back(to_bytes(tprf_oracle(g, x, phi).bytes()));
    seen.insert(keys.back());
  }
  EXPECT_EQ(seen.size(), keys.size());
  EXPECT_GT(testing::bit_balance_p(keys), 0.01);
}

TEST(Tprf, KeySealsOnce) {
  DerivedKey k;
  k.mark_sealed();
  EXPECT_THROW(k.mark_sealed(), Error);
}

}  // namespace
}  // namespace twofe
