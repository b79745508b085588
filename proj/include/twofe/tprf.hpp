#pragma once

#include <array>
#include <cstdint>

#include "twofe/bytes.hpp"
#include "twofe/dleq.hpp"
#include "twofe/error.hpp"
#include "twofe/group.hpp"
#include "twofe/hashing.hpp"

namespace twofe {

// PRF input x = "2FE-KDF-INPUT" || be32(|t|) || t || be32(|s|) || s.
// Both devices build it from the file tag and seed they were shown.
class PrfInput {
 public:
  static PrfInput from(ByteView tag, ByteView seed);

  const Bytes& bytes() const { return bytes_; }
  friend bool operator==(const PrfInput&, const PrfInput&) = default;

 private:
  Bytes bytes_;
};

// 256-bit symmetric key output by the threshold PRF. Wiped on destruction.
// A key may seal at most one file (see file_crypto.hpp); mark_sealed()
// enforces that.
class DerivedKey {
 public:
  DerivedKey() = default;
  explicit DerivedKey(const Digest256& k) : key_(k) {}
  DerivedKey(const DerivedKey&) = default;
  DerivedKey& operator=(const DerivedKey&) = default;
  ~DerivedKey() { secure_wipe(key_); }

  const std::array<std::uint8_t, 32>& bytes() const { return key_; }
  bool sealed() const { return sealed_; }
  void mark_sealed();

  friend bool operator==(const DerivedKey& a, const DerivedKey& b) { return a.key_ == b.key_; }

 private:
  std::array<std::uint8_t, 32> key_{};
  bool sealed_ = false;
};

// k = H_kdf(x, Y) where Y = Phi * H'(x) in the honest case.
template <PrimeOrderGroup Group>
DerivedKey prf_output(const PrfInput& x, const typename Group::Element& y) {
  const Bytes ye = y.encode();
  const std::array<ByteView, 2> parts{ByteView(x.bytes()), ByteView(ye)};
  return DerivedKey(tagged_sha256(domain::kdf, parts));
}

template <PrimeOrderGroup Group>
struct TprfResponse {
  typename Group::Element blinded;  // B = k_D * H'(x)
  DleqProof<Group> proof;
};

// Secondary side: B = k_D * H'(x) plus a proof that log_{H'(x)} B = log_G pk.
template <PrimeOrderGroup Group>
TprfResponse<Group> tprf_respond(const Group& group, const PrfInput& x,
                                 const typename Group::Scalar& secondary_share) {
  const auto hx = group.hash_to_group(x.bytes());
  const auto blinded = secondary_share * hx;
  return {blinded, dleq_prove(group, group.generator(), secondary_share, hx, blinded)};
}

// Primary side: verify the proof against the enrolled pk, then combine.
// Throws bad-proof without touching k_C when verification fails.
template <PrimeOrderGroup Group>
DerivedKey tprf_finish(const Group& group, const PrfInput& x, const typename Group::Scalar& primary_share,
                       const typename Group::Element& secondary_public_key,
                       const TprfResponse<Group>& response) {
  const auto hx = group.hash_to_group(x.bytes());
  if (!dleq_verify(group, group.generator(), hx, response.blinded, response.proof, secondary_public_key)) {
    throw Error(ErrorCode::bad_proof,
                "secondary's evaluation does not match the enrolled public key (stale share? re-sync enrollment)");
  }
  return prf_output<Group>(x, response.blinded + primary_share * hx);
}

// Direct single-party evaluation H(x, Phi * H'(x)); the equivalence oracle
// for the two-party path. Never used by the devices themselves.
template <PrimeOrderGroup Group>
DerivedKey tprf_oracle(const Group& group, const PrfInput& x, const typename Group::Scalar& master) {
  return prf_output<Group>(x, master * group.hash_to_group(x.bytes()));
}

}  // namespace twofe
