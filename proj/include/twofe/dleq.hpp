#pragma once

#include <array>

#include "twofe/bytes.hpp"
#include "twofe/error.hpp"
#include "twofe/group.hpp"
#include "twofe/hashing.hpp"

namespace twofe {

// Non-interactive Chaum-Pedersen proof that log_A(B) == log_G(P), made
// non-interactive with Fiat-Shamir. The challenge hashes the tuple
// (G, P, A, B, tG, tA) in exactly that order, each element length-prefixed
// under the "2FE-NIZK" tag; prover and verifier share dleq_challenge().
template <PrimeOrderGroup Group>
struct DleqProof {
  using Scalar = typename Group::Scalar;

  Scalar challenge;  // w
  Scalar response;   // rho = t + w * x

  // challenge || response, each a canonical scalar.
  Bytes encode() const {
    ByteWriter w;
    w.raw(challenge.encode()).raw(response.encode());
    return w.take();
  }

  static DleqProof decode(ByteView b) {
    if (b.size() != 2 * Group::scalar_bytes) throw Error(ErrorCode::invalid_encoding, "bad proof length");
    return {Scalar::decode(b.first(Group::scalar_bytes)), Scalar::decode(b.last(Group::scalar_bytes))};
  }
};

template <PrimeOrderGroup Group>
typename Group::Scalar dleq_challenge(const Group& group, const typename Group::Element& base,
                                      const typename Group::Element& public_key,
                                      const typename Group::Element& a, const typename Group::Element& b,
                                      const typename Group::Element& commit_base,
                                      const typename Group::Element& commit_a) {
  const Bytes e0 = base.encode(), e1 = public_key.encode(), e2 = a.encode(), e3 = b.encode(),
              e4 = commit_base.encode(), e5 = commit_a.encode();
  const std::array<ByteView, 6> parts{e0, e1, e2, e3, e4, e5};
  return group.hash_to_scalar(domain::nizk, parts);
}

// Prover with an explicit nonce. Only tests should call this directly; a
// reused nonce leaks the witness.
template <PrimeOrderGroup Group>
DleqProof<Group> dleq_prove_with_nonce(const Group& group, const typename Group::Element& base,
                                       const typename Group::Scalar& secret,
                                       const typename Group::Element& a,
                                       const typename Group::Element& b,
                                       const typename Group::Scalar& nonce) {
  const auto public_key = secret * base;
  const auto w = dleq_challenge(group, base, public_key, a, b, nonce * base, nonce * a);
  return {w, nonce + w * secret};
}

template <PrimeOrderGroup Group>
DleqProof<Group> dleq_prove(const Group& group, const typename Group::Element& base,
                            const typename Group::Scalar& secret, const typename Group::Element& a,
                            const typename Group::Element& b) {
  auto nonce = Group::Scalar::random();
  auto proof = dleq_prove_with_nonce(group, base, secret, a, b, nonce);
  nonce.wipe();
  return proof;
}

template <PrimeOrderGroup Group>
bool dleq_verify(const Group& group, const typename Group::Element& base,
                 const typename Group::Element& a, const typename Group::Element& b,
                 const DleqProof<Group>& proof, const typename Group::Element& public_key) {
  const auto commit_base = proof.response * base - proof.challenge * public_key;
  const auto commit_a = proof.response * a - proof.challenge * b;
  return dleq_challenge(group, base, public_key, a, b, commit_base, commit_a) == proof.challenge;
}

// Wire-facing verifier: malformed encodings throw invalid-encoding, a
// well-formed but wrong proof returns false.
template <PrimeOrderGroup Group>
bool dleq_verify_encoded(const Group& group, ByteView base, ByteView a, ByteView b, ByteView proof,
                         ByteView public_key) {
  using Element = typename Group::Element;
  return dleq_verify(group, Element::decode(base), Element::decode(a), Element::decode(b),
                     DleqProof<Group>::decode(proof), Element::decode(public_key));
}

}  // namespace twofe
