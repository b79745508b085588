#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "twofe/bytes.hpp"

namespace twofe {

// Domain-separation tags. Every hash invocation in the library is prefixed
// with exactly one of these, so outputs of different roles never collide.
namespace domain {
inline constexpr std::string_view hash_to_group = "2FE-H1";
inline constexpr std::string_view nizk = "2FE-NIZK";
inline constexpr std::string_view commit = "2FE-COMMIT";
inline constexpr std::string_view kdf = "2FE-KDF";
inline constexpr std::string_view kdf_input = "2FE-KDF-INPUT";
inline constexpr std::string_view pairing = "2FE-SAS";
}  // namespace domain

using Digest256 = std::array<std::uint8_t, 32>;
using Digest512 = std::array<std::uint8_t, 64>;

// be32(len(domain)) || domain || for each part: be32(len(part)) || part
Bytes frame(std::string_view domain, std::span<const ByteView> parts);

Digest256 sha256(ByteView data);
Digest512 sha512(ByteView data);

inline Digest256 tagged_sha256(std::string_view domain, std::span<const ByteView> parts) {
  return sha256(frame(domain, parts));
}
inline Digest512 tagged_sha512(std::string_view domain, std::span<const ByteView> parts) {
  return sha512(frame(domain, parts));
}

Digest256 hmac_sha256(ByteView key, ByteView message);

// Hash commitment used by the coin toss. The preimage must be exactly
// kCommitPreimageBytes long (lambda = 256 bits); the preimage is assumed to
// be high-entropy, so no extra blinding randomness is mixed in.
using Commitment = Digest256;
inline constexpr std::size_t kCommitPreimageBytes = 32;

Commitment commit(ByteView preimage);
bool verify_commitment(const Commitment& c, ByteView preimage);

}  // namespace twofe
