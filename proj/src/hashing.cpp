#include "twofe/hashing.hpp"

#include <sodium.h>

#include "twofe/error.hpp"
#include "twofe/random.hpp"

namespace twofe {

Bytes frame(std::string_view domain, std::span<const ByteView> parts) {
  ByteWriter w;
  w.field(domain);
  for (const auto& p : parts) w.field(p);
  return w.take();
}

Digest256 sha256(ByteView data) {
  ensure_crypto_init();
  Digest256 out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

Digest512 sha512(ByteView data) {
  ensure_crypto_init();
  Digest512 out{};
  crypto_hash_sha512(out.data(), data.data(), data.size());
  return out;
}

Digest256 hmac_sha256(ByteView key, ByteView message) {
  ensure_crypto_init();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, message.data(), message.size());
  Digest256 out{};
  crypto_auth_hmacsha256_final(&st, out.data());
  sodium_memzero(&st, sizeof st);
  return out;
}

Commitment commit(ByteView preimage) {
  if (preimage.size() != kCommitPreimageBytes) {
    throw Error(ErrorCode::bad_length, "commitment preimage must be 32 bytes");
  }
  const std::array<ByteView, 1> parts{preimage};
  return tagged_sha256(domain::commit, parts);
}

bool verify_commitment(const Commitment& c, ByteView preimage) {
  if (preimage.size() != kCommitPreimageBytes) return false;
  const Commitment expected = commit(preimage);
  return constant_time_equal(expected, c);
}

}  // namespace twofe
