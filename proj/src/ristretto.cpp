#include "twofe/ristretto.hpp"

#include <sodium.h>

#include <algorithm>

#include "twofe/error.hpp"
#include "twofe/hashing.hpp"
#include "twofe/random.hpp"

namespace twofe {

namespace {

// Group order l, big-endian.
constexpr std::array<std::uint8_t, 32> kOrderBe = {
    0x10, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x14, 0xde, 0xf9, 0xde, 0xa2, 0xf7,
    0x9c, 0xd6, 0x58, 0x12, 0x63, 0x1a, 0x5c, 0xf5, 0xd3, 0xed};

using Scalar = Ristretto255::Scalar;
using Element = Ristretto255::Element;

}  // namespace

Scalar Scalar::one() { return from_u64(1); }

Scalar Scalar::from_u64(std::uint64_t v) {
  Scalar s;
  for (int i = 0; i < 8; ++i) s.le_[i] = static_cast<std::uint8_t>(v >> (8 * i));
  return s;
}

Scalar Scalar::random() {
  std::array<std::uint8_t, 64> wide{};
  random_bytes(wide);
  Scalar s = reduce_wide(wide);
  sodium_memzero(wide.data(), wide.size());
  return s;
}

Scalar Scalar::reduce_wide(std::span<const std::uint8_t, 64> wide) {
  ensure_crypto_init();
  Scalar s;
  crypto_core_ristretto255_scalar_reduce(s.le_.data(), wide.data());
  return s;
}

Scalar Scalar::decode(ByteView bytes) {
  if (bytes.size() != scalar_bytes) throw Error(ErrorCode::invalid_encoding, "scalar must be 32 bytes");
  if (!std::lexicographical_compare(bytes.begin(), bytes.end(), kOrderBe.begin(), kOrderBe.end())) {
    throw Error(ErrorCode::invalid_encoding, "scalar not reduced mod l");
  }
  Scalar s;
  std::reverse_copy(bytes.begin(), bytes.end(), s.le_.begin());
  return s;
}

Bytes Scalar::encode() const { return Bytes(le_.rbegin(), le_.rend()); }

bool Scalar::is_zero() const { return sodium_is_zero(le_.data(), le_.size()) == 1; }

Scalar operator+(const Scalar& a, const Scalar& b) {
  Scalar r;
  crypto_core_ristretto255_scalar_add(r.le_.data(), a.le_.data(), b.le_.data());
  return r;
}

Scalar operator-(const Scalar& a, const Scalar& b) {
  Scalar r;
  crypto_core_ristretto255_scalar_sub(r.le_.data(), a.le_.data(), b.le_.data());
  return r;
}

Scalar operator*(const Scalar& a, const Scalar& b) {
  Scalar r;
  crypto_core_ristretto255_scalar_mul(r.le_.data(), a.le_.data(), b.le_.data());
  return r;
}

Scalar Scalar::operator-() const {
  Scalar r;
  crypto_core_ristretto255_scalar_negate(r.le_.data(), le_.data());
  return r;
}

bool operator==(const Scalar& a, const Scalar& b) {
  return sodium_memcmp(a.le_.data(), b.le_.data(), a.le_.size()) == 0;
}

void Scalar::wipe() { sodium_memzero(le_.data(), le_.size()); }

Element Element::base() {
  // 1 * B; cached since it never changes.
  static const Element b = base_times(Scalar::one());
  return b;
}

Element Element::base_times(const Scalar& s) {
  ensure_crypto_init();
  Element e;
  // Returns -1 only when the result is the identity, which is already
  // written to the output buffer.
  (void)crypto_scalarmult_ristretto255_base(e.enc_.data(), s.little_endian().data());
  return e;
}

Element Element::decode(ByteView bytes) {
  ensure_crypto_init();
  if (bytes.size() != element_bytes) throw Error(ErrorCode::invalid_encoding, "element must be 32 bytes");
  if (crypto_core_ristretto255_is_valid_point(bytes.data()) != 1) {
    throw Error(ErrorCode::invalid_encoding, "not a ristretto255 element");
  }
  Element e;
  std::copy(bytes.begin(), bytes.end(), e.enc_.begin());
  return e;
}

bool Element::is_identity() const { return sodium_is_zero(enc_.data(), enc_.size()) == 1; }

Element operator+(const Element& a, const Element& b) {
  Element r;
  if (crypto_core_ristretto255_add(r.enc_.data(), a.enc_.data(), b.enc_.data()) != 0) {
    throw Error(ErrorCode::invalid_encoding, "element addition on invalid point");
  }
  return r;
}

Element operator-(const Element& a, const Element& b) {
  Element r;
  if (crypto_core_ristretto255_sub(r.enc_.data(), a.enc_.data(), b.enc_.data()) != 0) {
    throw Error(ErrorCode::invalid_encoding, "element subtraction on invalid point");
  }
  return r;
}

Element operator*(const Scalar& s, const Element& e) {
  if (e == Element::base()) return Element::base_times(s);
  Element r;
  // Returns -1 when the product is the identity; the output is still written.
  const int rc = crypto_scalarmult_ristretto255(r.enc_.data(), s.little_endian().data(), e.enc_.data());
  static_cast<void>(rc);
  return r;
}

Element Ristretto255::hash_to_group(ByteView input) const {
  ensure_crypto_init();
  if (input.empty()) throw Error(ErrorCode::bad_length, "hash_to_group input must be non-empty");
  // The identity has negligible probability; a counter suffix keeps the map
  // total while staying deterministic.
  for (std::uint8_t counter = 0;; ++counter) {
    const std::array<std::uint8_t, 1> ctr{counter};
    std::array<ByteView, 2> parts{input, ByteView(ctr)};
    const std::span<const ByteView> used(parts.data(), counter == 0 ? 1 : 2);
    Digest512 wide = tagged_sha512(domain::hash_to_group, used);
    std::array<std::uint8_t, 32> out{};
    crypto_core_ristretto255_from_hash(out.data(), wide.data());
    Element e = Element::decode(out);
    if (!e.is_identity()) return e;
  }
}

Scalar Ristretto255::hash_to_scalar(std::string_view tag, std::span<const ByteView> parts) const {
  Digest512 wide = tagged_sha512(tag, parts);
  return Scalar::reduce_wide(wide);
}

}  // namespace twofe
