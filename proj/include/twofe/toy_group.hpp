#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>

#include "twofe/bytes.hpp"
#include "twofe/error.hpp"
#include "twofe/group.hpp"
#include "twofe/hashing.hpp"
#include "twofe/random.hpp"

namespace twofe {

// Toy profile: the additive group Z_P with generator 1, so scalar * element is
// multiplication mod P and every protocol value can be checked by hand. Both
// hashes can be stubbed per instance; unstubbed they reduce SHA-256 output.
// Not secure for any P; exists for oracle tests only.
template <std::uint32_t P>
class ModPrimeGroup {
  static_assert(P > 2 && P < 65536, "toy modulus must fit in two bytes");

 public:
  static constexpr std::size_t scalar_bytes = P < 256 ? 1 : 2;
  static constexpr std::size_t element_bytes = scalar_bytes;
  static constexpr std::uint32_t modulus = P;

  class Element;

  class Scalar {
   public:
    constexpr Scalar() = default;
    constexpr explicit Scalar(std::uint32_t v) : v_(v % P) {}

    static Scalar zero() { return Scalar(); }
    static Scalar random() { return Scalar(random_uniform(P)); }
    static Scalar decode(ByteView b) { return Scalar(decode_value(b)); }

    Bytes encode() const { return encode_value(v_); }
    std::uint32_t value() const { return v_; }
    bool is_zero() const { return v_ == 0; }
    void wipe() { v_ = 0; }

    friend Scalar operator+(Scalar a, Scalar b) { return Scalar(a.v_ + b.v_); }
    friend Scalar operator-(Scalar a, Scalar b) { return Scalar(a.v_ + P - b.v_); }
    friend Scalar operator*(Scalar a, Scalar b) { return Scalar(a.v_ * b.v_); }
    Scalar operator-() const { return Scalar(P - v_); }
    Scalar& operator+=(Scalar o) { return *this = *this + o; }
    Scalar& operator-=(Scalar o) { return *this = *this - o; }
    friend bool operator==(Scalar a, Scalar b) { return a.v_ == b.v_; }

   private:
    std::uint32_t v_ = 0;
  };

  class Element {
   public:
    constexpr Element() = default;
    constexpr explicit Element(std::uint32_t v) : v_(v % P) {}

    static Element identity() { return Element(); }
    static Element decode(ByteView b) { return Element(decode_value(b)); }

    Bytes encode() const { return encode_value(v_); }
    std::uint32_t value() const { return v_; }
    bool is_identity() const { return v_ == 0; }

    friend Element operator+(Element a, Element b) { return Element(a.v_ + b.v_); }
    friend Element operator-(Element a, Element b) { return Element(a.v_ + P - b.v_); }
    friend bool operator==(Element a, Element b) { return a.v_ == b.v_; }
    friend Element operator*(Scalar s, Element e) { return Element(s.value() * e.v_); }

   private:
    std::uint32_t v_ = 0;
  };

  using HashToGroupStub = std::function<Element(ByteView)>;
  using HashToScalarStub = std::function<Scalar(std::string_view, std::span<const ByteView>)>;

  HashToGroupStub hash_to_group_stub;
  HashToScalarStub hash_to_scalar_stub;

  Element generator() const { return Element(1); }

  Element hash_to_group(ByteView input) const {
    if (input.empty()) throw Error(ErrorCode::bad_length, "hash_to_group input must be non-empty");
    if (hash_to_group_stub) return hash_to_group_stub(input);
    const std::array<ByteView, 1> parts{input};
    const Digest256 d = tagged_sha256(domain::hash_to_group, parts);
    // Never the identity: map into [1, P-1].
    return Element(1 + reduce(d, P - 1));
  }

  Scalar hash_to_scalar(std::string_view tag, std::span<const ByteView> parts) const {
    if (hash_to_scalar_stub) return hash_to_scalar_stub(tag, parts);
    return Scalar(reduce(tagged_sha256(tag, parts), P));
  }

 private:
  static std::uint32_t reduce(const Digest256& d, std::uint32_t m) {
    std::uint64_t acc = 0;
    for (auto byte : d) acc = ((acc << 8) | byte) % m;
    return static_cast<std::uint32_t>(acc);
  }

  static Bytes encode_value(std::uint32_t v) {
    if constexpr (scalar_bytes == 1) {
      return Bytes{static_cast<std::uint8_t>(v)};
    } else {
      return Bytes{static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
    }
  }

  static std::uint32_t decode_value(ByteView b) {
    if (b.size() != scalar_bytes) throw Error(ErrorCode::invalid_encoding, "toy value has wrong length");
    std::uint32_t v = 0;
    for (auto x : b) v = (v << 8) | x;
    if (v >= P) throw Error(ErrorCode::invalid_encoding, "toy value out of range");
    return v;
  }
};

using ToyGroup = ModPrimeGroup<101>;

static_assert(PrimeOrderGroup<ToyGroup>);

}  // namespace twofe
