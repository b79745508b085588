#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include "twofe/bytes.hpp"
#include "twofe/group.hpp"

namespace twofe {

// Production profile: the ristretto255 prime-order group (order
// l = 2^252 + 27742317777372353535851937790883648493), backed by libsodium.
// Hash-to-group is the constant-time Elligator-based map over a 64-byte
// domain-separated SHA-512 digest.
class Ristretto255 {
 public:
  static constexpr std::string_view name = "ristretto255";
  static constexpr std::size_t scalar_bytes = 32;
  static constexpr std::size_t element_bytes = 32;
  static constexpr std::size_t security_bits = 256;  // lambda
  static constexpr std::size_t hash_bits = 256;      // kappa

  class Element;

  class Scalar {
   public:
    Scalar() = default;

    static Scalar zero() { return Scalar(); }
    static Scalar one();
    static Scalar from_u64(std::uint64_t v);
    static Scalar random();
    // Uniform reduction of a 512-bit little-endian integer mod l.
    static Scalar reduce_wide(std::span<const std::uint8_t, 64> wide);
    // 32 bytes big-endian; rejects values >= l.
    static Scalar decode(ByteView bytes);

    Bytes encode() const;
    bool is_zero() const;

    friend Scalar operator+(const Scalar& a, const Scalar& b);
    friend Scalar operator-(const Scalar& a, const Scalar& b);
    friend Scalar operator*(const Scalar& a, const Scalar& b);
    Scalar operator-() const;
    Scalar& operator+=(const Scalar& o) { return *this = *this + o; }
    Scalar& operator-=(const Scalar& o) { return *this = *this - o; }
    friend bool operator==(const Scalar& a, const Scalar& b);

    friend Element operator*(const Scalar& s, const Element& e);

    void wipe();
    const std::array<std::uint8_t, 32>& little_endian() const { return le_; }

   private:
    std::array<std::uint8_t, 32> le_{};
  };

  class Element {
   public:
    Element() = default;  // identity

    static Element identity() { return Element(); }
    static Element base();
    static Element base_times(const Scalar& s);
    // Compressed 32-byte ristretto encoding; rejects invalid encodings.
    static Element decode(ByteView bytes);

    Bytes encode() const { return Bytes(enc_.begin(), enc_.end()); }
    bool is_identity() const;

    friend Element operator+(const Element& a, const Element& b);
    friend Element operator-(const Element& a, const Element& b);
    friend bool operator==(const Element& a, const Element& b) { return a.enc_ == b.enc_; }
    friend Element operator*(const Scalar& s, const Element& e);

   private:
    std::array<std::uint8_t, 32> enc_{};
  };

  Element generator() const { return Element::base(); }
  Element hash_to_group(ByteView input) const;
  Scalar hash_to_scalar(std::string_view tag, std::span<const ByteView> parts) const;
};

static_assert(PrimeOrderGroup<Ristretto255>);

}  // namespace twofe
