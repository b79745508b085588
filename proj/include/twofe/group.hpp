#pragma once

#include <concepts>
#include <span>
#include <string_view>

#include "twofe/bytes.hpp"

namespace twofe {

// A prime-order group together with its scalar field. All protocol math
// (secret sharing, DLEQ proofs, the threshold PRF) is written against this
// concept, so it runs unchanged over the production curve and over the
// hand-checkable toy group.
//
// Scalars and elements are value types with the usual operators; the group
// object itself owns the generator and the two hash functions, which lets a
// test instance stub them.
template <class G>
concept PrimeOrderGroup =
    requires(const G& group, const typename G::Scalar& s, const typename G::Element& e,
             ByteView bytes, std::span<const ByteView> parts, std::string_view tag) {
      { s + s } -> std::same_as<typename G::Scalar>;
      { s - s } -> std::same_as<typename G::Scalar>;
      { s * s } -> std::same_as<typename G::Scalar>;
      { -s } -> std::same_as<typename G::Scalar>;
      { s == s } -> std::same_as<bool>;
      { s * e } -> std::same_as<typename G::Element>;
      { e + e } -> std::same_as<typename G::Element>;
      { e - e } -> std::same_as<typename G::Element>;
      { e == e } -> std::same_as<bool>;
      { s.encode() } -> std::same_as<Bytes>;
      { e.encode() } -> std::same_as<Bytes>;
      { e.is_identity() } -> std::same_as<bool>;
      { G::Scalar::decode(bytes) } -> std::same_as<typename G::Scalar>;
      { G::Element::decode(bytes) } -> std::same_as<typename G::Element>;
      { G::Scalar::random() } -> std::same_as<typename G::Scalar>;
      { G::Scalar::zero() } -> std::same_as<typename G::Scalar>;
      { G::Element::identity() } -> std::same_as<typename G::Element>;
      { G::scalar_bytes } -> std::convertible_to<std::size_t>;
      { G::element_bytes } -> std::convertible_to<std::size_t>;
      { group.generator() } -> std::same_as<typename G::Element>;
      { group.hash_to_group(bytes) } -> std::same_as<typename G::Element>;
      { group.hash_to_scalar(tag, parts) } -> std::same_as<typename G::Scalar>;
    };

}  // namespace twofe
