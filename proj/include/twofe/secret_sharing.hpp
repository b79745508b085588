#pragma once

#include <cstdint>
#include <string_view>
#include <utility>

namespace twofe {

enum class Role : std::uint8_t { primary = 1, secondary = 2 };

inline std::string_view role_name(Role r) { return r == Role::primary ? "primary" : "secondary"; }

// 2-out-of-2 additive sharing over the scalar field. Every function is
// generic over the scalar type of a PrimeOrderGroup.

template <class Scalar>
struct Sharing {
  Scalar first;
  Scalar second;
};

// (mask, v - mask). The deterministic form is what share() uses internally
// and what hand-worked examples call directly.
template <class Scalar>
Sharing<Scalar> share_with_mask(const Scalar& v, const Scalar& mask) {
  return {mask, v - mask};
}

template <class Scalar>
Sharing<Scalar> share(const Scalar& v) {
  return share_with_mask(v, Scalar::random());
}

template <class Scalar>
Scalar reconstruct(const Scalar& a, const Scalar& b) {
  return a + b;
}

template <class Scalar>
struct RefreshStep {
  Scalar new_own;
  Scalar delta_for_peer;
};

// Adds a sharing (z, -z) of zero: the initiator keeps own + z and ships -z.
template <class Scalar>
RefreshStep<Scalar> refresh_pair_with(const Scalar& own, const Scalar& z) {
  return {own + z, -z};
}

template <class Scalar>
RefreshStep<Scalar> refresh_pair(const Scalar& own) {
  return refresh_pair_with(own, Scalar::random());
}

template <class Scalar>
struct SubShares {
  Scalar peer;   // k_C^D on the primary, k_D^C on the secondary
  Scalar cloud;  // k_C^S / k_D^S
};

template <class Scalar>
SubShares<Scalar> split_own_share_with(const Scalar& own, const Scalar& peer) {
  return {peer, own - peer};
}

template <class Scalar>
SubShares<Scalar> split_own_share(const Scalar& own) {
  return split_own_share_with(own, Scalar::random());
}

// A device's key share together with the two recovery sub-shares it hands
// out. sub_share_peer + sub_share_cloud == own_share always holds.
template <class Scalar>
struct ShareSet {
  Role role = Role::primary;
  Scalar own_share;
  Scalar sub_share_peer;
  Scalar sub_share_cloud;

  static ShareSet generate(Role role) {
    ShareSet s;
    s.role = role;
    s.own_share = Scalar::random();
    s.resplit();
    return s;
  }

  // Fresh sub-shares of the current own_share (used after every refresh).
  void resplit() {
    auto sub = split_own_share(own_share);
    sub_share_peer = sub.peer;
    sub_share_cloud = sub.cloud;
  }

  bool consistent() const { return sub_share_peer + sub_share_cloud == own_share; }
};

}  // namespace twofe
