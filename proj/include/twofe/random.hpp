#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "twofe/bytes.hpp"

namespace twofe {

// Initializes libsodium once; throws entropy-failure if that is impossible.
void ensure_crypto_init();

// All randomness in the library flows through random_bytes so that a
// DeterministicRandom scope can make whole protocol runs reproducible.
void random_bytes(std::span<std::uint8_t> out);

inline Bytes random_vector(std::size_t n) {
  Bytes out(n);
  random_bytes(out);
  return out;
}

template <std::size_t N>
std::array<std::uint8_t, N> random_array() {
  std::array<std::uint8_t, N> out{};
  random_bytes(out);
  return out;
}

// Uniform in [0, bound). bound must be non-zero.
std::uint32_t random_uniform(std::uint32_t bound);

// While alive, replaces the system entropy source process-wide with a
// ChaCha20 stream keyed from `seed`. Scopes nest; the innermost wins.
class DeterministicRandom {
 public:
  explicit DeterministicRandom(std::uint64_t seed);
  ~DeterministicRandom();

  DeterministicRandom(const DeterministicRandom&) = delete;
  DeterministicRandom& operator=(const DeterministicRandom&) = delete;

 private:
  std::array<std::uint8_t, 32> previous_key_{};
  std::uint64_t previous_counter_ = 0;
  bool previous_active_ = false;
};

}  // namespace twofe
