#include "twofe/random.hpp"

#include <sodium.h>

#include <mutex>

#include "twofe/error.hpp"

namespace twofe {

namespace {

struct StreamState {
  std::mutex mu;
  bool active = false;
  std::array<std::uint8_t, 32> key{};
  std::uint64_t counter = 0;
};

StreamState& stream() {
  static StreamState s;
  return s;
}

}  // namespace

void ensure_crypto_init() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error(ErrorCode::entropy_failure, "libsodium initialization failed");
}

void random_bytes(std::span<std::uint8_t> out) {
  ensure_crypto_init();
  if (out.empty()) return;
  auto& s = stream();
  std::lock_guard lock(s.mu);
  if (!s.active) {
    randombytes_buf(out.data(), out.size());
    return;
  }
  // Each call gets its own ChaCha20 stream: seed = BLAKE2b(key || counter).
  std::array<std::uint8_t, 40> input{};
  std::copy(s.key.begin(), s.key.end(), input.begin());
  for (int i = 0; i < 8; ++i) input[32 + i] = static_cast<std::uint8_t>(s.counter >> (8 * i));
  ++s.counter;
  std::array<std::uint8_t, randombytes_SEEDBYTES> seed{};
  crypto_generichash(seed.data(), seed.size(), input.data(), input.size(), nullptr, 0);
  randombytes_buf_deterministic(out.data(), out.size(), seed.data());
  sodium_memzero(seed.data(), seed.size());
}

std::uint32_t random_uniform(std::uint32_t bound) {
  if (bound == 0) throw Error(ErrorCode::internal, "random_uniform bound is zero");
  // Rejection sampling over the largest multiple of bound below 2^32.
  const std::uint64_t limit = (std::uint64_t{1} << 32) - ((std::uint64_t{1} << 32) % bound);
  for (;;) {
    std::array<std::uint8_t, 4> b{};
    random_bytes(b);
    const std::uint64_t v = (std::uint64_t{b[0]} << 24) | (std::uint64_t{b[1]} << 16) |
                            (std::uint64_t{b[2]} << 8) | b[3];
    if (v < limit) return static_cast<std::uint32_t>(v % bound);
  }
}

DeterministicRandom::DeterministicRandom(std::uint64_t seed) {
  ensure_crypto_init();
  auto& s = stream();
  std::lock_guard lock(s.mu);
  previous_active_ = s.active;
  previous_key_ = s.key;
  previous_counter_ = s.counter;
  std::array<std::uint8_t, 8> seed_bytes{};
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  crypto_generichash(s.key.data(), s.key.size(), seed_bytes.data(), seed_bytes.size(), nullptr, 0);
  s.counter = 0;
  s.active = true;
}

DeterministicRandom::~DeterministicRandom() {
  auto& s = stream();
  std::lock_guard lock(s.mu);
  s.active = previous_active_;
  s.key = previous_key_;
  s.counter = previous_counter_;
}

}  // namespace twofe
