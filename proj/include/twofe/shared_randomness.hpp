#pragma once

#include <chrono>
#include <cstdint>
#include <string_view>

#include "twofe/bytes.hpp"
#include "twofe/hashing.hpp"

namespace twofe {

// Commit-reveal coin toss between the primary (initiator) and the secondary
// (responder):
//
//   initiator: c = H(s0)            -> SR_COMMIT
//   responder: s1                   -> SR_SHARE   (only after holding c)
//   initiator: s0, outputs s0^s1    -> SR_REVEAL
//   responder: checks H(s0) == c, outputs s1^s0
//
// The commitment preimage is always 32 bytes. When the logical seed is
// shorter (toy profile) s0 is the prefix and the rest is random padding, so
// the commitment stays hiding.

enum class SeedRole : std::uint8_t { initiator, responder };
enum class SeedState : std::uint8_t { init, committed, revealed, done, aborted };

std::string_view seed_state_name(SeedState s);

inline constexpr std::size_t kSeedBytes = 32;
inline constexpr std::chrono::seconds kSeedSessionTimeout{30};

// seed = s0 XOR s1; throws length-mismatch on unequal lengths.
Bytes sr_finalize(ByteView s0, ByteView s1);

class SeedSession {
 public:
  using Clock = std::chrono::steady_clock;

  explicit SeedSession(SeedRole role, std::size_t seed_bytes = kSeedBytes);
  ~SeedSession();

  SeedSession(SeedSession&&) noexcept;
  SeedSession& operator=(SeedSession&&) noexcept;
  SeedSession(const SeedSession&) = delete;
  SeedSession& operator=(const SeedSession&) = delete;

  // Initiator: Init -> Committed. Samples s0 and returns c = commit(s0 || pad).
  Commitment commit();
  // Same with a caller-chosen 32-byte preimage (oracle tests).
  Commitment commit_with_preimage(ByteView preimage);
  // Initiator: Committed -> Done. Takes s1, returns the preimage to reveal.
  Bytes reveal(ByteView s1);

  // Responder: Init -> Revealed. Stores c, returns a fresh s1.
  Bytes respond(const Commitment& c);
  Bytes respond_with(const Commitment& c, ByteView s1);
  // Responder: Revealed -> Done, or -> Aborted (and throws sr-abort) if the
  // preimage does not open c.
  void accept_reveal(ByteView preimage);

  void abort();

  SeedRole role() const { return role_; }
  SeedState state() const { return state_; }
  std::size_t seed_bytes() const { return seed_bytes_; }
  // Only defined once Done; throws protocol-order otherwise.
  const Bytes& seed() const;
  bool expired(Clock::time_point now, Clock::duration timeout = kSeedSessionTimeout) const;

 private:
  void require(SeedRole role, SeedState state, std::string_view op) const;
  void wipe();

  SeedRole role_;
  SeedState state_ = SeedState::init;
  std::size_t seed_bytes_;
  Bytes preimage_;  // initiator: s0 || pad
  Bytes s1_;
  Commitment commitment_{};
  Bytes seed_;
  Clock::time_point last_activity_;
};

}  // namespace twofe
