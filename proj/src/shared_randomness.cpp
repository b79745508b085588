#include "twofe/shared_randomness.hpp"

#include "twofe/error.hpp"
#include "twofe/random.hpp"

namespace twofe {

std::string_view seed_state_name(SeedState s) {
  switch (s) {
    case SeedState::init: return "init";
    case SeedState::committed: return "committed";
    case SeedState::revealed: return "revealed";
    case SeedState::done: return "done";
    case SeedState::aborted: return "aborted";
  }
  return "?";
}

Bytes sr_finalize(ByteView s0, ByteView s1) {
  if (s0.size() != s1.size()) throw Error(ErrorCode::length_mismatch, "seed shares differ in length");
  Bytes out(s0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s0[i] ^ s1[i];
  return out;
}

SeedSession::SeedSession(SeedRole role, std::size_t seed_bytes)
    : role_(role), seed_bytes_(seed_bytes), last_activity_(Clock::now()) {
  if (seed_bytes == 0 || seed_bytes > kCommitPreimageBytes) {
    throw Error(ErrorCode::bad_length, "seed length must be 1..32 bytes");
  }
}

SeedSession::~SeedSession() { wipe(); }

SeedSession::SeedSession(SeedSession&& o) noexcept
    : role_(o.role_),
      state_(o.state_),
      seed_bytes_(o.seed_bytes_),
      preimage_(std::move(o.preimage_)),
      s1_(std::move(o.s1_)),
      commitment_(o.commitment_),
      seed_(std::move(o.seed_)),
      last_activity_(o.last_activity_) {
  o.state_ = SeedState::aborted;
}

SeedSession& SeedSession::operator=(SeedSession&& o) noexcept {
  if (this != &o) {
    wipe();
    role_ = o.role_;
    state_ = o.state_;
    seed_bytes_ = o.seed_bytes_;
    preimage_ = std::move(o.preimage_);
    s1_ = std::move(o.s1_);
    commitment_ = o.commitment_;
    seed_ = std::move(o.seed_);
    last_activity_ = o.last_activity_;
    o.state_ = SeedState::aborted;
  }
  return *this;
}

void SeedSession::require(SeedRole role, SeedState state, std::string_view op) const {
  if (role_ != role || state_ != state) {
    throw Error(ErrorCode::protocol_order,
                std::string(op) + " not allowed in state " + std::string(seed_state_name(state_)));
  }
}

Commitment SeedSession::commit() {
  return commit_with_preimage(random_vector(kCommitPreimageBytes));
}

Commitment SeedSession::commit_with_preimage(ByteView preimage) {
  require(SeedRole::initiator, SeedState::init, "commit");
  if (preimage.size() != kCommitPreimageBytes) throw Error(ErrorCode::bad_length, "preimage must be 32 bytes");
  preimage_.assign(preimage.begin(), preimage.end());
  commitment_ = twofe::commit(preimage_);
  state_ = SeedState::committed;
  last_activity_ = Clock::now();
  return commitment_;
}

Bytes SeedSession::reveal(ByteView s1) {
  require(SeedRole::initiator, SeedState::committed, "reveal");
  if (s1.size() != seed_bytes_) {
    abort();
    throw Error(ErrorCode::length_mismatch, "responder share has wrong length");
  }
  seed_ = sr_finalize(ByteView(preimage_).first(seed_bytes_), s1);
  state_ = SeedState::done;
  last_activity_ = Clock::now();
  return preimage_;
}

Bytes SeedSession::respond(const Commitment& c) { return respond_with(c, random_vector(seed_bytes_)); }

Bytes SeedSession::respond_with(const Commitment& c, ByteView s1) {
  require(SeedRole::responder, SeedState::init, "respond");
  if (s1.size() != seed_bytes_) throw Error(ErrorCode::length_mismatch, "s1 has wrong length");
  commitment_ = c;
  s1_.assign(s1.begin(), s1.end());
  state_ = SeedState::revealed;
  last_activity_ = Clock::now();
  return s1_;
}

void SeedSession::accept_reveal(ByteView preimage) {
  require(SeedRole::responder, SeedState::revealed, "accept_reveal");
  if (!verify_commitment(commitment_, preimage)) {
    abort();
    throw Error(ErrorCode::sr_abort, "revealed s0 does not open the commitment");
  }
  seed_ = sr_finalize(preimage.first(seed_bytes_), s1_);
  state_ = SeedState::done;
  last_activity_ = Clock::now();
}

void SeedSession::abort() {
  wipe();
  state_ = SeedState::aborted;
}

const Bytes& SeedSession::seed() const {
  if (state_ != SeedState::done) throw Error(ErrorCode::protocol_order, "seed requested before completion");
  return seed_;
}

bool SeedSession::expired(Clock::time_point now, Clock::duration timeout) const {
  return state_ != SeedState::done && state_ != SeedState::aborted && now - last_activity_ > timeout;
}

void SeedSession::wipe() {
  secure_wipe(preimage_);
  secure_wipe(s1_);
  secure_wipe(seed_);
}

}  // namespace twofe
