#include "twofe/session.hpp"

#include <mutex>

#include "twofe/error.hpp"

namespace twofe {

namespace {

std::mutex& inspector_mu() {
  static std::mutex mu;
  return mu;
}

ProtocolSession::Inspector& inspector() {
  static ProtocolSession::Inspector i;
  return i;
}

}  // namespace

ProtocolSession::ProtocolSession(Flow flow, SessionId id, std::vector<MessageType> script)
    : flow_(flow), id_(id), script_(std::move(script)), last_activity_(Clock::now()) {}

ProtocolSession::~ProtocolSession() {
  for (auto& [name, s] : secrets_) secure_wipe(s);
}

void ProtocolSession::accept(MessageType type) {
  if (state_ != SessionState::active) {
    throw Error(ErrorCode::session_aborted,
                "session is " + std::string(state_ == SessionState::done ? "finished" : "aborted: " + abort_reason_));
  }
  if (step_ >= script_.size() || script_[step_] != type) {
    const std::string expected = step_ < script_.size() ? std::string(message_name(script_[step_])) : "nothing";
    const std::string reason = "expected " + expected + ", got " + std::string(message_name(type));
    abort(reason);
    throw Error(ErrorCode::protocol_order, reason);
  }
  ++step_;
  last_activity_ = Clock::now();
  transcript_.push_back("<" + std::string(message_name(type)));
}

void ProtocolSession::sent(MessageType type) {
  last_activity_ = Clock::now();
  transcript_.push_back(">" + std::string(message_name(type)));
}

void ProtocolSession::stash(const std::string& name, Bytes secret) {
  auto& slot = secrets_[name];
  secure_wipe(slot);
  slot = std::move(secret);
}

const Bytes& ProtocolSession::secret(const std::string& name) const {
  auto it = secrets_.find(name);
  if (it == secrets_.end()) throw Error(ErrorCode::internal, "session holds no " + name);
  return it->second;
}

std::size_t ProtocolSession::secrets_held() const {
  std::size_t n = 0;
  for (const auto& [name, s] : secrets_) n += s.empty() ? 0 : 1;
  return n;
}

void ProtocolSession::finish() { close(SessionState::done); }

void ProtocolSession::abort(const std::string& reason) {
  if (state_ != SessionState::active) return;
  abort_reason_ = reason;
  close(SessionState::aborted);
}

void ProtocolSession::close(SessionState state) {
  if (state_ != SessionState::active) return;
  state_ = state;
  for (auto& [name, s] : secrets_) secure_wipe(s);
  Inspector i;
  {
    std::lock_guard lock(inspector_mu());
    i = inspector();
  }
  if (i) i(*this);
}

void ProtocolSession::set_inspector(Inspector i) {
  std::lock_guard lock(inspector_mu());
  inspector() = std::move(i);
}

}  // namespace twofe
