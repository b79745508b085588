#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "twofe/bytes.hpp"
#include "twofe/wire.hpp"

namespace twofe {

enum class SessionState : std::uint8_t { active, done, aborted };

// One run of a protocol flow on one device. The script lists the message
// types this side expects to receive, in order; anything else aborts the
// session. Secrets stashed in the session are wiped at done or abort.
class ProtocolSession {
 public:
  using Clock = std::chrono::steady_clock;
  using Inspector = std::function<void(const ProtocolSession&)>;

  ProtocolSession(Flow flow, SessionId id, std::vector<MessageType> script);
  ~ProtocolSession();
  ProtocolSession(ProtocolSession&&) = default;
  ProtocolSession& operator=(ProtocolSession&&) = default;

  // Accepts the next expected message; throws protocol-order (and aborts)
  // otherwise, or session-aborted if the session is no longer active.
  void accept(MessageType type);
  // Records an outgoing message in the transcript.
  void sent(MessageType type);

  void stash(const std::string& name, Bytes secret);
  const Bytes& secret(const std::string& name) const;

  void finish();
  void abort(const std::string& reason);

  Flow flow() const { return flow_; }
  const SessionId& id() const { return id_; }
  SessionState state() const { return state_; }
  std::size_t step() const { return step_; }
  bool complete() const { return step_ == script_.size(); }
  const std::string& abort_reason() const { return abort_reason_; }
  // "<" received, ">" sent, then the message name.
  const std::vector<std::string>& transcript() const { return transcript_; }
  std::size_t secrets_held() const;
  bool expired(Clock::time_point now, Clock::duration timeout) const { return now - last_activity_ > timeout; }

  // Observes every session as it reaches done or aborted, after wiping.
  static void set_inspector(Inspector inspector);

 private:
  void close(SessionState state);

  Flow flow_;
  SessionId id_;
  std::vector<MessageType> script_;
  std::size_t step_ = 0;
  SessionState state_ = SessionState::active;
  std::string abort_reason_;
  std::vector<std::string> transcript_;
  std::map<std::string, Bytes> secrets_;
  Clock::time_point last_activity_;
};

}  // namespace twofe
