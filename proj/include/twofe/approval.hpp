#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "twofe/bytes.hpp"

namespace twofe {

enum class PolicyMode : std::uint8_t { auto_approve, notify, prompt };
std::string_view policy_mode_name(PolicyMode m);
PolicyMode parse_policy_mode(std::string_view s);  // throws usage

// Secondary-side approval policy. Folder overrides match on the resolved
// filename; the longest matching prefix wins.
struct ApprovalPolicy {
  PolicyMode mode = PolicyMode::notify;
  std::map<std::string, PolicyMode> overrides;
  std::chrono::seconds approval_window{0};

  PolicyMode mode_for(const std::optional<std::string>& filename) const;
};

enum class RequestKind : std::uint8_t { decrypt, encrypt, migrate_auth };
std::string_view request_kind_name(RequestKind k);

enum class Decision : std::uint8_t { pending, approved, denied, expired };
std::string_view decision_name(Decision d);

using SystemClock = std::chrono::system_clock;

struct PendingRequest {
  std::uint64_t id = 0;
  RequestKind kind = RequestKind::decrypt;
  std::string tag_hex;
  std::optional<std::string> filename;
  SystemClock::time_point requested_at;
  SystemClock::time_point expires_at;
  Decision decision = Decision::pending;
};

struct Notification {
  std::uint64_t id = 0;
  RequestKind kind = RequestKind::decrypt;
  std::string tag_hex;
  std::optional<std::string> filename;
  SystemClock::time_point at;
  std::string note;
};

enum class ApprovalEventKind : std::uint8_t { request, decision, notification };

struct ApprovalEvent {
  ApprovalEventKind kind;
  PendingRequest request;        // request / decision
  Notification notification;     // notification
};

// Pending-approval queue shared by the device's protocol handlers and the
// loopback console. Decisions are terminal; a request left pending past its
// expiry is marked expired and treated as a denial.
class ApprovalQueue {
 public:
  using Observer = std::function<void(const ApprovalEvent&)>;
  using Now = std::function<SystemClock::time_point()>;

  struct Options {
    std::chrono::milliseconds expiry = std::chrono::seconds(120);
    std::chrono::hours retention = std::chrono::hours(24 * 90);
    std::optional<std::filesystem::path> notification_log;  // JSON lines, appended
    Now now;
  };

  ApprovalQueue();
  explicit ApprovalQueue(Options options);

  // Runs the policy for one derivation or migration request. Returns true
  // when the request may proceed; blocks on a decision in prompt mode.
  bool authorize(PolicyMode mode, RequestKind kind, ByteView tag, const std::optional<std::string>& filename,
                 std::chrono::seconds window);

  // Adds a pending request and returns its id without blocking.
  std::uint64_t submit(RequestKind kind, ByteView tag, const std::optional<std::string>& filename);
  // Blocks until the request is decided or expires.
  Decision await(std::uint64_t id);

  // Throws unknown-request or already-decided.
  void decide(std::uint64_t id, bool approve);

  void notify(RequestKind kind, ByteView tag, const std::optional<std::string>& filename, std::string note);

  std::vector<PendingRequest> pending();
  std::vector<PendingRequest> requests();
  std::optional<PendingRequest> find(std::uint64_t id);
  std::vector<Notification> notifications();
  // Approve events seen so far, by request id (for policy audits).
  std::size_t approvals() const;

  int add_observer(Observer o);
  void remove_observer(int id);

 private:
  SystemClock::time_point now() const;
  void expire_locked(SystemClock::time_point now);
  void emit(const ApprovalEvent& e);
  void persist(const Notification& n);

  Options options_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, PendingRequest> requests_;
  std::vector<Notification> notifications_;
  std::map<std::string, SystemClock::time_point> last_approved_;  // tag hex -> time
  std::map<int, Observer> observers_;
  std::uint64_t next_request_ = 1;
  std::uint64_t next_notification_ = 1;
  std::size_t approvals_ = 0;
  int next_observer_ = 0;
};

std::string to_json(const PendingRequest& r);
std::string to_json(const Notification& n);

}  // namespace twofe
