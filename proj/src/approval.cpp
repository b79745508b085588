#include "twofe/approval.hpp"

#include <fstream>

#include "json.hpp"
#include "twofe/error.hpp"

namespace twofe {

std::string_view policy_mode_name(PolicyMode m) {
  switch (m) {
    case PolicyMode::auto_approve: return "auto";
    case PolicyMode::notify: return "notify";
    case PolicyMode::prompt: return "prompt";
  }
  return "?";
}

PolicyMode parse_policy_mode(std::string_view s) {
  if (s == "auto") return PolicyMode::auto_approve;
  if (s == "notify") return PolicyMode::notify;
  if (s == "prompt") return PolicyMode::prompt;
  throw Error(ErrorCode::usage, "policy must be auto, notify or prompt");
}

PolicyMode ApprovalPolicy::mode_for(const std::optional<std::string>& filename) const {
  if (!filename) return mode;
  std::size_t best = 0;
  PolicyMode chosen = mode;
  for (const auto& [prefix, m] : overrides) {
    if (filename->starts_with(prefix) && prefix.size() >= best) {
      best = prefix.size();
      chosen = m;
    }
  }
  return chosen;
}

std::string_view request_kind_name(RequestKind k) {
  switch (k) {
    case RequestKind::decrypt: return "decrypt";
    case RequestKind::encrypt: return "encrypt";
    case RequestKind::migrate_auth: return "migrate-auth";
  }
  return "?";
}

std::string_view decision_name(Decision d) {
  switch (d) {
    case Decision::pending: return "pending";
    case Decision::approved: return "approved";
    case Decision::denied: return "denied";
    case Decision::expired: return "expired";
  }
  return "?";
}

namespace {

std::int64_t epoch_ms(SystemClock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

SystemClock::time_point from_epoch_ms(std::int64_t ms) {
  return SystemClock::time_point(std::chrono::duration_cast<SystemClock::duration>(std::chrono::milliseconds(ms)));
}

RequestKind parse_kind(std::string_view s) {
  if (s == "encrypt") return RequestKind::encrypt;
  if (s == "migrate-auth") return RequestKind::migrate_auth;
  return RequestKind::decrypt;
}

nlohmann::json request_json(const PendingRequest& r) {
  nlohmann::json j{{"id", r.id},
                   {"kind", request_kind_name(r.kind)},
                   {"tag", r.tag_hex},
                   {"requested_at_ms", epoch_ms(r.requested_at)},
                   {"expires_at_ms", epoch_ms(r.expires_at)},
                   {"decision", decision_name(r.decision)}};
  j["filename"] = r.filename ? nlohmann::json(*r.filename) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json notification_json(const Notification& n) {
  nlohmann::json j{{"id", n.id},
                   {"kind", request_kind_name(n.kind)},
                   {"tag", n.tag_hex},
                   {"at_ms", epoch_ms(n.at)},
                   {"note", n.note}};
  j["filename"] = n.filename ? nlohmann::json(*n.filename) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

std::string to_json(const PendingRequest& r) { return request_json(r).dump(); }
std::string to_json(const Notification& n) { return notification_json(n).dump(); }

ApprovalQueue::ApprovalQueue() : ApprovalQueue(Options{}) {}

ApprovalQueue::ApprovalQueue(Options options) : options_(std::move(options)) {
  if (!options_.notification_log) return;
  std::ifstream in(*options_.notification_log);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Notification n;
      n.id = j.at("id").get<std::uint64_t>();
      n.kind = parse_kind(j.at("kind").get<std::string>());
      n.tag_hex = j.at("tag").get<std::string>();
      if (!j.at("filename").is_null()) n.filename = j.at("filename").get<std::string>();
      n.at = from_epoch_ms(j.at("at_ms").get<std::int64_t>());
      n.note = j.value("note", "");
      next_notification_ = std::max(next_notification_, n.id + 1);
      notifications_.push_back(std::move(n));
    } catch (const nlohmann::json::exception&) {
      // A torn final line from a crash is skipped.
    }
  }
}

SystemClock::time_point ApprovalQueue::now() const { return options_.now ? options_.now() : SystemClock::now(); }

void ApprovalQueue::expire_locked(SystemClock::time_point t) {
  for (auto& [id, r] : requests_) {
    if (r.decision == Decision::pending && t >= r.expires_at) r.decision = Decision::expired;
  }
}

void ApprovalQueue::emit(const ApprovalEvent& e) {
  std::vector<Observer> observers;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, o] : observers_) observers.push_back(o);
  }
  for (const auto& o : observers) o(e);
}

void ApprovalQueue::persist(const Notification& n) {
  if (!options_.notification_log) return;
  std::ofstream out(*options_.notification_log, std::ios::app);
  out << to_json(n) << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::io, "cannot append to notification log");
}

bool ApprovalQueue::authorize(PolicyMode mode, RequestKind kind, ByteView tag,
                              const std::optional<std::string>& filename, std::chrono::seconds window) {
  switch (mode) {
    case PolicyMode::auto_approve:
      return true;
    case PolicyMode::notify:
      notify(kind, tag, filename, "derivation performed");
      return true;
    case PolicyMode::prompt:
      break;
  }
  const std::string key = to_hex(tag);
  if (window.count() > 0 && kind != RequestKind::migrate_auth) {
    std::lock_guard lock(mu_);
    auto it = last_approved_.find(key);
    if (it != last_approved_.end() && now() - it->second <= window) return true;
  }
  const auto id = submit(kind, tag, filename);
  const bool ok = await(id) == Decision::approved;
  if (ok) {
    std::lock_guard lock(mu_);
    last_approved_[key] = now();
  }
  return ok;
}

std::uint64_t ApprovalQueue::submit(RequestKind kind, ByteView tag, const std::optional<std::string>& filename) {
  PendingRequest r;
  {
    std::lock_guard lock(mu_);
    r.id = next_request_++;
    r.kind = kind;
    r.tag_hex = to_hex(tag);
    r.filename = filename;
    r.requested_at = now();
    r.expires_at = r.requested_at + options_.expiry;
    requests_[r.id] = r;
  }
  emit({ApprovalEventKind::request, r, {}});
  return r.id;
}

Decision ApprovalQueue::await(std::uint64_t id) {
  std::unique_lock lock(mu_);
  auto it = requests_.find(id);
  if (it == requests_.end()) throw Error(ErrorCode::unknown_request, std::to_string(id));
  const auto deadline = std::chrono::steady_clock::now() + options_.expiry;
  while (it->second.decision == Decision::pending) {
    if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
      if (it->second.decision == Decision::pending) it->second.decision = Decision::expired;
    }
    expire_locked(now());
  }
  const PendingRequest r = it->second;
  lock.unlock();
  if (r.decision == Decision::expired) emit({ApprovalEventKind::decision, r, {}});
  return r.decision;
}

void ApprovalQueue::decide(std::uint64_t id, bool approve) {
  PendingRequest r;
  {
    std::lock_guard lock(mu_);
    expire_locked(now());
    auto it = requests_.find(id);
    if (it == requests_.end()) throw Error(ErrorCode::unknown_request, "no request " + std::to_string(id));
    if (it->second.decision != Decision::pending) {
      throw Error(ErrorCode::already_decided,
                  "request " + std::to_string(id) + " is " + std::string(decision_name(it->second.decision)));
    }
    it->second.decision = approve ? Decision::approved : Decision::denied;
    if (approve) ++approvals_;
    r = it->second;
  }
  cv_.notify_all();
  emit({ApprovalEventKind::decision, r, {}});
}

void ApprovalQueue::notify(RequestKind kind, ByteView tag, const std::optional<std::string>& filename,
                           std::string note) {
  Notification n;
  {
    std::lock_guard lock(mu_);
    n.id = next_notification_++;
    n.kind = kind;
    n.tag_hex = to_hex(tag);
    n.filename = filename;
    n.at = now();
    n.note = std::move(note);
    notifications_.push_back(n);
    persist(n);
  }
  emit({ApprovalEventKind::notification, {}, n});
}

std::vector<PendingRequest> ApprovalQueue::pending() {
  std::lock_guard lock(mu_);
  expire_locked(now());
  std::vector<PendingRequest> out;
  for (const auto& [id, r] : requests_) {
    if (r.decision == Decision::pending) out.push_back(r);
  }
  return out;
}

std::vector<PendingRequest> ApprovalQueue::requests() {
  std::lock_guard lock(mu_);
  expire_locked(now());
  std::vector<PendingRequest> out;
  for (const auto& [id, r] : requests_) out.push_back(r);
  return out;
}

std::optional<PendingRequest> ApprovalQueue::find(std::uint64_t id) {
  std::lock_guard lock(mu_);
  expire_locked(now());
  auto it = requests_.find(id);
  if (it == requests_.end()) return std::nullopt;
  return it->second;
}

std::vector<Notification> ApprovalQueue::notifications() {
  std::lock_guard lock(mu_);
  const auto cutoff = now() - options_.retention;
  std::erase_if(notifications_, [&](const Notification& n) { return n.at < cutoff; });
  return notifications_;
}

std::size_t ApprovalQueue::approvals() const {
  std::lock_guard lock(mu_);
  return approvals_;
}

int ApprovalQueue::add_observer(Observer o) {
  std::lock_guard lock(mu_);
  observers_[next_observer_] = std::move(o);
  return next_observer_++;
}

void ApprovalQueue::remove_observer(int id) {
  std::lock_guard lock(mu_);
  observers_.erase(id);
}

}  // namespace twofe
