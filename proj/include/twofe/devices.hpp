#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "twofe/approval.hpp"
#include "twofe/device_state.hpp"
#include "twofe/file_crypto.hpp"
#include "twofe/session.hpp"
#include "twofe/shared_randomness.hpp"
#include "twofe/transport.hpp"
#include "twofe/tprf.hpp"

namespace twofe {

// Accumulates time spent in local cryptographic computation, so a benchmark
// can split a derivation into compute and communication.
class ComputeMeter {
 public:
  void add(std::chrono::nanoseconds d) {
    std::lock_guard lock(mu_);
    total_ += d;
  }
  std::chrono::nanoseconds total() const {
    std::lock_guard lock(mu_);
    return total_;
  }
  void reset() {
    std::lock_guard lock(mu_);
    total_ = {};
  }

 private:
  mutable std::mutex mu_;
  std::chrono::nanoseconds total_{};
};

class ComputeScope {
 public:
  explicit ComputeScope(ComputeMeter* meter) : meter_(meter), start_(std::chrono::steady_clock::now()) {}
  ~ComputeScope() {
    if (meter_) meter_->add(std::chrono::steady_clock::now() - start_);
  }
  ComputeScope(const ComputeScope&) = delete;
  ComputeScope& operator=(const ComputeScope&) = delete;

 private:
  ComputeMeter* meter_;
  std::chrono::steady_clock::time_point start_;
};

// Short authentication string both devices display during pairing.
std::string pairing_sas(ByteView primary_identity, ByteView secondary_identity, ByteView primary_nonce,
                        ByteView secondary_nonce);

// A new, unenrolled device state with a fresh identity.
DeviceState fresh_device_state(Role role);

enum class ReplaceMode : std::uint8_t { migrate, recover };
std::string_view replace_mode_name(ReplaceMode m);
ReplaceMode parse_replace_mode(std::string_view s);

struct DeviceOptions {
  // Persisted after every state change when set.
  std::optional<std::filesystem::path> state_path;
  ApprovalPolicy policy;
  ApprovalQueue* approvals = nullptr;  // a private queue is created when null
  ComputeMeter* meter = nullptr;
  // Runs before each derivation's clock starts (benchmark cache control).
  std::function<void()> before_derivation;
  // User confirmation that both screens show the same pairing code.
  std::function<bool(const std::string& sas)> confirm_sas;
  std::string listen_address;
};

// Common plumbing: state, persistence, approvals and the peer checks.
class Device : public Endpoint {
 public:
  Device(Role role, Network& network, DeviceOptions options);
  Device(DeviceState state, Network& network, DeviceOptions options);
  ~Device() override;

  // A copy of the current state (what a thief would image).
  DeviceState snapshot() const;
  const Identity& identity() const { return identity_; }
  Bytes identity_key() const { return identity_.public_bytes(); }
  const std::string& device_id() const { return device_id_; }
  const std::string& address() const { return network_.self(); }
  ApprovalQueue& approvals() { return *approvals_; }
  ApprovalPolicy& policy() { return options_.policy; }
  // Replaces the network view (a stolen device moved elsewhere, for instance).
  Network& network() { return network_; }

  // Kills the cloud session of `target` (a device id, "primary", "secondary",
  // or empty for this device).
  void invalidate(const std::string& target);

 protected:
  void save();  // caller holds mu_
  Message cloud_request(Message m);
  Message peer_request(Message m);
  bool from_cloud(const PeerInfo& from) const;
  bool from_peer(const PeerInfo& from) const;
  Message handle_auth_ping(const Message& m);
  void pin(const std::string& address, const Bytes& identity);

  mutable std::mutex mu_;
  DeviceState state_;
  Identity identity_;
  std::string device_id_;
  Network& network_;
  DeviceOptions options_;
  std::unique_ptr<ApprovalQueue> own_approvals_;
  ApprovalQueue* approvals_;
};

// The file-accessing device. Holds k_C; drives every flow.
class PrimaryDevice : public Device {
 public:
  PrimaryDevice(Network& network, DeviceOptions options);
  PrimaryDevice(DeviceState state, Network& network, DeviceOptions options);

  std::optional<Message> handle(const Message& m, const PeerInfo& from) override;

  // Account and enrollment.
  void create_account(const std::string& cloud_address, const Bytes& cloud_identity, const std::string& account,
                      const std::string& password, const std::string& recovery_secret);
  void login(const std::string& cloud_address, const Bytes& cloud_identity, const std::string& account,
             const std::string& password);
  // Forgotten password: proves identity with the recovery secret, sets a new
  // password and logs in with it.
  void reset_password(const std::string& account, const std::string& new_password,
                      const std::string& recovery_secret);
  // Pairs with the secondary at `address` and runs enrollment.
  void enroll(const std::string& secondary_address);

  // File flows.
  FileTag encrypt(const std::string& name, ByteView data);
  Bytes decrypt(const std::string& name_or_tag);
  Bytes decrypt_tag(const FileTag& tag);
  std::map<std::string, FileTag> list();
  void remove(const std::string& name);
  void restore(const std::string& name);

  void refresh();

  // Replaces the secondary with the (fresh) secondary at `new_address`.
  void replace_secondary(const std::string& new_address, ReplaceMode mode, const std::string& recovery_secret = {});
  // Run on a fresh primary: takes over the account from the old primary,
  // with the existing secondary's help.
  void replace_primary(const std::string& cloud_address, const Bytes& cloud_identity, const std::string& account,
                       const std::string& secondary_address, ReplaceMode mode,
                       const std::string& recovery_secret = {});

  struct Timing {
    double derive_ms = 0;
    double compute_ms = 0;
    std::size_t peer_messages = 0;  // primary<->secondary messages in the derivation
  };
  const Timing& last_timing() const { return timing_; }

 private:
  struct Fresh {
    Seed seed{};
    DerivedKey key;
  };
  Fresh derive_fresh(const FileTag& tag);
  DerivedKey derive_existing(const FileTag& tag, const Seed& seed);
  DerivedKey finish_derivation(ProtocolSession& session, const FileTag& tag, const Seed& seed);
  std::string pair(const std::string& address, const std::string& role, Bytes& peer_identity,
                   std::string& peer_device_id);
  Catalog load_catalog();
  void store_catalog(const Catalog& c);
  void wrap_catalog_key();
  void unwrap_catalog_key(ByteView wrap_seed, ByteView sealed_key);
  FileTag resolve(const std::string& name_or_tag);
  void recovery_credentials(ReplaceMode mode, const std::string& recovery_secret, ByteView binding, Bytes& nonce,
                            Bytes& proof);

  Timing timing_;
};

// The assisting device. Holds k_D; answers derivation requests under its
// approval policy.
class SecondaryDevice : public Device {
 public:
  SecondaryDevice(Network& network, DeviceOptions options);
  SecondaryDevice(DeviceState state, Network& network, DeviceOptions options);

  std::optional<Message> handle(const Message& m, const PeerInfo& from) override;

  // Malware hook: replaces k_D in derivation answers.
  void set_share_override(std::function<Scalar(const Scalar&)> f) { share_override_ = std::move(f); }
  // Malware hook: picks this device's coin-toss share.
  void set_coin_override(std::function<Bytes()> f) { coin_override_ = std::move(f); }
  // Session lookups for tests.
  std::size_t open_sessions() const;

  static constexpr std::chrono::seconds kSessionTimeout{30};

 private:
  Message on_pair_hello(const Message& m, const PeerInfo& from);
  Message on_pair_confirm(const Message& m, const PeerInfo& from);
  Message on_enroll_shares(const Message& m, const PeerInfo& from);
  Message on_refresh_delta(const Message& m, const PeerInfo& from);
  Message on_sr_commit(const Message& m, const PeerInfo& from);
  void on_sr_reveal(const Message& m, const PeerInfo& from);
  Message on_tprf_req(const Message& m, const PeerInfo& from);
  Message on_recover_join(const Message& m, const PeerInfo& from);
  Message on_recover_start(const Message& m, const PeerInfo& from);
  std::optional<std::string> filename_for(const FileTag& tag);
  void sweep_locked();

  struct PendingPairing {
    std::string role;
    std::string device_id;
    Bytes identity;
    Bytes peer_nonce;
    Bytes own_nonce;
    bool confirmed = false;
    std::string address;
  };
  struct SrEntry {
    std::unique_ptr<ProtocolSession> session;
    std::unique_ptr<SeedSession> seed;
  };

  std::optional<PendingPairing> pairing_;
  std::map<SessionId, SrEntry> sessions_;
  std::map<SessionId, ProtocolSession::Clock::time_point> closed_;
  std::optional<std::pair<std::uint32_t, Scalar>> staged_delta_;
  std::function<Scalar(const Scalar&)> share_override_;
  std::function<Bytes()> coin_override_;
};

}  // namespace twofe
