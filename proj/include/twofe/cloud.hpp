#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "twofe/approval.hpp"
#include "twofe/device_state.hpp"
#include "twofe/file_crypto.hpp"
#include "twofe/transport.hpp"

namespace twofe {

// Ciphertext storage backend. Keys are opaque strings chosen by the cloud.
class BlobStore {
 public:
  virtual ~BlobStore() = default;
  virtual void put(const std::string& key, ByteView data) = 0;
  virtual std::optional<Bytes> get(const std::string& key) = 0;
  virtual void erase(const std::string& key) = 0;
};

class MemoryBlobStore : public BlobStore {
 public:
  void put(const std::string& key, ByteView data) override;
  std::optional<Bytes> get(const std::string& key) override;
  void erase(const std::string& key) override;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Bytes> blobs_;
};

// One file per blob under a directory; writes are atomic renames.
class DirectoryBlobStore : public BlobStore {
 public:
  explicit DirectoryBlobStore(std::filesystem::path root);
  void put(const std::string& key, ByteView data) override;
  std::optional<Bytes> get(const std::string& key) override;
  void erase(const std::string& key) override;

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path root_;
};

// Pass-through to an external object store reached through three callbacks
// (for example a vendor SDK). Keys are namespaced with a fixed prefix.
class ExternalBlobStore : public BlobStore {
 public:
  struct Client {
    std::function<void(const std::string&, ByteView)> upload;
    std::function<std::optional<Bytes>(const std::string&)> download;
    std::function<void(const std::string&)> remove;
  };
  ExternalBlobStore(Client client, std::string prefix);
  void put(const std::string& key, ByteView data) override;
  std::optional<Bytes> get(const std::string& key) override;
  void erase(const std::string& key) override;

 private:
  Client client_;
  std::string prefix_;
};

struct CloudOptions {
  std::chrono::seconds token_ttl = std::chrono::hours(24 * 30);
  std::chrono::seconds trash_retention = std::chrono::hours(24 * 30);
  int verification_attempts = 3;
  std::chrono::seconds recovery_lockout = std::chrono::hours(1);
  // Argon2id cost for the login verifier. Tests lower these.
  unsigned long long pwhash_opslimit = 2;
  std::size_t pwhash_memlimit = std::size_t{64} << 20;
  // Journal and snapshot directory; in-memory only when unset.
  std::optional<std::filesystem::path> data_dir;
  std::function<SystemClock::time_point()> now;
};

// Proof the user presents to the identity-verification stub:
// HMAC-SHA256(recovery_key, nonce || account || binding).
Bytes recovery_key_from_secret(std::string_view secret);
Bytes verification_proof(ByteView recovery_key, ByteView nonce, std::string_view account, ByteView binding);
// The labelled forms the cloud checks for device recovery and password reset.
Bytes recovery_proof(ByteView recovery_key, ByteView nonce, std::string_view account, ByteView new_identity);
Bytes password_reset_proof(ByteView recovery_key, ByteView nonce, std::string_view account,
                           std::string_view new_password);

// The untrusted storage service: ciphertext store, recovery vault, tokens,
// trash bin and the identity-verification stub.
class CloudService : public Endpoint {
 public:
  CloudService(CloudOptions options, std::unique_ptr<BlobStore> blobs);
  ~CloudService() override;

  // Outgoing channel for AUTH_PING.
  void set_network(Network* network) { network_ = network; }

  std::optional<Message> handle(const Message& m, const PeerInfo& from) override;

  // Inspection for tests and scenarios.
  struct VaultView {
    bool enrolled = false;
    std::uint32_t epoch = 0;
    std::optional<Scalar> primary;
    std::optional<Scalar> secondary;
  };
  VaultView vault(const std::string& account);
  // Every vault scalar ever deposited for the account, in arrival order.
  std::vector<Scalar> vault_history(const std::string& account);
  // Number of vault scalars handed out by SHARE_FETCH.
  std::size_t releases(const std::string& account);
  bool token_live(ByteView token);
  std::size_t file_count(const std::string& account, bool include_trash = false);
  void purge_expired();

 private:
  struct DeviceRecord {
    std::string device_id;
    Role role = Role::primary;
    std::string address;
    Bytes identity;
    Bytes token;
    std::int64_t token_expiry_ms = 0;
  };
  struct StoredFile {
    Seed seed{};
    std::int64_t uploaded_ms = 0;
    std::optional<std::int64_t> deleted_ms;
  };
  struct RecoveryRecord {
    std::string id;
    Role role = Role::primary;
    std::string mode;
    Bytes binding;
    std::string address;
    std::string state;  // approved, denied, failed, released
    std::int64_t created_ms = 0;
  };
  struct Account {
    std::mutex mu;
    std::string id;
    std::string verifier;
    Bytes recovery_key;
    std::map<std::string, DeviceRecord> devices;
    bool enrolled = false;
    std::uint32_t epoch = 0;
    std::map<std::uint32_t, std::map<Role, Scalar>> staged;
    std::map<Role, Scalar> vault;
    std::vector<Scalar> vault_history;
    Bytes wrap_seed;
    Bytes sealed_catalog_key;
    std::map<std::string, StoredFile> files;  // tag hex
    std::map<std::string, RecoveryRecord> recoveries;
    std::set<std::string> nonces;
    int failed_verifications = 0;
    std::int64_t locked_until_ms = 0;
    std::size_t releases = 0;
  };
  struct Caller {
    std::shared_ptr<Account> account;
    std::string device_id;
    Role role;
  };

  std::int64_t now_ms() const;
  std::shared_ptr<Account> find_account(const std::string& id);
  Caller authenticate(const Bytes& token);
  DeviceRecord* device_with_role(Account& a, Role role);
  Bytes issue_token(Account& a, DeviceRecord& d);
  std::string blob_key(const Account& a, const std::string& tag_hex) const;
  void purge_locked(Account& a);
  void persist(const Account& a);
  void load();

  Message on_account_create(const Message& m);
  Message on_login(const Message& m);
  Message on_register_device(const Message& m);
  Message on_session_invalidate(const Message& m);
  Message on_password_reset(const Message& m);
  Message on_vault_put(const Message& m);
  Message on_vault_catalog_put(const Message& m);
  Message on_file_put(const Message& m);
  Message on_file_get(const Message& m);
  Message on_file_delete(const Message& m, bool undelete);
  Message on_file_list(const Message& m);
  Message on_catalog_put(const Message& m);
  Message on_catalog_get(const Message& m);
  Message on_verify_challenge(const Message& m);
  Message on_recover_req(const Message& m);
  Message on_recover_query(const Message& m);
  Message on_share_fetch(const Message& m, const PeerInfo& from);

  bool consume_verification(Account& a, ByteView nonce, ByteView binding, ByteView proof, std::string_view label);

  CloudOptions options_;
  std::unique_ptr<BlobStore> blobs_;
  Network* network_ = nullptr;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Account>> accounts_;
  std::map<std::string, std::string> tokens_;  // token hex -> account id
  std::mutex journal_mu_;
};

}  // namespace twofe
