#include "twofe/cloud.hpp"

#include <sodium.h>

#include <algorithm>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "twofe/error.hpp"
#include "twofe/hashing.hpp"
#include "twofe/random.hpp"
#include "twofe/tcp_transport.hpp"

namespace twofe {

using nlohmann::json;

// ---- blob stores ----

void MemoryBlobStore::put(const std::string& key, ByteView data) {
  std::lock_guard lock(mu_);
  blobs_[key] = Bytes(data.begin(), data.end());
}

std::optional<Bytes> MemoryBlobStore::get(const std::string& key) {
  std::lock_guard lock(mu_);
  auto it = blobs_.find(key);
  if (it == blobs_.end()) return std::nullopt;
  return it->second;
}

void MemoryBlobStore::erase(const std::string& key) {
  std::lock_guard lock(mu_);
  blobs_.erase(key);
}

std::size_t MemoryBlobStore::size() const {
  std::lock_guard lock(mu_);
  return blobs_.size();
}

DirectoryBlobStore::DirectoryBlobStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path DirectoryBlobStore::path_for(const std::string& key) const {
  const bool safe = !key.empty() && std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || c == '/';
  });
  if (!safe || key.front() == '/' || key.find("//") != std::string::npos) {
    throw Error(ErrorCode::internal, "unsafe blob key");
  }
  return root_ / key;
}

void DirectoryBlobStore::put(const std::string& key, ByteView data) {
  const auto path = path_for(key);
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::io, "cannot write blob " + key);
  }
  std::filesystem::rename(tmp, path);
}

std::optional<Bytes> DirectoryBlobStore::get(const std::string& key) {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void DirectoryBlobStore::erase(const std::string& key) {
  std::error_code ec;
  std::filesystem::remove(path_for(key), ec);
}

ExternalBlobStore::ExternalBlobStore(Client client, std::string prefix)
    : client_(std::move(client)), prefix_(std::move(prefix)) {}

void ExternalBlobStore::put(const std::string& key, ByteView data) { client_.upload(prefix_ + key, data); }
std::optional<Bytes> ExternalBlobStore::get(const std::string& key) { return client_.download(prefix_ + key); }
void ExternalBlobStore::erase(const std::string& key) { client_.remove(prefix_ + key); }

// ---- verification ----

Bytes recovery_key_from_secret(std::string_view secret) {
  const std::array<ByteView, 1> parts{ByteView(reinterpret_cast<const std::uint8_t*>(secret.data()), secret.size())};
  const auto d = tagged_sha256("2FE-RECOVERY", parts);
  return Bytes(d.begin(), d.end());
}

Bytes verification_proof(ByteView recovery_key, ByteView nonce, std::string_view account, ByteView binding) {
  ByteWriter w;
  w.field(nonce).field(account).field(binding);
  const auto mac = hmac_sha256(recovery_key, w.bytes());
  return Bytes(mac.begin(), mac.end());
}

Bytes recovery_proof(ByteView recovery_key, ByteView nonce, std::string_view account, ByteView new_identity) {
  return verification_proof(recovery_key, nonce, account, concat({to_bytes("recover"), new_identity}));
}

Bytes password_reset_proof(ByteView recovery_key, ByteView nonce, std::string_view account,
                           std::string_view new_password) {
  return verification_proof(recovery_key, nonce, account, concat({to_bytes("password-reset"), to_bytes(new_password)}));
}

// ---- service ----

namespace {

constexpr std::string_view kPasswordResetLabel = "password-reset";

Role parse_role(std::uint8_t r) {
  if (r != 1 && r != 2) throw Error(ErrorCode::invalid_encoding, "bad role");
  return static_cast<Role>(r);
}

Bytes token_field(const Message& m) { return m.field("token"); }

}  // namespace

CloudService::CloudService(CloudOptions options, std::unique_ptr<BlobStore> blobs)
    : options_(std::move(options)), blobs_(std::move(blobs)) {
  ensure_crypto_init();
  if (!blobs_) blobs_ = std::make_unique<MemoryBlobStore>();
  if (options_.data_dir) load();
}

CloudService::~CloudService() = default;

std::int64_t CloudService::now_ms() const {
  const auto t = options_.now ? options_.now() : SystemClock::now();
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

std::shared_ptr<CloudService::Account> CloudService::find_account(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = accounts_.find(id);
  if (it == accounts_.end()) throw Error(ErrorCode::unknown_account, id);
  return it->second;
}

CloudService::Caller CloudService::authenticate(const Bytes& token) {
  std::shared_ptr<Account> account;
  {
    std::lock_guard lock(mu_);
    auto it = tokens_.find(to_hex(token));
    if (token.empty() || it == tokens_.end()) throw Error(ErrorCode::bad_token, "session token not recognized");
    account = accounts_.at(it->second);
  }
  std::lock_guard lock(account->mu);
  for (const auto& [id, d] : account->devices) {
    if (!d.token.empty() && constant_time_equal(d.token, token)) {
      if (now_ms() > d.token_expiry_ms) throw Error(ErrorCode::bad_token, "session expired");
      return {account, id, d.role};
    }
  }
  throw Error(ErrorCode::bad_token, "session was invalidated");
}

CloudService::DeviceRecord* CloudService::device_with_role(Account& a, Role role) {
  for (auto& [id, d] : a.devices) {
    if (d.role == role) return &d;
  }
  return nullptr;
}

Bytes CloudService::issue_token(Account& a, DeviceRecord& d) {
  std::lock_guard lock(mu_);
  if (!d.token.empty()) tokens_.erase(to_hex(d.token));
  d.token = random_vector(32);
  d.token_expiry_ms = now_ms() + std::chrono::duration_cast<std::chrono::milliseconds>(options_.token_ttl).count();
  tokens_[to_hex(d.token)] = a.id;
  return d.token;
}

std::string CloudService::blob_key(const Account& a, const std::string& tag_hex) const {
  const auto d = sha256(to_bytes(a.id));
  return to_hex(ByteView(d).first(8)) + "/" + tag_hex;
}

std::optional<Message> CloudService::handle(const Message& m, const PeerInfo& from) {
  using T = MessageType;
  switch (m.type) {
    case T::account_create: return on_account_create(m);
    case T::login: return on_login(m);
    case T::register_device: return on_register_device(m);
    case T::session_invalidate: return on_session_invalidate(m);
    case T::password_reset: return on_password_reset(m);
    case T::vault_put: return on_vault_put(m);
    case T::vault_catalog_put: return on_vault_catalog_put(m);
    case T::file_put: return on_file_put(m);
    case T::file_get: return on_file_get(m);
    case T::file_delete: return on_file_delete(m, false);
    case T::file_undelete: return on_file_delete(m, true);
    case T::file_list: return on_file_list(m);
    case T::catalog_put: return on_catalog_put(m);
    case T::catalog_get: return on_catalog_get(m);
    case T::verify_challenge: return on_verify_challenge(m);
    case T::recover_req: return on_recover_req(m);
    case T::recover_query: return on_recover_query(m);
    case T::share_fetch: return on_share_fetch(m, from);
    default:
      throw Error(ErrorCode::protocol_order, "cloud does not accept " + std::string(message_name(m.type)));
  }
}

Message CloudService::on_account_create(const Message& m) {
  const std::string id = m.text("account");
  const std::string password = m.text("password");
  const Bytes& recovery_key = m.field("recovery_key");
  if (id.empty() || password.empty()) throw Error(ErrorCode::usage, "account and password are required");
  if (recovery_key.size() != 32) throw Error(ErrorCode::bad_length, "recovery key must be 32 bytes");
  auto a = std::make_shared<Account>();
  a->id = id;
  a->recovery_key = recovery_key;
  char verifier[crypto_pwhash_STRBYTES];
  if (crypto_pwhash_str(verifier, password.data(), password.size(), options_.pwhash_opslimit,
                        options_.pwhash_memlimit) != 0) {
    throw Error(ErrorCode::internal, "password hashing failed");
  }
  a->verifier = verifier;
  {
    std::lock_guard lock(mu_);
    if (accounts_.contains(id)) throw Error(ErrorCode::account_exists, id);
    accounts_[id] = a;
  }
  std::lock_guard lock(a->mu);
  persist(*a);
  return ok_message(m.flow, m.session);
}

Message CloudService::on_login(const Message& m) {
  auto a = find_account(m.text("account"));
  const std::string password = m.text("password");
  const std::string device_id = m.text("device_id");
  const Role role = parse_role(m.u8("role"));
  std::lock_guard lock(a->mu);
  if (crypto_pwhash_str_verify(a->verifier.c_str(), password.data(), password.size()) != 0) {
    throw Error(ErrorCode::auth_failure, "wrong account or password");
  }
  auto it = a->devices.find(device_id);
  if (it == a->devices.end()) {
    if (device_with_role(*a, role) != nullptr) {
      throw Error(ErrorCode::auth_failure, "the " + std::string(role_name(role)) +
                                               " role is bound to another device; use migrate or recover");
    }
    DeviceRecord d;
    d.device_id = device_id;
    d.role = role;
    d.identity = m.field("identity");
    it = a->devices.emplace(device_id, std::move(d)).first;
  } else if (it->second.role != role ||
             (!it->second.identity.empty() && !constant_time_equal(it->second.identity, m.field("identity")))) {
    throw Error(ErrorCode::auth_failure, "device identity does not match the registered device");
  }
  it->second.address = m.text("address");
  const Bytes token = issue_token(*a, it->second);
  persist(*a);
  return make_message(MessageType::session_grant, m.flow, m.session,
                      {token, be32(static_cast<std::uint32_t>(options_.token_ttl.count()))});
}

Message CloudService::on_register_device(const Message& m) {
  const Caller c = authenticate(token_field(m));
  if (c.role != Role::primary) throw Error(ErrorCode::auth_failure, "only the primary registers devices");
  const Role role = parse_role(m.u8("role"));
  if (role != Role::secondary) throw Error(ErrorCode::usage, "only a secondary can be registered");
  Account& a = *c.account;
  std::lock_guard lock(a.mu);
  if (a.enrolled) throw Error(ErrorCode::duplicate_enrollment, "account " + a.id + " is already enrolled");
  if (auto* old = device_with_role(a, Role::secondary)) {
    std::lock_guard glock(mu_);
    tokens_.erase(to_hex(old->token));
    a.devices.erase(old->device_id);
  }
  DeviceRecord d;
  d.device_id = m.text("device_id");
  d.role = role;
  d.address = m.text("address");
  d.identity = m.field("identity");
  auto& rec = a.devices[d.device_id] = std::move(d);
  const Bytes token = issue_token(a, rec);
  persist(a);
  return make_message(MessageType::session_grant, m.flow, m.session,
                      {token, be32(static_cast<std::uint32_t>(options_.token_ttl.count()))});
}

Message CloudService::on_session_invalidate(const Message& m) {
  const Caller c = authenticate(token_field(m));
  Account& a = *c.account;
  std::string target = m.text("device_id");
  if (target.empty()) target = c.device_id;
  std::lock_guard lock(a.mu);
  if (target == "primary" || target == "secondary") {
    DeviceRecord* d = device_with_role(a, target == "primary" ? Role::primary : Role::secondary);
    if (!d) throw Error(ErrorCode::usage, "no " + target + " on this account");
    target = d->device_id;
  }
  auto it = a.devices.find(target);
  if (it == a.devices.end()) throw Error(ErrorCode::usage, "no device " + target + " on this account");
  {
    std::lock_guard glock(mu_);
    tokens_.erase(to_hex(it->second.token));
  }
  secure_wipe(it->second.token);
  persist(a);
  return ok_message(m.flow, m.session);
}

bool CloudService::consume_verification(Account& a, ByteView nonce, ByteView binding, ByteView proof,
                                        std::string_view label) {
  const std::int64_t now = now_ms();
  if (a.locked_until_ms > now) throw Error(ErrorCode::recovery_locked, "too many failed verifications");
  bool ok = false;
  auto it = a.nonces.find(to_hex(nonce));
  if (it != a.nonces.end()) {
    a.nonces.erase(it);
    ByteWriter b;
    b.raw(to_bytes(label)).raw(binding);
    const Bytes expected = verification_proof(a.recovery_key, nonce, a.id, b.bytes());
    ok = constant_time_equal(expected, proof);
  }
  if (ok) {
    a.failed_verifications = 0;
    return true;
  }
  if (++a.failed_verifications >= options_.verification_attempts) {
    a.failed_verifications = 0;
    a.locked_until_ms = now + std::chrono::duration_cast<std::chrono::milliseconds>(options_.recovery_lockout).count();
  }
  return false;
}

Message CloudService::on_password_reset(const Message& m) {
  auto a = find_account(m.text("account"));
  const std::string password = m.text("password");
  if (password.empty()) throw Error(ErrorCode::usage, "password is required");
  std::lock_guard lock(a->mu);
  const bool ok = consume_verification(*a, m.field("nonce"), m.field("password"), m.field("proof"),
                                       kPasswordResetLabel);
  persist(*a);
  if (!ok) throw Error(ErrorCode::verification_failed, "identity verification failed");
  char verifier[crypto_pwhash_STRBYTES];
  if (crypto_pwhash_str(verifier, password.data(), password.size(), options_.pwhash_opslimit,
                        options_.pwhash_memlimit) != 0) {
    throw Error(ErrorCode::internal, "password hashing failed");
  }
  a->verifier = verifier;
  persist(*a);
  return ok_message(m.flow, m.session);
}

Message CloudService::on_vault_put(const Message& m) {
  const Caller c = authenticate(token_field(m));
  const std::uint32_t epoch = m.u32("epoch");
  const Scalar share = Scalar::decode(m.field("sub_share"));
  Account& a = *c.account;
  std::lock_guard lock(a.mu);
  if (a.enrolled && epoch == 0) throw Error(ErrorCode::duplicate_enrollment, "account " + a.id + " is already enrolled");
  const std::uint32_t expected = a.enrolled ? a.epoch + 1 : 0;
  if (epoch != expected) {
    throw Error(ErrorCode::protocol_order, "vault epoch " + std::to_string(epoch) + ", expected " +
                                               std::to_string(expected));
  }
  a.staged[epoch][c.role] = share;
  a.vault_history.push_back(share);
  if (a.staged[epoch].size() == 2) {
    for (auto& [role, s] : a.vault) s.wipe();
    a.vault = a.staged[epoch];
    a.epoch = epoch;
    a.enrolled = true;
    a.staged.clear();
  }
  persist(a);
  return ok_message(m.flow, m.session);
}

Message CloudService::on_vault_catalog_put(const Message& m) {
  const Caller c = authenticate(token_field(m));
  if (c.role != Role::primary) throw Error(ErrorCode::auth_failure, "only the primary deposits the catalog key");
  Account& a = *c.account;
  std::lock_guard lock(a.mu);
  a.wrap_seed = m.field("wrap_seed");
  a.sealed_catalog_key = m.field("sealed_key");
  persist(a);
  return ok_message(m.flow, m.session);
}

void CloudService::purge_locked(Account& a) {
  const std::int64_t cutoff =
      now_ms() - std::chrono::duration_cast<std::chrono::milliseconds>(options_.trash_retention).count();
  bool changed = false;
  for (auto it = a.files.begin(); it != a.files.end();) {
    if (it->second.deleted_ms && *it->second.deleted_ms < cutoff) {
      blobs_->erase(blob_key(a, it->first));
      it = a.files.erase(it);
      changed = true;
    } else {
      ++it;
    }
  }
  if (changed) persist(a);
}

void CloudService::purge_expired() {
  std::vector<std::shared_ptr<Account>> all;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, a] : accounts_) all.push_back(a);
  }
  for (auto& a : all) {
    std::lock_guard lock(a->mu);
    purge_locked(*a);
  }
}

Message CloudService::on_file_put(const Message& m) {
  const Caller c = authenticate(token_field(m));
  const FileTag tag = to_array<16>(m.field("tag"));
  const Seed seed = to_array<32>(m.field("seed"));
  if (is_reserved_tag(tag)) throw Error(ErrorCode::tag_exists, "reserved tag");
  FileRecord record;
  record.tag = tag;
  record.seed = seed;
  {
    ByteReader r(m.field("ciphertext"));
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) record.chunks.push_back(r.field());
    r.expect_end();
  }
  Account& a = *c.account;
  std::lock_guard lock(a.mu);
  purge_locked(a);
  const std::string key = to_hex(tag);
  if (a.files.contains(key)) throw Error(ErrorCode::tag_exists, key);
  blobs_->put(blob_key(a, key), record.encode());
  a.files[key] = StoredFile{seed, now_ms(), std::nullopt};
  persist(a);
  return ok_message(m.flow, m.session);
}

Message CloudService::on_file_get(const Message& m) {
  const Caller c = authenticate(token_field(m));
  const FileTag tag = to_array<16>(m.field("tag"));
  Account& a = *c.account;
  std::optional<Bytes> blob;
  {
    std::lock_guard lock(a.mu);
    purge_locked(a);
    auto it = a.files.find(to_hex(tag));
    if (it == a.files.end() || it->second.deleted_ms) throw Error(ErrorCode::unknown_tag, to_hex(tag));
    blob = blobs_->get(blob_key(a, it->first));
  }
  if (!blob) throw Error(ErrorCode::io, "blob missing for " + to_hex(tag));
  const FileRecord record = FileRecord::decode(*blob);
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(record.chunks.size()));
  for (const auto& ch : record.chunks) w.field(ch);
  return make_message(MessageType::file_data, m.flow, m.session, {to_bytes(record.tag), to_bytes(record.seed), w.take()});
}

Message CloudService::on_file_delete(const Message& m, bool undelete) {
  const Caller c = authenticate(token_field(m));
  const std::string key = to_hex(m.field("tag"));
  Account& a = *c.account;
  std::lock_guard lock(a.mu);
  purge_locked(a);
  auto it = a.files.find(key);
  if (it == a.files.end()) throw Error(ErrorCode::unknown_tag, key);
  if (undelete) {
    if (!it->second.deleted_ms) throw Error(ErrorCode::unknown_tag, key + " is not in the trash");
    it->second.deleted_ms.reset();
  } else {
    if (it->second.deleted_ms) throw Error(ErrorCode::unknown_tag, key + " is already deleted");
    it->second.deleted_ms = now_ms();
  }
  persist(a);
  return ok_message(m.flow, m.session);
}

Message CloudService::on_file_list(const Message& m) {
  const Caller c = authenticate(token_field(m));
  Account& a = *c.account;
  std::lock_guard lock(a.mu);
  purge_locked(a);
  ByteWriter w;
  for (const auto& [key, f] : a.files) {
    if (!f.deleted_ms) w.raw(from_hex(key));
  }
  return make_message(MessageType::file_listing, m.flow, m.session, {w.take()});
}

Message CloudService::on_catalog_put(const Message& m) {
  const Caller c = authenticate(token_field(m));
  Account& a = *c.account;
  std::lock_guard lock(a.mu);
  blobs_->put(blob_key(a, to_hex(kCatalogTag)), m.field("blob"));
  return ok_message(m.flow, m.session);
}

Message CloudService::on_catalog_get(const Message& m) {
  const Caller c = authenticate(token_field(m));
  Account& a = *c.account;
  std::lock_guard lock(a.mu);
  auto blob = blobs_->get(blob_key(a, to_hex(kCatalogTag)));
  return make_message(MessageType::catalog_data, m.flow, m.session, {blob.value_or(Bytes{})});
}

Message CloudService::on_verify_challenge(const Message& m) {
  auto a = find_account(m.text("account"));
  std::lock_guard lock(a->mu);
  const Bytes nonce = random_vector(32);
  if (a->nonces.size() >= 16) a->nonces.erase(a->nonces.begin());
  a->nonces.insert(to_hex(nonce));
  return make_message(MessageType::verify_nonce, m.flow, m.session, {nonce});
}

Message CloudService::on_recover_req(const Message& m) {
  const Caller c = authenticate(token_field(m));
  Account& a = *c.account;
  const Role role = parse_role(m.u8("role"));
  const std::string mode = m.text("mode");
  const Bytes binding = m.field("binding");
  const std::string address = m.text("address");
  if (mode != "migrate" && mode != "recover") throw Error(ErrorCode::usage, "mode must be migrate or recover");
  if (binding.size() != 32) throw Error(ErrorCode::bad_length, "binding must be a 32-byte device identity");

  RecoveryRecord rec;
  std::optional<DeviceRecord> old;
  {
    std::lock_guard lock(a.mu);
    if (!a.enrolled) throw Error(ErrorCode::not_enrolled, a.id);
    if (a.locked_until_ms > now_ms()) throw Error(ErrorCode::recovery_locked, "too many failed verifications");
    if (auto* d = device_with_role(a, role)) old = *d;
    rec.id = to_hex(random_vector(16));
    rec.role = role;
    rec.mode = mode;
    rec.binding = binding;
    rec.address = address;
    rec.created_ms = now_ms();
  }

  // Ask the device being replaced. Any answer proves it is alive.
  bool responded = false;
  std::optional<Message> answer;
  if (old && !old->address.empty() && network_ != nullptr) {
    if (auto* tcp = dynamic_cast<TcpNetwork*>(network_); tcp != nullptr && !old->identity.empty()) {
      tcp->pin(old->address, old->identity);
    }
    const Message ping = make_message(MessageType::auth_ping, Flow::recover, m.session,
                                      {to_bytes(rec.id), u8_field(static_cast<std::uint8_t>(role)), to_bytes(mode),
                                       binding, to_bytes(address)});
    try {
      answer = network_->request(old->address, ping);
      responded = true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::peer_unreachable && e.code() != ErrorCode::timeout) throw;
    }
  }

  std::lock_guard lock(a.mu);
  std::optional<Error> failure;
  if (mode == "migrate") {
    if (!responded) {
      failure = Error(ErrorCode::old_device_unreachable, "the old device did not answer; use recover");
    } else if (answer->type == MessageType::auth_approve && to_string(answer->field("recovery_id")) == rec.id &&
               constant_time_equal(answer->field("binding"), binding)) {
      rec.state = "approved";
    } else {
      failure = Error(ErrorCode::approval_denied, "the old device denied the migration");
    }
  } else {
    if (responded) {
      failure = Error(ErrorCode::old_device_responded, "the old device is alive; use migrate");
    } else if (consume_verification(a, m.field("nonce"), binding, m.field("proof"), "recover")) {
      rec.state = "approved";
    } else {
      failure = Error(ErrorCode::verification_failed, "identity verification failed");
    }
  }
  if (failure) rec.state = failure->code() == ErrorCode::approval_denied ? "denied" : "failed";
  a.recoveries[rec.id] = rec;
  persist(a);
  if (failure) throw *failure;
  return make_message(MessageType::recover_status, m.flow, m.session,
                      {to_bytes(rec.id), u8_field(static_cast<std::uint8_t>(role)), to_bytes(rec.state), binding});
}

Message CloudService::on_recover_query(const Message& m) {
  const Caller c = authenticate(token_field(m));
  Account& a = *c.account;
  std::lock_guard lock(a.mu);
  auto it = a.recoveries.find(m.text("recovery_id"));
  if (it == a.recoveries.end()) throw Error(ErrorCode::unknown_request, "no such recovery");
  const auto& r = it->second;
  return make_message(MessageType::recover_status, m.flow, m.session,
                      {to_bytes(r.id), u8_field(static_cast<std::uint8_t>(r.role)), to_bytes(r.state), r.binding});
}

Message CloudService::on_share_fetch(const Message& m, const PeerInfo& from) {
  auto a = find_account(m.text("account"));
  std::lock_guard lock(a->mu);
  auto it = a->recoveries.find(m.text("recovery_id"));
  if (it == a->recoveries.end()) throw Error(ErrorCode::unknown_request, "no such recovery");
  RecoveryRecord& rec = it->second;
  if (rec.state != "approved") throw Error(ErrorCode::auth_failure, "recovery is " + rec.state);
  if (from.identity.empty() || !constant_time_equal(from.identity, rec.binding)) {
    throw Error(ErrorCode::auth_failure, "requesting device is not the one bound to this recovery");
  }
  auto vault = a->vault.find(rec.role);
  if (vault == a->vault.end()) throw Error(ErrorCode::not_enrolled, "vault is empty");

  if (auto* old = device_with_role(*a, rec.role)) {
    {
      std::lock_guard glock(mu_);
      tokens_.erase(to_hex(old->token));
    }
    a->devices.erase(old->device_id);
  }
  DeviceRecord d;
  d.device_id = m.text("device_id");
  d.role = rec.role;
  d.address = m.text("address");
  d.identity = rec.binding;
  auto& stored = a->devices[d.device_id] = std::move(d);
  const Bytes token = issue_token(*a, stored);
  rec.state = "released";
  ++a->releases;
  persist(*a);
  return make_message(MessageType::share_release, m.flow, m.session,
                      {be32(a->epoch), vault->second.encode(), token, a->wrap_seed, a->sealed_catalog_key});
}

// ---- inspection ----

CloudService::VaultView CloudService::vault(const std::string& account) {
  auto a = find_account(account);
  std::lock_guard lock(a->mu);
  VaultView v;
  v.enrolled = a->enrolled;
  v.epoch = a->epoch;
  if (auto it = a->vault.find(Role::primary); it != a->vault.end()) v.primary = it->second;
  if (auto it = a->vault.find(Role::secondary); it != a->vault.end()) v.secondary = it->second;
  return v;
}

std::vector<Scalar> CloudService::vault_history(const std::string& account) {
  auto a = find_account(account);
  std::lock_guard lock(a->mu);
  return a->vault_history;
}

std::size_t CloudService::releases(const std::string& account) {
  auto a = find_account(account);
  std::lock_guard lock(a->mu);
  return a->releases;
}

bool CloudService::token_live(ByteView token) {
  try {
    authenticate(Bytes(token.begin(), token.end()));
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::size_t CloudService::file_count(const std::string& account, bool include_trash) {
  auto a = find_account(account);
  std::lock_guard lock(a->mu);
  return static_cast<std::size_t>(std::count_if(a->files.begin(), a->files.end(), [&](const auto& kv) {
    return include_trash || !kv.second.deleted_ms;
  }));
}

// ---- persistence: full-record upserts appended to a journal, folded into a
// snapshot at startup ----

namespace {

json account_to_json(const std::string& id, const std::string& verifier, ByteView recovery_key,
                     const json& devices, bool enrolled, std::uint32_t epoch, const json& vault, const json& staged,
                     const json& history, ByteView wrap_seed, ByteView sealed, const json& files,
                     const json& recoveries, int failed, std::int64_t locked, std::size_t releases) {
  return json{{"id", id},
              {"verifier", verifier},
              {"recovery_key", to_hex(recovery_key)},
              {"devices", devices},
              {"enrolled", enrolled},
              {"epoch", epoch},
              {"vault", vault},
              {"staged", staged},
              {"history", history},
              {"wrap_seed", to_hex(wrap_seed)},
              {"sealed_catalog_key", to_hex(sealed)},
              {"files", files},
              {"recoveries", recoveries},
              {"failed_verifications", failed},
              {"locked_until_ms", locked},
              {"releases", releases}};
}

}  // namespace

void CloudService::persist(const Account& a) {
  if (!options_.data_dir) return;
  json devices = json::array();
  for (const auto& [id, d] : a.devices) {
    devices.push_back({{"device_id", d.device_id},
                       {"role", static_cast<int>(d.role)},
                       {"address", d.address},
                       {"identity", to_hex(d.identity)},
                       {"token", to_hex(d.token)},
                       {"token_expiry_ms", d.token_expiry_ms}});
  }
  json vault = json::object();
  for (const auto& [role, s] : a.vault) vault[std::to_string(static_cast<int>(role))] = to_hex(s.encode());
  json staged = json::object();
  for (const auto& [epoch, shares] : a.staged) {
    json e = json::object();
    for (const auto& [role, s] : shares) e[std::to_string(static_cast<int>(role))] = to_hex(s.encode());
    staged[std::to_string(epoch)] = e;
  }
  json history = json::array();
  for (const auto& s : a.vault_history) history.push_back(to_hex(s.encode()));
  json files = json::object();
  for (const auto& [tag, f] : a.files) {
    files[tag] = {{"seed", to_hex(f.seed)},
                  {"uploaded_ms", f.uploaded_ms},
                  {"deleted_ms", f.deleted_ms ? json(*f.deleted_ms) : json(nullptr)}};
  }
  json recoveries = json::object();
  for (const auto& [id, r] : a.recoveries) {
    recoveries[id] = {{"role", static_cast<int>(r.role)}, {"mode", r.mode},       {"binding", to_hex(r.binding)},
                      {"address", r.address},              {"state", r.state},     {"created_ms", r.created_ms}};
  }
  const json record =
      account_to_json(a.id, a.verifier, a.recovery_key, devices, a.enrolled, a.epoch, vault, staged, history,
                      a.wrap_seed, a.sealed_catalog_key, files, recoveries, a.failed_verifications,
                      a.locked_until_ms, a.releases);
  std::lock_guard lock(journal_mu_);
  std::filesystem::create_directories(*options_.data_dir);
  std::ofstream out(*options_.data_dir / "journal.jsonl", std::ios::app);
  out << record.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::io, "cannot append to cloud journal");
}

void CloudService::load() {
  const auto dir = *options_.data_dir;
  std::filesystem::create_directories(dir);
  std::map<std::string, json> records;
  if (std::ifstream snap(dir / "snapshot.json"); snap) {
    const json all = json::parse(snap);
    for (const auto& r : all) records[r.at("id").get<std::string>()] = r;
  }
  if (std::ifstream journal(dir / "journal.jsonl"); journal) {
    std::string line;
    while (std::getline(journal, line)) {
      if (line.empty()) continue;
      try {
        json r = json::parse(line);
        const auto id = r.at("id").get<std::string>();
        records[id] = std::move(r);
      } catch (const json::exception&) {
        // Torn tail from a crash: the previous upsert for that account stands.
      }
    }
  }
  const auto scalar = [](const json& j) { return Scalar::decode(from_hex(j.get<std::string>())); };
  for (const auto& [id, r] : records) {
    auto a = std::make_shared<Account>();
    a->id = id;
    a->verifier = r.at("verifier").get<std::string>();
    a->recovery_key = from_hex(r.at("recovery_key").get<std::string>());
    for (const auto& d : r.at("devices")) {
      DeviceRecord rec;
      rec.device_id = d.at("device_id").get<std::string>();
      rec.role = static_cast<Role>(d.at("role").get<int>());
      rec.address = d.at("address").get<std::string>();
      rec.identity = from_hex(d.at("identity").get<std::string>());
      rec.token = from_hex(d.at("token").get<std::string>());
      rec.token_expiry_ms = d.at("token_expiry_ms").get<std::int64_t>();
      if (!rec.token.empty()) tokens_[to_hex(rec.token)] = id;
      a->devices[rec.device_id] = std::move(rec);
    }
    a->enrolled = r.at("enrolled").get<bool>();
    a->epoch = r.at("epoch").get<std::uint32_t>();
    for (const auto& [role, s] : r.at("vault").items()) a->vault[static_cast<Role>(std::stoi(role))] = scalar(s);
    for (const auto& [epoch, shares] : r.at("staged").items()) {
      for (const auto& [role, s] : shares.items()) {
        a->staged[static_cast<std::uint32_t>(std::stoul(epoch))][static_cast<Role>(std::stoi(role))] = scalar(s);
      }
    }
    for (const auto& s : r.at("history")) a->vault_history.push_back(scalar(s));
    a->wrap_seed = from_hex(r.at("wrap_seed").get<std::string>());
    a->sealed_catalog_key = from_hex(r.at("sealed_catalog_key").get<std::string>());
    for (const auto& [tag, f] : r.at("files").items()) {
      StoredFile sf;
      sf.seed = to_array<32>(from_hex(f.at("seed").get<std::string>()));
      sf.uploaded_ms = f.at("uploaded_ms").get<std::int64_t>();
      if (!f.at("deleted_ms").is_null()) sf.deleted_ms = f.at("deleted_ms").get<std::int64_t>();
      a->files[tag] = sf;
    }
    for (const auto& [rid, rr] : r.at("recoveries").items()) {
      RecoveryRecord rec;
      rec.id = rid;
      rec.role = static_cast<Role>(rr.at("role").get<int>());
      rec.mode = rr.at("mode").get<std::string>();
      rec.binding = from_hex(rr.at("binding").get<std::string>());
      rec.address = rr.at("address").get<std::string>();
      rec.state = rr.at("state").get<std::string>();
      rec.created_ms = rr.at("created_ms").get<std::int64_t>();
      a->recoveries[rid] = rec;
    }
    a->failed_verifications = r.at("failed_verifications").get<int>();
    a->locked_until_ms = r.at("locked_until_ms").get<std::int64_t>();
    a->releases = r.at("releases").get<std::size_t>();
    accounts_[id] = a;
  }
  // Fold the journal into a fresh snapshot.
  json all = json::array();
  for (auto& [id, r] : records) all.push_back(r);
  const auto tmp = dir / "snapshot.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << all.dump();
    if (!out) throw Error(ErrorCode::io, "cannot write cloud snapshot");
  }
  std::filesystem::rename(tmp, dir / "snapshot.json");
  std::ofstream(dir / "journal.jsonl", std::ios::trunc);
}

}  // namespace twofe
