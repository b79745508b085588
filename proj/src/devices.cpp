#include "twofe/devices.hpp"

#include <cstdio>

#include "twofe/cloud.hpp"
#include "twofe/error.hpp"
#include "twofe/hashing.hpp"
#include "twofe/random.hpp"
#include "twofe/tcp_transport.hpp"

namespace twofe {

namespace {

const Ristretto255& group() {
  static const Ristretto255 g;
  return g;
}

constexpr std::string_view kCatalogWrapLabel = "2FE-CATALOG-WRAP";
constexpr std::size_t kPairingNonceBytes = 32;
constexpr auto kClosedRetention = std::chrono::minutes(10);

Message msg(MessageType t, Flow f, std::vector<Bytes> fields, const SessionId& sid = {}) {
  return make_message(t, f, sid, std::move(fields));
}

Flow flow_for(ReplaceMode mode) { return mode == ReplaceMode::migrate ? Flow::migrate : Flow::recover; }

Bytes tag_bytes(const FileTag& t) { return to_bytes(t); }

double ms(std::chrono::nanoseconds d) { return std::chrono::duration<double, std::milli>(d).count(); }

Scalar decode_scalar(const Message& m, std::string_view name) { return Scalar::decode(m.field(name)); }

}  // namespace

std::string pairing_sas(ByteView primary_identity, ByteView secondary_identity, ByteView primary_nonce,
                        ByteView secondary_nonce) {
  const std::array<ByteView, 4> parts{primary_identity, secondary_identity, primary_nonce, secondary_nonce};
  const Digest256 d = tagged_sha256(domain::pairing, parts);
  const std::uint32_t v = (std::uint32_t{d[0]} << 24 | std::uint32_t{d[1]} << 16 | std::uint32_t{d[2]} << 8 | d[3]) %
                          1000000;
  char buf[8];
  std::snprintf(buf, sizeof buf, "%06u", v);
  return buf;
}

DeviceState fresh_device_state(Role role) {
  DeviceState s;
  s.role = role;
  s.identity = Identity::generate();
  s.device_id = std::string(role_name(role)) + "-" + fingerprint(s.identity.public_bytes());
  return s;
}

std::string_view replace_mode_name(ReplaceMode m) { return m == ReplaceMode::migrate ? "migrate" : "recover"; }

ReplaceMode parse_replace_mode(std::string_view s) {
  if (s == "migrate") return ReplaceMode::migrate;
  if (s == "recover") return ReplaceMode::recover;
  throw Error(ErrorCode::usage, "mode must be migrate or recover, got " + std::string(s));
}

// ---------------------------------------------------------------------------
// Device

Device::Device(Role role, Network& network, DeviceOptions options)
    : Device(fresh_device_state(role), network, std::move(options)) {}

Device::Device(DeviceState state, Network& network, DeviceOptions options)
    : state_(std::move(state)), network_(network), options_(std::move(options)) {
  identity_ = state_.identity;
  device_id_ = state_.device_id;
  state_.listen_address = network_.self();
  if (!options_.approvals) own_approvals_ = std::make_unique<ApprovalQueue>();
  approvals_ = options_.approvals ? options_.approvals : own_approvals_.get();
  pin(state_.cloud_address, state_.cloud_identity);
  pin(state_.peer_address, state_.peer_identity);
}

Device::~Device() {
  std::lock_guard lock(mu_);
  state_.wipe_shares();
}

DeviceState Device::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

void Device::save() {
  if (options_.state_path) save_state(*options_.state_path, state_);
}

void Device::pin(const std::string& address, const Bytes& identity) {
  if (address.empty() || identity.empty()) return;
  if (auto* tcp = dynamic_cast<TcpNetwork*>(&network_)) tcp->pin(address, identity);
}

Message Device::cloud_request(Message m) {
  std::string to;
  {
    std::lock_guard lock(mu_);
    to = state_.cloud_address;
  }
  if (to.empty()) throw Error(ErrorCode::not_enrolled, "no cloud configured; log in first");
  try {
    return network_.request(to, m);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::peer_unreachable) throw Error(ErrorCode::cloud_unreachable, e.detail());
    throw;
  }
}

Message Device::peer_request(Message m) {
  std::string to;
  {
    std::lock_guard lock(mu_);
    to = state_.peer_address;
  }
  if (to.empty()) throw Error(ErrorCode::not_enrolled, "no paired device");
  return network_.request(to, m);
}

bool Device::from_cloud(const PeerInfo& from) const {
  std::lock_guard lock(mu_);
  return !state_.cloud_identity.empty() && from.identity == state_.cloud_identity;
}

bool Device::from_peer(const PeerInfo& from) const {
  std::lock_guard lock(mu_);
  return !state_.peer_identity.empty() && from.identity == state_.peer_identity;
}

void Device::invalidate(const std::string& target) {
  Bytes token;
  {
    std::lock_guard lock(mu_);
    token = state_.session_token;
  }
  if (token.empty()) throw Error(ErrorCode::not_enrolled, "not logged in");
  expect(cloud_request(msg(MessageType::session_invalidate, Flow::session, {token, to_bytes(target)})),
         MessageType::ok);
  if (target.empty() || target == device_id_ || target == role_name(state_.role)) {
    std::lock_guard lock(mu_);
    secure_wipe(state_.session_token);
    state_.session_token.clear();
    save();
  }
}

Message Device::handle_auth_ping(const Message& m) {
  const std::string rid = m.text("recovery_id");
  const Role role = static_cast<Role>(m.u8("role"));
  const std::string mode = m.text("mode");
  const Bytes& binding = m.field("binding");
  const ByteView tag = ByteView(binding).first(std::min<std::size_t>(16, binding.size()));
  const std::string label = "replace " + std::string(role_name(role)) + " with device " + fingerprint(binding);

  if (mode != "migrate") {
    approvals_->notify(RequestKind::migrate_auth, tag, label,
                       "recovery was requested while this device is online; it was refused");
    return ok_message(m.flow, m.session);
  }
  // Handing a share to another device always needs the user, whatever the
  // derivation policy says.
  if (!approvals_->authorize(PolicyMode::prompt, RequestKind::migrate_auth, tag, label, std::chrono::seconds(0))) {
    throw Error(ErrorCode::approval_denied, "migration denied on this device");
  }
  if (role == state_.role) {
    // The replacement takes over this device's share; forget it.
    std::lock_guard lock(mu_);
    state_.wipe_shares();
    save();
  }
  return msg(MessageType::auth_approve, m.flow, {to_bytes(rid), binding}, m.session);
}

// ---------------------------------------------------------------------------
// PrimaryDevice

PrimaryDevice::PrimaryDevice(Network& network, DeviceOptions options)
    : Device(Role::primary, network, std::move(options)) {}

PrimaryDevice::PrimaryDevice(DeviceState state, Network& network, DeviceOptions options)
    : Device(std::move(state), network, std::move(options)) {
  if (state_.role != Role::primary) throw Error(ErrorCode::usage, "state belongs to a secondary device");
}

std::optional<Message> PrimaryDevice::handle(const Message& m, const PeerInfo& from) {
  if (m.type == MessageType::auth_ping) {
    if (!from_cloud(from)) throw Error(ErrorCode::auth_failure, "AUTH_PING not from the cloud");
    return handle_auth_ping(m);
  }
  throw Error(ErrorCode::protocol_order, "primary does not accept " + std::string(message_name(m.type)));
}

void PrimaryDevice::create_account(const std::string& cloud_address, const Bytes& cloud_identity,
                                   const std::string& account, const std::string& password,
                                   const std::string& recovery_secret) {
  {
    std::lock_guard lock(mu_);
    state_.cloud_address = cloud_address;
    state_.cloud_identity = cloud_identity;
  }
  pin(cloud_address, cloud_identity);
  expect(cloud_request(msg(MessageType::account_create, Flow::session,
                           {to_bytes(account), to_bytes(password), recovery_key_from_secret(recovery_secret)})),
         MessageType::ok);
  login(cloud_address, cloud_identity, account, password);
}

void PrimaryDevice::login(const std::string& cloud_address, const Bytes& cloud_identity, const std::string& account,
                          const std::string& password) {
  {
    std::lock_guard lock(mu_);
    state_.cloud_address = cloud_address;
    state_.cloud_identity = cloud_identity;
  }
  pin(cloud_address, cloud_identity);
  const Message reply = cloud_request(msg(
      MessageType::login, Flow::session,
      {to_bytes(account), to_bytes(password), to_bytes(device_id_), u8_field(static_cast<std::uint8_t>(Role::primary)),
       to_bytes(network_.self()), identity_.public_bytes()}));
  expect(reply, MessageType::session_grant);
  std::lock_guard lock(mu_);
  state_.account = account;
  state_.session_token = reply.field("token");
  save();
}

void PrimaryDevice::reset_password(const std::string& account, const std::string& new_password,
                                   const std::string& recovery_secret) {
  std::string cloud_address;
  Bytes cloud_identity;
  {
    std::lock_guard lock(mu_);
    cloud_address = state_.cloud_address;
    cloud_identity = state_.cloud_identity;
  }
  const Message challenge = cloud_request(msg(MessageType::verify_challenge, Flow::session, {to_bytes(account)}));
  expect(challenge, MessageType::verify_nonce);
  const Bytes& nonce = challenge.field("nonce");
  Bytes rk = recovery_key_from_secret(recovery_secret);
  const Bytes proof = password_reset_proof(rk, nonce, account, new_password);
  secure_wipe(rk);
  expect(cloud_request(msg(MessageType::password_reset, Flow::session,
                           {to_bytes(account), to_bytes(new_password), nonce, proof})),
         MessageType::ok);
  login(cloud_address, cloud_identity, account, new_password);
}

std::string PrimaryDevice::pair(const std::string& address, const std::string& role, Bytes& peer_identity,
                                std::string& peer_device_id) {
  const Bytes own_nonce = random_vector(kPairingNonceBytes);
  const Message reply = network_.request(
      address, msg(MessageType::pair_hello, Flow::pairing,
                   {to_bytes(device_id_), identity_.public_bytes(), own_nonce, to_bytes(role)}, new_session_id()));
  expect(reply, MessageType::pair_hello);
  peer_identity = reply.field("identity");
  peer_device_id = reply.text("device_id");
  const Bytes& peer_nonce = reply.field("nonce");
  if (reply.text("role") != "secondary" || peer_nonce.size() != kPairingNonceBytes || peer_identity.size() != 32) {
    throw Error(ErrorCode::pairing_failure, "unexpected pairing answer");
  }
  if (auto* tcp = dynamic_cast<TcpNetwork*>(&network_)) {
    const auto presented = tcp->peer_identity(address);
    if (!presented || *presented != peer_identity) {
      throw Error(ErrorCode::pairing_failure, "pairing identity differs from the channel identity");
    }
  }
  std::string sas = pairing_sas(identity_.public_bytes(), peer_identity, own_nonce, peer_nonce);
  if (options_.confirm_sas && !options_.confirm_sas(sas)) {
    throw Error(ErrorCode::pairing_failure, "pairing code not confirmed");
  }
  return sas;
}

void PrimaryDevice::enroll(const std::string& secondary_address) {
  Bytes token;
  std::string account, cloud_address;
  Bytes cloud_identity;
  {
    std::lock_guard lock(mu_);
    if (state_.enrolled) throw Error(ErrorCode::duplicate_enrollment, "this device is already enrolled");
    if (state_.session_token.empty()) throw Error(ErrorCode::not_enrolled, "log in before enrolling");
    token = state_.session_token;
    account = state_.account;
    cloud_address = state_.cloud_address;
    cloud_identity = state_.cloud_identity;
  }

  Bytes sid;
  std::string sdev;
  const std::string sas = pair(secondary_address, "primary", sid, sdev);
  const Message grant = cloud_request(msg(
      MessageType::register_device, Flow::enroll,
      {token, to_bytes(sdev), u8_field(static_cast<std::uint8_t>(Role::secondary)), to_bytes(secondary_address), sid}));
  expect(grant, MessageType::session_grant);

  const CatalogKey catalog_key = random_array<32>();
  expect(network_.request(secondary_address,
                          msg(MessageType::pair_confirm, Flow::pairing,
                              {to_bytes(sas), to_bytes(account), to_bytes(catalog_key), grant.field("token"),
                               to_bytes(cloud_address), cloud_identity, to_bytes(network_.self())})),
         MessageType::ok);
  {
    std::lock_guard lock(mu_);
    state_.peer_address = secondary_address;
    state_.peer_identity = sid;
    state_.catalog_key = catalog_key;
  }
  pin(secondary_address, sid);

  auto shares = ShareSet<Scalar>::generate(Role::primary);
  const SessionId session = new_session_id();
  const Message reply = peer_request(
      msg(MessageType::enroll_shares, Flow::enroll, {be32(0), shares.sub_share_peer.encode()}, session));
  expect(reply, MessageType::enroll_reply);
  const Scalar held = decode_scalar(reply, "sub_share");
  const Element pk = Element::decode(reply.field("public_key"));
  if (pk.is_identity()) throw Error(ErrorCode::bad_proof, "secondary public key is the identity");
  expect(cloud_request(msg(MessageType::vault_put, Flow::enroll, {token, be32(0), shares.sub_share_cloud.encode()},
                           session)),
         MessageType::ok);
  {
    std::lock_guard lock(mu_);
    state_.own_share = shares.own_share;
    state_.sub_share_peer = shares.sub_share_peer;
    state_.sub_share_cloud = shares.sub_share_cloud;
    state_.held_sub_share = held;
    state_.public_key = pk;
    state_.epoch = 0;
    state_.enrolled = true;
    save();
  }
  shares.own_share.wipe();
  shares.sub_share_peer.wipe();
  shares.sub_share_cloud.wipe();

  store_catalog(Catalog{});
  wrap_catalog_key();
}

PrimaryDevice::Fresh PrimaryDevice::derive_fresh(const FileTag& tag) {
  if (options_.before_derivation) options_.before_derivation();
  const auto t0 = std::chrono::steady_clock::now();
  if (options_.meter) options_.meter->reset();
  ProtocolSession session(Flow::encrypt, new_session_id(), {MessageType::sr_share, MessageType::tprf_resp});
  try {
    SeedSession seed(SeedRole::initiator);
    Commitment c{};
    {
      ComputeScope scope(options_.meter);
      c = seed.commit();
    }
    const Message share =
        peer_request(msg(MessageType::sr_commit, Flow::encrypt, {to_bytes(c)}, session.id()));
    session.sent(MessageType::sr_commit);
    expect(share, MessageType::sr_share);
    session.accept(MessageType::sr_share);
    Bytes preimage;
    {
      ComputeScope scope(options_.meter);
      preimage = seed.reveal(share.field("s1"));
    }
    std::string peer;
    {
      std::lock_guard lock(mu_);
      peer = state_.peer_address;
    }
    network_.send(peer, msg(MessageType::sr_reveal, Flow::encrypt, {preimage}, session.id()));
    session.sent(MessageType::sr_reveal);
    secure_wipe(preimage);

    Fresh out;
    out.seed = to_array<32>(seed.seed());
    session.stash("seed", seed.seed());
    out.key = finish_derivation(session, tag, out.seed);
    session.finish();
    timing_.derive_ms = ms(std::chrono::steady_clock::now() - t0);
    timing_.compute_ms = options_.meter ? ms(options_.meter->total()) : 0;
    timing_.peer_messages = 5;
    return out;
  } catch (const Error& e) {
    session.abort(e.detail());
    throw;
  }
}

DerivedKey PrimaryDevice::derive_existing(const FileTag& tag, const Seed& seed) {
  if (options_.before_derivation) options_.before_derivation();
  const auto t0 = std::chrono::steady_clock::now();
  if (options_.meter) options_.meter->reset();
  ProtocolSession session(Flow::decrypt, new_session_id(), {MessageType::tprf_resp});
  try {
    DerivedKey key = finish_derivation(session, tag, seed);
    session.finish();
    timing_.derive_ms = ms(std::chrono::steady_clock::now() - t0);
    timing_.compute_ms = options_.meter ? ms(options_.meter->total()) : 0;
    timing_.peer_messages = 2;
    return key;
  } catch (const Error& e) {
    session.abort(e.detail());
    throw;
  }
}

DerivedKey PrimaryDevice::finish_derivation(ProtocolSession& session, const FileTag& tag, const Seed& seed) {
  const Message reply = peer_request(
      msg(MessageType::tprf_req, session.flow(), {tag_bytes(tag), to_bytes(seed)}, session.id()));
  session.sent(MessageType::tprf_req);
  expect(reply, MessageType::tprf_resp);
  session.accept(MessageType::tprf_resp);

  Scalar own;
  Element pk;
  {
    std::lock_guard lock(mu_);
    if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "this device holds no key share");
    own = state_.own_share;
    pk = state_.public_key;
  }
  ComputeScope scope(options_.meter);
  const PrfInput x = PrfInput::from(tag, seed);
  const TprfResponse<Ristretto255> resp{Element::decode(reply.field("blinded")),
                                        DleqProof<Ristretto255>::decode(reply.field("proof"))};
  DerivedKey key;
  try {
    key = tprf_finish(group(), x, own, pk, resp);
  } catch (...) {
    own.wipe();
    throw;
  }
  own.wipe();
  session.stash("key", to_bytes(key.bytes()));
  return key;
}

Catalog PrimaryDevice::load_catalog() {
  Bytes token;
  CatalogKey key{};
  {
    std::lock_guard lock(mu_);
    token = state_.session_token;
    key = state_.catalog_key;
  }
  const Message reply = cloud_request(msg(MessageType::catalog_get, Flow::storage, {token}));
  expect(reply, MessageType::catalog_data);
  const Bytes& blob = reply.field("blob");
  Catalog c = blob.empty() ? Catalog{} : Catalog::open(key, blob);
  secure_wipe(std::span<std::uint8_t>(key));
  return c;
}

void PrimaryDevice::store_catalog(const Catalog& c) {
  Bytes token;
  CatalogKey key{};
  {
    std::lock_guard lock(mu_);
    token = state_.session_token;
    key = state_.catalog_key;
  }
  const Bytes sealed = c.seal(key);
  secure_wipe(std::span<std::uint8_t>(key));
  expect(cloud_request(msg(MessageType::catalog_put, Flow::storage, {token, sealed})), MessageType::ok);
}

void PrimaryDevice::wrap_catalog_key() {
  Fresh f = derive_fresh(kCatalogWrapTag);
  Bytes token;
  Bytes sealed;
  {
    std::lock_guard lock(mu_);
    token = state_.session_token;
    sealed = seal_static(f.key.bytes(), state_.catalog_key, to_bytes(kCatalogWrapLabel));
  }
  expect(cloud_request(msg(MessageType::vault_catalog_put, Flow::enroll, {token, to_bytes(f.seed), sealed})),
         MessageType::ok);
}

void PrimaryDevice::unwrap_catalog_key(ByteView wrap_seed, ByteView sealed_key) {
  if (wrap_seed.size() != 32) throw Error(ErrorCode::bad_length, "wrap seed must be 32 bytes");
  const DerivedKey key = derive_existing(kCatalogWrapTag, to_array<32>(wrap_seed));
  Bytes ck = open_static(key.bytes(), sealed_key, to_bytes(kCatalogWrapLabel), ErrorCode::catalog_decrypt_failure);
  if (ck.size() != 32) throw Error(ErrorCode::catalog_decrypt_failure, "vault catalog key has the wrong length");
  std::lock_guard lock(mu_);
  const CatalogKey unwrapped = to_array<32>(ck);
  secure_wipe(ck);
  const CatalogKey zero{};
  if (state_.catalog_key == zero) {
    state_.catalog_key = unwrapped;
  } else if (!constant_time_equal(state_.catalog_key, unwrapped)) {
    throw Error(ErrorCode::auth_failure, "catalog key from the secondary differs from the vault copy");
  }
  save();
}

FileTag PrimaryDevice::encrypt(const std::string& name, ByteView data) {
  Bytes token;
  {
    std::lock_guard lock(mu_);
    if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "enroll this device first");
    token = state_.session_token;
  }
  const FileTag tag = generate_tag();
  Fresh f = derive_fresh(tag);
  const std::vector<Bytes> chunks = encrypt_file(f.key, data, tag);
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(chunks.size()));
  for (const auto& c : chunks) w.field(c);
  expect(cloud_request(msg(MessageType::file_put, Flow::storage, {token, tag_bytes(tag), to_bytes(f.seed), w.take()})),
         MessageType::ok);
  Catalog c = load_catalog();
  c.put(name, tag);
  store_catalog(c);
  return tag;
}

FileTag PrimaryDevice::resolve(const std::string& name_or_tag) {
  {
    std::lock_guard lock(mu_);
    if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "enroll this device first");
  }
  const Catalog c = load_catalog();
  try {
    return c.resolve(name_or_tag);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::name_not_found || name_or_tag.size() != 32) throw;
    try {
      return to_array<16>(from_hex(name_or_tag));
    } catch (const Error&) {
      throw e;
    }
  }
}

Bytes PrimaryDevice::decrypt(const std::string& name_or_tag) { return decrypt_tag(resolve(name_or_tag)); }

Bytes PrimaryDevice::decrypt_tag(const FileTag& tag) {
  Bytes token;
  {
    std::lock_guard lock(mu_);
    if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "enroll this device first");
    token = state_.session_token;
  }
  const Message data = cloud_request(msg(MessageType::file_get, Flow::storage, {token, tag_bytes(tag)}));
  expect(data, MessageType::file_data);
  if (data.field("tag") != tag_bytes(tag)) throw Error(ErrorCode::invalid_encoding, "cloud returned another file");
  const Bytes& seed = data.field("seed");
  if (seed.size() != 32) throw Error(ErrorCode::bad_length, "seed must be 32 bytes");
  ByteReader r(data.field("ciphertext"));
  std::vector<Bytes> chunks(r.u32());
  for (auto& c : chunks) c = r.field();
  r.expect_end();
  const DerivedKey key = derive_existing(tag, to_array<32>(seed));
  return decrypt_file(key, chunks, tag);
}

std::map<std::string, FileTag> PrimaryDevice::list() {
  Bytes token;
  {
    std::lock_guard lock(mu_);
    token = state_.session_token;
  }
  const Message listing = cloud_request(msg(MessageType::file_list, Flow::storage, {token}));
  expect(listing, MessageType::file_listing);
  const Bytes& tags = listing.field("tags");
  if (tags.size() % 16 != 0) throw Error(ErrorCode::bad_length, "file listing is not a list of tags");
  std::set<FileTag> live;
  for (std::size_t i = 0; i < tags.size(); i += 16) live.insert(to_array<16>(ByteView(tags).subspan(i, 16)));
  std::map<std::string, FileTag> out;
  const Catalog catalog = load_catalog();
  for (const auto& [name, tag] : catalog.entries()) {
    if (live.count(tag)) out.emplace(name, tag);
  }
  return out;
}

void PrimaryDevice::remove(const std::string& name) {
  const FileTag tag = resolve(name);
  Bytes token;
  {
    std::lock_guard lock(mu_);
    token = state_.session_token;
  }
  expect(cloud_request(msg(MessageType::file_delete, Flow::storage, {token, tag_bytes(tag)})), MessageType::ok);
}

void PrimaryDevice::restore(const std::string& name) {
  const FileTag tag = resolve(name);
  Bytes token;
  {
    std::lock_guard lock(mu_);
    token = state_.session_token;
  }
  expect(cloud_request(msg(MessageType::file_undelete, Flow::storage, {token, tag_bytes(tag)})), MessageType::ok);
}

void PrimaryDevice::refresh() {
  Bytes token;
  Scalar own;
  Element pk;
  std::uint32_t next = 0;
  {
    std::lock_guard lock(mu_);
    if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "enroll this device first");
    token = state_.session_token;
    own = state_.own_share;
    pk = state_.public_key;
    next = state_.epoch + 1;
  }
  Scalar z = Scalar::random();
  auto step = refresh_pair_with(own, z);
  own.wipe();
  z.wipe();
  const SessionId session = new_session_id();
  expect(peer_request(msg(MessageType::refresh_delta, Flow::refresh, {be32(next), step.delta_for_peer.encode()},
                          session)),
         MessageType::ok);
  auto sub = split_own_share(step.new_own);
  const Message reply =
      peer_request(msg(MessageType::enroll_shares, Flow::refresh, {be32(next), sub.peer.encode()}, session));
  expect(reply, MessageType::enroll_reply);
  const Scalar held = decode_scalar(reply, "sub_share");
  const Element new_pk = Element::decode(reply.field("public_key"));
  if (!(new_pk == pk + Element::base_times(step.delta_for_peer))) {
    throw Error(ErrorCode::bad_proof, "secondary's refreshed public key is inconsistent");
  }
  expect(cloud_request(msg(MessageType::vault_put, Flow::refresh, {token, be32(next), sub.cloud.encode()}, session)),
         MessageType::ok);
  std::lock_guard lock(mu_);
  state_.own_share = step.new_own;
  state_.sub_share_peer = sub.peer;
  state_.sub_share_cloud = sub.cloud;
  state_.held_sub_share = held;
  state_.public_key = new_pk;
  state_.epoch = next;
  save();
  step.new_own.wipe();
  step.delta_for_peer.wipe();
  sub.peer.wipe();
  sub.cloud.wipe();
}

void PrimaryDevice::recovery_credentials(ReplaceMode mode, const std::string& recovery_secret, ByteView binding,
                                         Bytes& nonce, Bytes& proof) {
  if (mode != ReplaceMode::recover) return;
  std::string account;
  {
    std::lock_guard lock(mu_);
    account = state_.account;
  }
  const Message challenge =
      cloud_request(msg(MessageType::verify_challenge, Flow::recover, {to_bytes(account)}));
  expect(challenge, MessageType::verify_nonce);
  nonce = challenge.field("nonce");
  Bytes rk = recovery_key_from_secret(recovery_secret);
  proof = recovery_proof(rk, nonce, account, binding);
  secure_wipe(rk);
}

void PrimaryDevice::replace_secondary(const std::string& new_address, ReplaceMode mode,
                                      const std::string& recovery_secret) {
  Bytes token;
  std::string account, cloud_address;
  Bytes cloud_identity;
  {
    std::lock_guard lock(mu_);
    if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "enroll this device first");
    token = state_.session_token;
    account = state_.account;
    cloud_address = state_.cloud_address;
    cloud_identity = state_.cloud_identity;
  }
  Bytes nid;
  std::string ndev;
  const std::string sas = pair(new_address, "primary", nid, ndev);
  expect(network_.request(new_address,
                          msg(MessageType::pair_confirm, Flow::pairing,
                              {to_bytes(sas), to_bytes(account), {}, {}, to_bytes(cloud_address), cloud_identity,
                               to_bytes(network_.self())})),
         MessageType::ok);

  Bytes nonce, proof;
  recovery_credentials(mode, recovery_secret, nid, nonce, proof);
  const Flow flow = flow_for(mode);
  const SessionId session = new_session_id();
  const Message status = cloud_request(msg(MessageType::recover_req, flow,
                                           {token, u8_field(static_cast<std::uint8_t>(Role::secondary)),
                                            to_bytes(replace_mode_name(mode)), nid, to_bytes(new_address), nonce,
                                            proof},
                                           session));
  expect(status, MessageType::recover_status);

  Message join;
  {
    std::lock_guard lock(mu_);
    join = msg(MessageType::recover_join, flow,
               {to_bytes(account), status.field("recovery_id"), be32(state_.epoch), state_.held_sub_share.encode(),
                state_.public_key.encode(), to_bytes(state_.catalog_key), to_bytes(cloud_address), cloud_identity,
                identity_.public_bytes(), to_bytes(network_.self())},
               session);
  }
  expect(network_.request(new_address, join), MessageType::ok);
  {
    std::lock_guard lock(mu_);
    state_.peer_address = new_address;
    state_.peer_identity = nid;
    save();
  }
  pin(new_address, nid);
  refresh();
}

void PrimaryDevice::replace_primary(const std::string& cloud_address, const Bytes& cloud_identity,
                                    const std::string& account, const std::string& secondary_address,
                                    ReplaceMode mode, const std::string& recovery_secret) {
  {
    std::lock_guard lock(mu_);
    if (state_.enrolled) throw Error(ErrorCode::duplicate_enrollment, "this device is already enrolled");
    state_.cloud_address = cloud_address;
    state_.cloud_identity = cloud_identity;
    state_.account = account;
  }
  pin(cloud_address, cloud_identity);

  Bytes sid;
  std::string sdev;
  const std::string sas = pair(secondary_address, "replacement-primary", sid, sdev);
  expect(network_.request(secondary_address,
                          msg(MessageType::pair_confirm, Flow::pairing,
                              {to_bytes(sas), to_bytes(account), {}, {}, to_bytes(cloud_address), cloud_identity,
                               to_bytes(network_.self())})),
         MessageType::ok);

  Bytes nonce, proof;
  recovery_credentials(mode, recovery_secret, identity_.public_bytes(), nonce, proof);
  const Flow flow = flow_for(mode);
  const SessionId session = new_session_id();
  const Message join = network_.request(
      secondary_address, msg(MessageType::recover_start, flow,
                             {to_bytes(account), {}, to_bytes(replace_mode_name(mode)), nonce, proof,
                              to_bytes(network_.self())},
                             session));
  expect(join, MessageType::recover_join);
  if (join.field("peer_identity") != sid || join.text("account") != account) {
    throw Error(ErrorCode::pairing_failure, "recovery answer does not come from the paired secondary");
  }

  const Message release = cloud_request(msg(
      MessageType::share_fetch, flow,
      {to_bytes(account), join.field("recovery_id"), to_bytes(device_id_), to_bytes(network_.self())}, session));
  expect(release, MessageType::share_release);

  Scalar from_peer = decode_scalar(join, "held_sub_share");
  Scalar from_cloud = decode_scalar(release, "sub_share");
  const Element pk = Element::decode(join.field("public_key"));
  const Bytes& ck = join.field("catalog_key");
  {
    std::lock_guard lock(mu_);
    state_.own_share = from_peer + from_cloud;
    state_.sub_share_peer = from_peer;
    state_.sub_share_cloud = from_cloud;
    state_.held_sub_share = Scalar::zero();
    state_.public_key = pk;
    state_.epoch = release.u32("epoch");
    if (ck.size() == 32) state_.catalog_key = to_array<32>(ck);
    state_.session_token = release.field("token");
    state_.peer_address = secondary_address;
    state_.peer_identity = sid;
    state_.enrolled = true;
    save();
  }
  from_peer.wipe();
  from_cloud.wipe();
  pin(secondary_address, sid);
  refresh();
  if (!release.field("wrap_seed").empty()) unwrap_catalog_key(release.field("wrap_seed"), release.field("sealed_key"));
}

// ---------------------------------------------------------------------------
// SecondaryDevice

SecondaryDevice::SecondaryDevice(Network& network, DeviceOptions options)
    : Device(Role::secondary, network, std::move(options)) {}

SecondaryDevice::SecondaryDevice(DeviceState state, Network& network, DeviceOptions options)
    : Device(std::move(state), network, std::move(options)) {
  if (state_.role != Role::secondary) throw Error(ErrorCode::usage, "state belongs to a primary device");
}

std::size_t SecondaryDevice::open_sessions() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

void SecondaryDevice::sweep_locked() {
  const auto now = ProtocolSession::Clock::now();
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (it->second.session->expired(now, kSessionTimeout)) {
      it->second.session->abort("timed out");
      it->second.seed->abort();
      closed_[it->first] = now;
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
  for (auto it = closed_.begin(); it != closed_.end();) {
    it = now - it->second > kClosedRetention ? closed_.erase(it) : std::next(it);
  }
}

std::optional<Message> SecondaryDevice::handle(const Message& m, const PeerInfo& from) {
  switch (m.type) {
    case MessageType::pair_hello: return on_pair_hello(m, from);
    case MessageType::pair_confirm: return on_pair_confirm(m, from);
    case MessageType::enroll_shares: return on_enroll_shares(m, from);
    case MessageType::refresh_delta: return on_refresh_delta(m, from);
    case MessageType::sr_commit: return on_sr_commit(m, from);
    case MessageType::sr_reveal: on_sr_reveal(m, from); return std::nullopt;
    case MessageType::tprf_req: return on_tprf_req(m, from);
    case MessageType::recover_join: return on_recover_join(m, from);
    case MessageType::recover_start: return on_recover_start(m, from);
    case MessageType::auth_ping:
      if (!from_cloud(from)) throw Error(ErrorCode::auth_failure, "AUTH_PING not from the cloud");
      return handle_auth_ping(m);
    default:
      throw Error(ErrorCode::protocol_order, "secondary does not accept " + std::string(message_name(m.type)));
  }
}

Message SecondaryDevice::on_pair_hello(const Message& m, const PeerInfo& from) {
  const std::string role = m.text("role");
  const Bytes& id = m.field("identity");
  if (id.size() != 32 || (!from.identity.empty() && from.identity != id)) {
    throw Error(ErrorCode::pairing_failure, "hello identity differs from the channel identity");
  }
  if (m.field("nonce").size() != kPairingNonceBytes) throw Error(ErrorCode::pairing_failure, "bad pairing nonce");
  std::lock_guard lock(mu_);
  if (role == "primary") {
    if (state_.enrolled) throw Error(ErrorCode::pairing_failure, "this secondary is already enrolled");
  } else if (role == "replacement-primary") {
    if (!state_.enrolled) throw Error(ErrorCode::pairing_failure, "nothing to recover on this secondary");
  } else {
    throw Error(ErrorCode::pairing_failure, "unknown pairing role " + role);
  }
  PendingPairing p;
  p.role = role;
  p.device_id = m.text("device_id");
  p.identity = id;
  p.peer_nonce = m.field("nonce");
  p.own_nonce = random_vector(kPairingNonceBytes);
  pairing_ = p;
  return msg(MessageType::pair_hello, m.flow,
             {to_bytes(device_id_), identity_.public_bytes(), p.own_nonce, to_bytes("secondary")}, m.session);
}

Message SecondaryDevice::on_pair_confirm(const Message& m, const PeerInfo& from) {
  std::unique_lock lock(mu_);
  if (!pairing_ || (!from.identity.empty() && from.identity != pairing_->identity)) {
    throw Error(ErrorCode::pairing_failure, "no pairing in progress with this device");
  }
  const std::string sas =
      pairing_sas(pairing_->identity, identity_.public_bytes(), pairing_->peer_nonce, pairing_->own_nonce);
  if (m.text("sas") != sas) {
    pairing_.reset();
    throw Error(ErrorCode::pairing_failure, "pairing codes differ");
  }
  if (options_.confirm_sas) {
    lock.unlock();
    const bool ok = options_.confirm_sas(sas);
    lock.lock();
    if (!ok || !pairing_) {
      pairing_.reset();
      throw Error(ErrorCode::pairing_failure, "pairing code not confirmed");
    }
  }
  pairing_->confirmed = true;
  pairing_->address = m.text("peer_address");
  if (pairing_->role == "primary") {
    state_.account = m.text("account");
    if (m.field("catalog_key").size() == 32) state_.catalog_key = to_array<32>(m.field("catalog_key"));
    if (!m.field("token").empty()) state_.session_token = m.field("token");
    state_.cloud_address = m.text("cloud_address");
    state_.cloud_identity = m.field("cloud_identity");
    state_.peer_address = pairing_->address;
    state_.peer_identity = pairing_->identity;
    save();
    pin(state_.cloud_address, state_.cloud_identity);
    pin(state_.peer_address, state_.peer_identity);
  }
  return ok_message(m.flow, m.session);
}

Message SecondaryDevice::on_enroll_shares(const Message& m, const PeerInfo& from) {
  if (!from_peer(from)) throw Error(ErrorCode::auth_failure, "enrollment not from the paired primary");
  const std::uint32_t epoch = m.u32("epoch");
  const Scalar held = decode_scalar(m, "sub_share");
  ShareSet<Scalar> shares;
  Bytes token;
  {
    std::lock_guard lock(mu_);
    if (!state_.enrolled && epoch == 0) {
      shares = ShareSet<Scalar>::generate(Role::secondary);
    } else if (state_.enrolled && epoch == state_.epoch + 1 && staged_delta_ && staged_delta_->first == epoch) {
      shares.role = Role::secondary;
      shares.own_share = state_.own_share + staged_delta_->second;
      shares.resplit();
    } else {
      throw Error(ErrorCode::protocol_order, "share update for epoch " + std::to_string(epoch) + " out of order");
    }
    token = state_.session_token;
  }
  expect(cloud_request(
             msg(MessageType::vault_put, m.flow, {token, be32(epoch), shares.sub_share_cloud.encode()}, m.session)),
         MessageType::ok);
  const Element pk = Element::base_times(shares.own_share);
  std::lock_guard lock(mu_);
  state_.own_share = shares.own_share;
  state_.sub_share_peer = shares.sub_share_peer;
  state_.sub_share_cloud = shares.sub_share_cloud;
  state_.held_sub_share = held;
  state_.public_key = pk;
  state_.epoch = epoch;
  state_.enrolled = true;
  if (staged_delta_) staged_delta_->second.wipe();
  staged_delta_.reset();
  pairing_.reset();
  save();
  Message reply =
      msg(MessageType::enroll_reply, m.flow, {shares.sub_share_peer.encode(), pk.encode()}, m.session);
  shares.own_share.wipe();
  shares.sub_share_peer.wipe();
  shares.sub_share_cloud.wipe();
  return reply;
}

Message SecondaryDevice::on_refresh_delta(const Message& m, const PeerInfo& from) {
  if (!from_peer(from)) throw Error(ErrorCode::auth_failure, "refresh not from the paired primary");
  const std::uint32_t epoch = m.u32("epoch");
  const Scalar delta = decode_scalar(m, "delta");
  std::lock_guard lock(mu_);
  if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "this secondary is not enrolled");
  if (epoch != state_.epoch + 1) throw Error(ErrorCode::protocol_order, "refresh for the wrong epoch");
  staged_delta_ = std::make_pair(epoch, delta);
  return ok_message(m.flow, m.session);
}

Message SecondaryDevice::on_sr_commit(const Message& m, const PeerInfo& from) {
  if (!from_peer(from)) throw Error(ErrorCode::auth_failure, "coin toss not from the paired primary");
  if (m.flow != Flow::encrypt) throw Error(ErrorCode::protocol_order, "coin toss outside an encryption");
  const Bytes& c = m.field("commitment");
  if (c.size() != 32) throw Error(ErrorCode::bad_length, "commitment must be 32 bytes");
  std::lock_guard lock(mu_);
  sweep_locked();
  if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "this secondary is not enrolled");
  if (sessions_.count(m.session) || closed_.count(m.session)) {
    throw Error(ErrorCode::protocol_order, "session id reused");
  }
  SrEntry entry;
  entry.session = std::make_unique<ProtocolSession>(
      Flow::encrypt, m.session,
      std::vector<MessageType>{MessageType::sr_commit, MessageType::sr_reveal, MessageType::tprf_req});
  entry.session->accept(MessageType::sr_commit);
  entry.seed = std::make_unique<SeedSession>(SeedRole::responder);
  Bytes s1;
  {
    ComputeScope scope(options_.meter);
    s1 = coin_override_ ? entry.seed->respond_with(to_array<32>(c), coin_override_())
                        : entry.seed->respond(to_array<32>(c));
  }
  entry.session->sent(MessageType::sr_share);
  sessions_.emplace(m.session, std::move(entry));
  return msg(MessageType::sr_share, m.flow, {s1}, m.session);
}

void SecondaryDevice::on_sr_reveal(const Message& m, const PeerInfo& from) {
  if (!from_peer(from)) throw Error(ErrorCode::auth_failure, "reveal not from the paired primary");
  std::lock_guard lock(mu_);
  auto it = sessions_.find(m.session);
  if (it == sessions_.end()) throw Error(ErrorCode::protocol_order, "reveal for an unknown session");
  auto& e = it->second;
  e.session->accept(MessageType::sr_reveal);
  try {
    ComputeScope scope(options_.meter);
    e.seed->accept_reveal(m.field("s0"));
  } catch (const Error& err) {
    e.session->abort(err.detail());
    throw;
  }
}

std::optional<std::string> SecondaryDevice::filename_for(const FileTag& tag) {
  if (is_reserved_tag(tag)) return std::string("(catalog key)");
  Bytes token;
  CatalogKey key{};
  {
    std::lock_guard lock(mu_);
    auto it = state_.catalog_mirror.find(to_hex(tag));
    if (it != state_.catalog_mirror.end()) return it->second;
    token = state_.session_token;
    key = state_.catalog_key;
  }
  try {
    const Message reply = cloud_request(msg(MessageType::catalog_get, Flow::storage, {token}));
    expect(reply, MessageType::catalog_data);
    if (reply.field("blob").empty()) return std::nullopt;
    const Catalog c = Catalog::open(key, reply.field("blob"));
    secure_wipe(std::span<std::uint8_t>(key));
    std::lock_guard lock(mu_);
    state_.catalog_mirror.clear();
    for (const auto& [name, t] : c.entries()) state_.catalog_mirror[to_hex(t)] = name;
    save();
    auto it = state_.catalog_mirror.find(to_hex(tag));
    if (it != state_.catalog_mirror.end()) return it->second;
  } catch (const Error&) {
    secure_wipe(std::span<std::uint8_t>(key));
  }
  return std::nullopt;
}

Message SecondaryDevice::on_tprf_req(const Message& m, const PeerInfo& from) {
  if (!from_peer(from)) throw Error(ErrorCode::auth_failure, "derivation request not from the paired primary");
  const Bytes& tag_field = m.field("tag");
  const Bytes& seed = m.field("seed");
  if (tag_field.size() != 16) throw Error(ErrorCode::bad_length, "tag must be 16 bytes");
  if (seed.size() != 32) throw Error(ErrorCode::bad_length, "seed must be 32 bytes");
  const FileTag tag = to_array<16>(tag_field);

  RequestKind kind = RequestKind::decrypt;
  {
    std::lock_guard lock(mu_);
    sweep_locked();
    if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "this secondary is not enrolled");
    if (m.flow == Flow::encrypt) {
      kind = RequestKind::encrypt;
      auto it = sessions_.find(m.session);
      if (it == sessions_.end()) throw Error(ErrorCode::protocol_order, "no coin toss for this session");
      auto& e = it->second;
      if (e.session->state() == SessionState::aborted) {
        const std::string reason = e.session->abort_reason();
        closed_[m.session] = ProtocolSession::Clock::now();
        sessions_.erase(it);
        throw Error(ErrorCode::sr_abort, reason);
      }
      e.session->accept(MessageType::tprf_req);
      if (e.seed->state() != SeedState::done || !constant_time_equal(e.seed->seed(), seed)) {
        e.session->abort("seed does not match the coin toss");
        closed_[m.session] = ProtocolSession::Clock::now();
        sessions_.erase(it);
        throw Error(ErrorCode::sr_abort, "seed does not match the coin toss");
      }
    } else if (m.flow == Flow::decrypt) {
      if (sessions_.count(m.session) || closed_.count(m.session)) {
        throw Error(ErrorCode::protocol_order, "session id reused");
      }
      SrEntry entry;
      entry.session = std::make_unique<ProtocolSession>(Flow::decrypt, m.session,
                                                        std::vector<MessageType>{MessageType::tprf_req});
      entry.session->accept(MessageType::tprf_req);
      entry.seed = std::make_unique<SeedSession>(SeedRole::responder);
      sessions_.emplace(m.session, std::move(entry));
    } else {
      throw Error(ErrorCode::protocol_order, "derivation request outside a file flow");
    }
  }

  const auto close = [&](bool ok, const std::string& reason) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(m.session);
    if (it == sessions_.end()) return;
    if (ok) {
      it->second.session->sent(MessageType::tprf_resp);
      it->second.session->finish();
    } else {
      it->second.session->abort(reason);
    }
    closed_[m.session] = ProtocolSession::Clock::now();
    sessions_.erase(it);
  };

  try {
    const std::optional<std::string> filename = filename_for(tag);
    const PolicyMode mode = options_.policy.mode_for(filename);
    if (!approvals_->authorize(mode, kind, tag_field, filename, options_.policy.approval_window)) {
      throw Error(ErrorCode::policy_denied, "request denied on the secondary");
    }
    Scalar k;
    {
      std::lock_guard lock(mu_);
      if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "this secondary is not enrolled");
      k = share_override_ ? share_override_(state_.own_share) : state_.own_share;
    }
    TprfResponse<Ristretto255> resp;
    {
      ComputeScope scope(options_.meter);
      resp = tprf_respond(group(), PrfInput::from(tag, seed), k);
    }
    k.wipe();
    close(true, {});
    return msg(MessageType::tprf_resp, m.flow, {resp.blinded.encode(), resp.proof.encode()}, m.session);
  } catch (const Error& e) {
    close(false, e.detail());
    throw;
  }
}

Message SecondaryDevice::on_recover_join(const Message& m, const PeerInfo& from) {
  std::string cloud_address;
  Bytes cloud_identity;
  {
    std::lock_guard lock(mu_);
    if (state_.enrolled) throw Error(ErrorCode::duplicate_enrollment, "this secondary is already enrolled");
    if (!pairing_ || !pairing_->confirmed || pairing_->role != "primary" ||
        (!from.identity.empty() && from.identity != pairing_->identity) ||
        m.field("peer_identity") != pairing_->identity) {
      throw Error(ErrorCode::pairing_failure, "recovery join not from the paired primary");
    }
    cloud_address = m.text("cloud_address");
    cloud_identity = m.field("cloud_identity");
    state_.cloud_address = cloud_address;
    state_.cloud_identity = cloud_identity;
  }
  pin(cloud_address, cloud_identity);
  const Message release = cloud_request(
      msg(MessageType::share_fetch, m.flow,
          {m.field("account"), m.field("recovery_id"), to_bytes(device_id_), to_bytes(network_.self())}, m.session));
  expect(release, MessageType::share_release);

  Scalar from_peer = decode_scalar(m, "held_sub_share");
  Scalar from_cloud = decode_scalar(release, "sub_share");
  Scalar k = from_peer + from_cloud;
  const Element pk = Element::decode(m.field("public_key"));
  if (!(Element::base_times(k) == pk)) {
    k.wipe();
    from_peer.wipe();
    from_cloud.wipe();
    throw Error(ErrorCode::auth_failure, "recovered share does not match the public key");
  }
  std::lock_guard lock(mu_);
  state_.account = m.text("account");
  state_.own_share = k;
  state_.sub_share_peer = from_peer;
  state_.sub_share_cloud = from_cloud;
  state_.held_sub_share = Scalar::zero();
  state_.public_key = pk;
  state_.epoch = release.u32("epoch");
  if (m.field("catalog_key").size() == 32) state_.catalog_key = to_array<32>(m.field("catalog_key"));
  state_.session_token = release.field("token");
  state_.peer_identity = m.field("peer_identity");
  state_.peer_address = m.text("peer_address");
  state_.enrolled = true;
  pairing_.reset();
  save();
  pin(state_.peer_address, state_.peer_identity);
  k.wipe();
  from_peer.wipe();
  from_cloud.wipe();
  return ok_message(m.flow, m.session);
}

Message SecondaryDevice::on_recover_start(const Message& m, const PeerInfo& from) {
  Bytes token, binding;
  {
    std::lock_guard lock(mu_);
    if (!pairing_ || !pairing_->confirmed || pairing_->role != "replacement-primary" ||
        (!from.identity.empty() && from.identity != pairing_->identity)) {
      throw Error(ErrorCode::pairing_failure, "recovery start not from a paired replacement primary");
    }
    if (!state_.enrolled) throw Error(ErrorCode::not_enrolled, "this secondary is not enrolled");
    if (m.text("account") != state_.account) throw Error(ErrorCode::unknown_account, "different account");
    token = state_.session_token;
    binding = pairing_->identity;
  }
  const std::string address = m.text("address");
  Message status;
  if (m.field("recovery_id").empty()) {
    status = cloud_request(msg(MessageType::recover_req, m.flow,
                               {token, u8_field(static_cast<std::uint8_t>(Role::primary)), m.field("mode"), binding,
                                to_bytes(address), m.field("nonce"), m.field("proof")},
                               m.session));
  } else {
    status = cloud_request(msg(MessageType::recover_query, m.flow, {token, m.field("recovery_id")}, m.session));
  }
  expect(status, MessageType::recover_status);
  if (status.text("state") != "approved" || status.field("binding") != binding) {
    throw Error(ErrorCode::approval_denied, "recovery is " + status.text("state"));
  }

  std::lock_guard lock(mu_);
  Message join = msg(MessageType::recover_join, m.flow,
                     {to_bytes(state_.account), status.field("recovery_id"), be32(state_.epoch),
                      state_.held_sub_share.encode(), state_.public_key.encode(), to_bytes(state_.catalog_key),
                      to_bytes(state_.cloud_address), state_.cloud_identity, identity_.public_bytes(),
                      to_bytes(network_.self())},
                     m.session);
  state_.peer_identity = binding;
  state_.peer_address = address;
  pairing_.reset();
  save();
  pin(address, binding);
  return join;
}

}  // namespace twofe
