#include "twofe/wire.hpp"

#include <algorithm>
#include <unordered_map>

#include "twofe/random.hpp"

namespace twofe {

std::string_view flow_name(Flow f) {
  switch (f) {
    case Flow::none: return "none";
    case Flow::enroll: return "enroll";
    case Flow::encrypt: return "encrypt";
    case Flow::decrypt: return "decrypt";
    case Flow::migrate: return "migrate";
    case Flow::recover: return "recover";
    case Flow::refresh: return "refresh";
    case Flow::session: return "session";
    case Flow::pairing: return "pairing";
    case Flow::storage: return "storage";
  }
  return "?";
}

const std::vector<MessageSpec>& message_table() {
  using T = MessageType;
  static const std::vector<MessageSpec> table = {
      {T::pair_hello, "PAIR_HELLO", "device->device", {"device_id", "identity", "nonce", "role"}},
      {T::pair_confirm, "PAIR_CONFIRM", "primary->secondary",
       {"sas", "account", "catalog_key", "token", "cloud_address", "cloud_identity", "peer_address"}},
      {T::enroll_shares, "ENROLL_SHARES", "primary->secondary", {"epoch", "sub_share"}},
      {T::enroll_reply, "ENROLL_REPLY", "secondary->primary", {"sub_share", "public_key"}},
      {T::sr_commit, "SR_COMMIT", "primary->secondary", {"commitment"}},
      {T::sr_share, "SR_SHARE", "secondary->primary", {"s1"}},
      {T::sr_reveal, "SR_REVEAL", "primary->secondary", {"s0"}},
      {T::tprf_req, "TPRF_REQ", "primary->secondary", {"tag", "seed"}},
      {T::tprf_resp, "TPRF_RESP", "secondary->primary", {"blinded", "proof"}},
      {T::file_put, "FILE_PUT", "device->cloud", {"token", "tag", "seed", "ciphertext"}},
      {T::file_get, "FILE_GET", "device->cloud", {"token", "tag"}},
      {T::file_data, "FILE_DATA", "cloud->device", {"tag", "seed", "ciphertext"}},
      {T::file_delete, "FILE_DELETE", "device->cloud", {"token", "tag"}},
      {T::file_undelete, "FILE_UNDELETE", "device->cloud", {"token", "tag"}},
      {T::file_list, "FILE_LIST", "device->cloud", {"token"}},
      {T::file_listing, "FILE_LISTING", "cloud->device", {"tags"}},
      {T::catalog_put, "CATALOG_PUT", "device->cloud", {"token", "blob"}},
      {T::catalog_get, "CATALOG_GET", "device->cloud", {"token"}},
      {T::catalog_data, "CATALOG_DATA", "cloud->device", {"blob"}},
      {T::account_create, "ACCOUNT_CREATE", "device->cloud", {"account", "password", "recovery_key"}},
      {T::login, "LOGIN", "device->cloud", {"account", "password", "device_id", "role", "address", "identity"}},
      {T::session_grant, "SESSION_GRANT", "cloud->device", {"token", "ttl_seconds"}},
      {T::session_invalidate, "SESSION_INVALIDATE", "device->cloud", {"token", "device_id"}},
      {T::register_device, "REGISTER_DEVICE", "primary->cloud", {"token", "device_id", "role", "address", "identity"}},
      {T::password_reset, "PASSWORD_RESET", "device->cloud", {"account", "password", "nonce", "proof"}},
      {T::vault_put, "VAULT_PUT", "device->cloud", {"token", "epoch", "sub_share"}},
      {T::vault_catalog_put, "VAULT_CATALOG_PUT", "primary->cloud", {"token", "wrap_seed", "sealed_key"}},
      {T::recover_req, "RECOVER_REQ", "device->cloud",
       {"token", "role", "mode", "binding", "address", "nonce", "proof"}},
      {T::recover_status, "RECOVER_STATUS", "cloud->device", {"recovery_id", "role", "state", "binding"}},
      {T::auth_ping, "AUTH_PING", "cloud->device", {"recovery_id", "role", "mode", "binding", "address"}},
      {T::auth_approve, "AUTH_APPROVE", "device->cloud", {"recovery_id", "binding"}},
      {T::verify_challenge, "VERIFY_CHALLENGE", "device->cloud", {"account"}},
      {T::verify_nonce, "VERIFY_NONCE", "cloud->device", {"nonce"}},
      {T::share_fetch, "SHARE_FETCH", "device->cloud", {"account", "recovery_id", "device_id", "address"}},
      {T::share_release, "SHARE_RELEASE", "cloud->device",
       {"epoch", "sub_share", "token", "wrap_seed", "sealed_key"}},
      {T::recover_join, "RECOVER_JOIN", "device->device",
       {"account", "recovery_id", "epoch", "held_sub_share", "public_key", "catalog_key", "cloud_address",
        "cloud_identity", "peer_identity", "peer_address"}},
      {T::recover_start, "RECOVER_START", "primary->secondary",
       {"account", "recovery_id", "mode", "nonce", "proof", "address"}},
      {T::recover_query, "RECOVER_QUERY", "device->cloud", {"token", "recovery_id"}},
      {T::refresh_delta, "REFRESH_DELTA", "primary->secondary", {"epoch", "delta"}},
      {T::ok, "OK", "any", {}},
      {T::error, "ERROR", "any", {"code", "text"}},
  };
  return table;
}

const MessageSpec& message_spec(MessageType t) {
  static const std::unordered_map<std::uint8_t, const MessageSpec*> index = [] {
    std::unordered_map<std::uint8_t, const MessageSpec*> m;
    for (const auto& spec : message_table()) m[static_cast<std::uint8_t>(spec.type)] = &spec;
    return m;
  }();
  auto it = index.find(static_cast<std::uint8_t>(t));
  if (it == index.end()) {
    throw Error(ErrorCode::invalid_encoding, "unknown message type " + std::to_string(static_cast<int>(t)));
  }
  return *it->second;
}

std::string_view message_name(MessageType t) { return message_spec(t).name; }

SessionId new_session_id() { return random_array<16>(); }

Bytes Message::encode() const {
  ByteWriter w;
  w.u8(kWireVersion).u8(static_cast<std::uint8_t>(flow)).raw(session).u8(static_cast<std::uint8_t>(type));
  for (const auto& f : fields) w.field(f);
  return w.take();
}

Message Message::decode(ByteView bytes) {
  ByteReader r(bytes);
  if (r.u8() != kWireVersion) throw Error(ErrorCode::invalid_encoding, "unsupported wire version");
  Message m;
  const std::uint8_t flow = r.u8();
  if (flow > static_cast<std::uint8_t>(Flow::storage)) throw Error(ErrorCode::invalid_encoding, "unknown flow");
  m.flow = static_cast<Flow>(flow);
  m.session = to_array<16>(r.raw(16));
  m.type = static_cast<MessageType>(r.u8());
  const MessageSpec& spec = message_spec(m.type);
  while (!r.done()) m.fields.push_back(r.field());
  if (m.fields.size() != spec.fields.size()) {
    throw Error(ErrorCode::invalid_encoding, std::string(spec.name) + " has wrong field count");
  }
  return m;
}

const Bytes& Message::field(std::size_t i) const {
  if (i >= fields.size()) throw Error(ErrorCode::invalid_encoding, "missing field");
  return fields[i];
}

const Bytes& Message::field(std::string_view name) const {
  const auto& names = message_spec(type).fields;
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(ErrorCode::internal, std::string(message_name(type)) + " has no field " + std::string(name));
  }
  return field(static_cast<std::size_t>(it - names.begin()));
}

std::uint32_t Message::u32(std::string_view name) const {
  const Bytes& b = field(name);
  ByteReader r(b);
  const std::uint32_t v = r.u32();
  r.expect_end();
  return v;
}

std::uint8_t Message::u8(std::string_view name) const {
  const Bytes& b = field(name);
  if (b.size() != 1) throw Error(ErrorCode::invalid_encoding, std::string(name) + " must be one byte");
  return b[0];
}

Message make_message(MessageType type, Flow flow, const SessionId& session, std::vector<Bytes> fields) {
  const MessageSpec& spec = message_spec(type);
  if (fields.size() != spec.fields.size()) {
    throw Error(ErrorCode::internal, std::string(spec.name) + " built with wrong field count");
  }
  return Message{flow, session, type, std::move(fields)};
}

Message ok_message(Flow flow, const SessionId& session) { return make_message(MessageType::ok, flow, session, {}); }

Message error_message(Flow flow, const SessionId& session, const Error& e) {
  ByteWriter code;
  code.u16(static_cast<std::uint16_t>(e.code()));
  return make_message(MessageType::error, flow, session, {code.take(), to_bytes(e.detail())});
}

const Message& expect(const Message& reply, MessageType type) {
  if (reply.type == MessageType::error) {
    ByteReader r(reply.field(0));
    const auto code = static_cast<ErrorCode>(r.u16());
    throw Error(code, to_string(reply.field(1)));
  }
  if (reply.type != type) {
    throw Error(ErrorCode::protocol_order, "expected " + std::string(message_name(type)) + ", got " +
                                               std::string(message_name(reply.type)));
  }
  return reply;
}

Bytes be32(std::uint32_t v) {
  ByteWriter w;
  w.u32(v);
  return w.take();
}

Bytes u8_field(std::uint8_t v) { return Bytes{v}; }

}  // namespace twofe
