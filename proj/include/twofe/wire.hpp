#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twofe/bytes.hpp"
#include "twofe/error.hpp"

namespace twofe {

inline constexpr std::uint8_t kWireVersion = 1;

enum class Flow : std::uint8_t {
  none = 0,
  enroll = 1,
  encrypt = 2,
  decrypt = 3,
  migrate = 4,
  recover = 5,
  refresh = 6,
  session = 7,
  pairing = 8,
  storage = 9,
};

std::string_view flow_name(Flow f);

enum class MessageType : std::uint8_t {
  pair_hello = 0x01,
  pair_confirm = 0x02,

  enroll_shares = 0x10,
  enroll_reply = 0x11,

  sr_commit = 0x20,
  sr_share = 0x21,
  sr_reveal = 0x22,

  tprf_req = 0x30,
  tprf_resp = 0x31,

  file_put = 0x40,
  file_get = 0x41,
  file_data = 0x42,
  file_delete = 0x43,
  file_undelete = 0x44,
  file_list = 0x45,
  file_listing = 0x46,
  catalog_put = 0x47,
  catalog_get = 0x48,
  catalog_data = 0x49,

  account_create = 0x50,
  login = 0x51,
  session_grant = 0x52,
  session_invalidate = 0x53,
  register_device = 0x54,
  password_reset = 0x55,

  vault_put = 0x60,
  vault_catalog_put = 0x61,

  recover_req = 0x70,
  recover_status = 0x71,
  auth_ping = 0x72,
  auth_approve = 0x73,
  verify_challenge = 0x74,
  verify_nonce = 0x75,
  share_fetch = 0x76,
  share_release = 0x77,
  recover_join = 0x78,
  recover_start = 0x79,
  recover_query = 0x7a,

  refresh_delta = 0x80,

  ok = 0xf0,
  error = 0xff,
};

struct MessageSpec {
  MessageType type;
  std::string_view name;
  std::string_view direction;
  std::vector<std::string_view> fields;
};

// Every message the engine speaks, with its payload field names in order.
// schema/messages.json is generated from this table.
const std::vector<MessageSpec>& message_table();
const MessageSpec& message_spec(MessageType t);  // throws invalid-encoding for unknown codes
std::string_view message_name(MessageType t);

using SessionId = std::array<std::uint8_t, 16>;
SessionId new_session_id();

// version:1 | flow:1 | session_id:16 | type:1 | fields (each be32 len || bytes)
struct Message {
  Flow flow = Flow::none;
  SessionId session{};
  MessageType type = MessageType::ok;
  std::vector<Bytes> fields;

  Bytes encode() const;
  // Rejects unknown versions, flows and types, and field counts that differ
  // from the schema.
  static Message decode(ByteView bytes);

  const Bytes& field(std::size_t i) const;
  const Bytes& field(std::string_view name) const;
  std::string text(std::string_view name) const { return to_string(field(name)); }
  std::uint32_t u32(std::string_view name) const;
  std::uint8_t u8(std::string_view name) const;
};

Message make_message(MessageType type, Flow flow, const SessionId& session, std::vector<Bytes> fields);

Message ok_message(Flow flow, const SessionId& session);
Message error_message(Flow flow, const SessionId& session, const Error& e);

// Turns an ERROR reply into the Error it carries, and any other unexpected
// type into protocol-order.
const Message& expect(const Message& reply, MessageType type);

Bytes be32(std::uint32_t v);
Bytes u8_field(std::uint8_t v);

}  // namespace twofe

namespace twofe {

// JSON description of message_table(), as committed in schema/messages.json.
std::string messages_schema();

}  // namespace twofe
