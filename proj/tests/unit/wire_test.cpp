#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "twofe/error.hpp"
#include "twofe/wire.hpp"

namespace twofe {
namespace {

TEST(Wire, RoundTrip) {
  const SessionId sid = new_session_id();
  const Message m = make_message(MessageType::tprf_req, Flow::decrypt, sid, {Bytes(16, 1), Bytes(32, 2)});
  const Message back = Message::decode(m.encode());
  EXPECT_EQ(back.flow, Flow::decrypt);
  EXPECT_EQ(back.session, sid);
  EXPECT_EQ(back.type, MessageType::tprf_req);
  EXPECT_EQ(back.field("tag"), Bytes(16, 1));
  EXPECT_EQ(back.field("seed"), Bytes(32, 2));
}

TEST(Wire, EnvelopeLayout) {
  const Message m = make_message(MessageType::sr_share, Flow::encrypt, SessionId{}, {Bytes{0xaa}});
  const Bytes e = m.encode();
  ASSERT_EQ(e.size(), 1u + 1 + 16 + 1 + 4 + 1);
  EXPECT_EQ(e[0], kWireVersion);
  EXPECT_EQ(e[1], static_cast<std::uint8_t>(Flow::encrypt));
  EXPECT_EQ(e[18], static_cast<std::uint8_t>(MessageType::sr_share));
  EXPECT_EQ(to_hex(ByteView(e).subspan(19)), "00000001aa");
}

TEST(Wire, RejectsWrongFieldCount) {
  Message m = make_message(MessageType::sr_commit, Flow::encrypt, SessionId{}, {Bytes(32, 0)});
  m.fields.push_back(Bytes{1});
  try {
    Message::decode(m.encode());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_encoding);
  }
  EXPECT_THROW(make_message(MessageType::sr_commit, Flow::encrypt, SessionId{}, {}), Error);
}

TEST(Wire, RejectsUnknownVersionTypeAndFlow) {
  Bytes e = ok_message(Flow::none, SessionId{}).encode();
  Bytes bad = e;
  bad[0] = 9;
  EXPECT_THROW(Message::decode(bad), Error);
  bad = e;
  bad[1] = 200;
  EXPECT_THROW(Message::decode(bad), Error);
  bad = e;
  bad[18] = 0x99;
  EXPECT_THROW(Message::decode(bad), Error);
  EXPECT_THROW(Message::decode(ByteView(e).first(10)), Error);
}

TEST(Wire, ErrorRepliesCarryCodes) {
  const Message err = error_message(Flow::storage, SessionId{}, Error(ErrorCode::unknown_tag, "gone"));
  try {
    expect(Message::decode(err.encode()), MessageType::file_data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_tag);
    EXPECT_EQ(e.detail(), "gone");
  }
  try {
    expect(ok_message(Flow::none, SessionId{}), MessageType::file_data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::protocol_order);
  }
}

TEST(Wire, TableIsConsistent) {
  std::set<std::uint8_t> codes;
  std::set<std::string_view> names;
  for (const auto& spec : message_table()) {
    EXPECT_TRUE(codes.insert(static_cast<std::uint8_t>(spec.type)).second);
    EXPECT_TRUE(names.insert(spec.name).second);
    EXPECT_EQ(&message_spec(spec.type), &spec);
  }
}

TEST(Wire, CommittedSchemaMatchesTable) {
  std::ifstream in(std::string(TWOFE_SOURCE_DIR) + "/schema/messages.json");
  ASSERT_TRUE(in) << "schema/messages.json missing; regenerate with `twofe schema`";
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), messages_schema()) << "regenerate with `twofe schema > schema/messages.json`";
}

}  // namespace
}  // namespace twofe
