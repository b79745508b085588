#include <gtest/gtest.h>

#include "twofe/error.hpp"
#include "twofe/tcp_transport.hpp"
#include "twofe/transport.hpp"

namespace twofe {
namespace {

// Replies OK to everything and remembers who called.
struct Echo : Endpoint {
  PeerInfo last;
  int one_way = 0;
  std::optional<Message> handle(const Message& m, const PeerInfo& from) override {
    last = from;
    if (m.type == MessageType::sr_reveal) {
      ++one_way;
      return std::nullopt;
    }
    if (m.type == MessageType::file_get) throw Error(ErrorCode::unknown_tag, "no such file");
    return make_message(MessageType::catalog_data, m.flow, m.session, {m.fields.empty() ? Bytes{} : m.fields[0]});
  }
};

Message get(Bytes token) {
  return make_message(MessageType::catalog_get, Flow::storage, new_session_id(), {std::move(token)});
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

TEST(LocalNetwork, DeliversWithIdentity) {
  LocalNetwork net;
  Echo echo;
  net.attach("b", &echo, Bytes{7});
  net.attach("a", nullptr, Bytes{1});
  auto a = net.port("a");
  const Message r = a->request("b", get(Bytes{9}));
  EXPECT_EQ(r.field("blob"), Bytes{9});
  EXPECT_EQ(echo.last.address, "a");
  EXPECT_EQ(echo.last.identity, Bytes{1});
  EXPECT_EQ(net.log().events().size(), 2u);
}

TEST(LocalNetwork, OfflineAndUnknownNodes) {
  LocalNetwork net;
  Echo echo;
  net.attach("b", &echo, {});
  auto a = net.port("a");
  net.set_online("b", false);
  EXPECT_EQ(code_of([&] { a->request("b", get({})); }), ErrorCode::peer_unreachable);
  EXPECT_EQ(code_of([&] { a->request("nowhere", get({})); }), ErrorCode::peer_unreachable);
  net.set_online("b", true);
  EXPECT_NO_THROW(a->request("b", get({})));
}

TEST(LocalNetwork, ErrorsTravelAsReplies) {
  LocalNetwork net;
  Echo echo;
  net.attach("b", &echo, {});
  auto a = net.port("a");
  const Message r =
      a->request("b", make_message(MessageType::file_get, Flow::storage, SessionId{}, {Bytes{}, Bytes{}}));
  EXPECT_EQ(r.type, MessageType::error);
  EXPECT_EQ(code_of([&] { expect(r, MessageType::file_data); }), ErrorCode::unknown_tag);
}

TEST(LocalNetwork, TamperRewritesOutgoing) {
  LocalNetwork net;
  Echo echo;
  net.attach("b", &echo, {});
  net.attach("a", nullptr, {});
  net.set_tamper("a", [](Message& m, const std::string&) { m.fields[0] = Bytes{0x66}; });
  auto a = net.port("a");
  EXPECT_EQ(a->request("b", get(Bytes{1})).field("blob"), Bytes{0x66});
}

TEST(LocalNetwork, OneWayMessages) {
  LocalNetwork net;
  Echo echo;
  net.attach("b", &echo, {});
  auto a = net.port("a");
  a->send("b", make_message(MessageType::sr_reveal, Flow::encrypt, SessionId{}, {Bytes(32, 0)}));
  EXPECT_EQ(echo.one_way, 1);
}

TEST(WireLog, DigestTracksContent) {
  WireLog a, b;
  WireEvent e;
  e.bytes = Bytes{1, 2};
  a.record(e);
  b.record(e);
  EXPECT_EQ(a.digest(), b.digest());
  e.bytes = Bytes{3};
  b.record(e);
  EXPECT_NE(a.digest(), b.digest());
}

TEST(Tcp, AddressParsing) {
  EXPECT_EQ(parse_address("127.0.0.1:80").port, 80);
  EXPECT_EQ(parse_address("[::1]:9000").host, "::1");
  EXPECT_EQ(code_of([] { parse_address("nohost"); }), ErrorCode::usage);
  EXPECT_EQ(code_of([] { parse_address("h:99999"); }), ErrorCode::usage);
}

TEST(Tcp, EncryptedRequestReply) {
  Echo echo;
  const Identity server_id = Identity::generate();
  TcpServer server(echo, server_id);
  server.start("127.0.0.1", 0);
  const Identity client_id = Identity::generate();
  WireLog log;
  TcpNetwork net("client", client_id, &log);
  net.pin(server.address(), server_id.public_bytes());
  for (int i = 0; i < 3; ++i) EXPECT_EQ(net.request(server.address(), get(Bytes{std::uint8_t(i)})).field("blob"), Bytes{std::uint8_t(i)});
  EXPECT_EQ(echo.last.identity, client_id.public_bytes());
  EXPECT_EQ(net.peer_identity(server.address()), server_id.public_bytes());
  EXPECT_EQ(log.events().size(), 6u);
  const Message err =
      net.request(server.address(), make_message(MessageType::file_get, Flow::storage, SessionId{}, {Bytes{}, Bytes{}}));
  EXPECT_EQ(code_of([&] { expect(err, MessageType::file_data); }), ErrorCode::unknown_tag);
  net.send(server.address(), make_message(MessageType::sr_reveal, Flow::encrypt, SessionId{}, {Bytes(32, 0)}));
  net.request(server.address(), get({}));
  EXPECT_EQ(echo.one_way, 1);
  server.stop();
}

TEST(Tcp, PinMismatchRefused) {
  Echo echo;
  TcpServer server(echo, Identity::generate());
  server.start("127.0.0.1", 0);
  TcpNetwork net("client", Identity::generate());
  net.pin(server.address(), Identity::generate().public_bytes());
  const ErrorCode c = code_of([&] { net.request(server.address(), get({})); });
  EXPECT_TRUE(c == ErrorCode::auth_failure || c == ErrorCode::peer_unreachable) << static_cast<int>(c);
}

TEST(Tcp, UnreachablePeer) {
  TcpNetwork net("client", Identity::generate());
  EXPECT_EQ(code_of([&] { net.request("127.0.0.1:1", get({})); }), ErrorCode::peer_unreachable);
}

TEST(Tcp, Fingerprint) {
  const Identity id = Identity::generate();
  EXPECT_EQ(fingerprint(id.public_bytes()).size(), 16u);
  EXPECT_EQ(Identity::from_secret(id.secret_key).public_key, id.public_key);
}

}  // namespace
}  // namespace twofe
