#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "twofe/console.hpp"
#include "twofe/deployment.hpp"

namespace twofe {
namespace {

using nlohmann::json;

const Bytes kTag(16, 0x5a);

struct Fixture {
  ApprovalQueue queue;
  std::string token = new_pairing_token();
  ConsoleServer server{queue, token};
  std::unique_ptr<httplib::Client> client;

  Fixture() {
    server.start("127.0.0.1", 0);
    client = std::make_unique<httplib::Client>("127.0.0.1", server.port());
    client->set_read_timeout(10, 0);
  }
  std::string q(const std::string& path) const { return path + "?token=" + token; }
};

TEST(Console, RejectsMissingOrWrongToken) {
  Fixture f;
  auto r = f.client->Get("/requests");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 401);
  EXPECT_EQ(json::parse(r->body).at("error"), "bad-token");
  r = f.client->Get("/requests?token=00");
  EXPECT_EQ(r->status, 401);
  r = f.client->Get("/requests", {{"X-Pairing-Token", f.token}});
  EXPECT_EQ(r->status, 200);
}

TEST(Console, ListsRequestsAndNotifications) {
  Fixture f;
  f.queue.submit(RequestKind::decrypt, kTag, std::string("a.txt"));
  f.queue.notify(RequestKind::decrypt, kTag, std::nullopt, "served");
  auto r = f.client->Get(f.q("/requests"));
  ASSERT_TRUE(r);
  const json reqs = json::parse(r->body);
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].at("filename"), "a.txt");
  EXPECT_EQ(reqs[0].at("decision"), "pending");
  EXPECT_EQ(reqs[0].at("tag"), to_hex(kTag));
  r = f.client->Get(f.q("/notifications"));
  const json notes = json::parse(r->body);
  ASSERT_EQ(notes.size(), 1u);
  EXPECT_TRUE(notes[0].at("filename").is_null());
}

TEST(Console, DecisionsAndErrors) {
  Fixture f;
  const auto id = f.queue.submit(RequestKind::decrypt, kTag, std::nullopt);
  const std::string path = f.q("/requests/" + std::to_string(id) + "/decision");
  auto r = f.client->Post(path, R"({"decision":"maybe"})", "application/json");
  EXPECT_EQ(r->status, 400);
  r = f.client->Post(path, "not json", "application/json");
  EXPECT_EQ(r->status, 400);
  r = f.client->Post(path, R"({"decision":"approve"})", "application/json");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body).at("decision"), "approved");
  EXPECT_EQ(f.queue.find(id)->decision, Decision::approved);
  r = f.client->Post(path, R"({"decision":"deny"})", "application/json");
  EXPECT_EQ(r->status, 409);
  EXPECT_EQ(json::parse(r->body).at("error"), "already-decided");
  r = f.client->Post(f.q("/requests/999/decision"), R"({"decision":"deny"})", "application/json");
  EXPECT_EQ(r->status, 404);
}

TEST(Console, EventStream) {
  Fixture f;
  std::promise<std::string> got;
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", f.server.port());
    c.set_read_timeout(10, 0);
    std::string buf;
    bool done = false;
    c.Get(f.q("/events"), [&](const char* data, std::size_t n) {
      buf.append(data, n);
      if (!done && buf.find("event: decision") != std::string::npos) {
        done = true;
        got.set_value(buf);
        return false;
      }
      return true;
    });
    if (!done) got.set_value(buf);
  });
  // Give the subscriber time to register before producing events.
  std::uint64_t id = 0;
  for (int i = 0; i < 200 && id == 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    if (i == 20) id = f.queue.submit(RequestKind::encrypt, kTag, std::nullopt);
  }
  f.queue.decide(id, false);
  auto fut = got.get_future();
  ASSERT_EQ(fut.wait_for(std::chrono::seconds(10)), std::future_status::ready);
  const std::string s = fut.get();
  reader.join();
  EXPECT_NE(s.find("event: request\ndata: {"), std::string::npos) << s;
  EXPECT_NE(s.find("\"decision\":\"denied\""), std::string::npos) << s;
}

TEST(Console, LoopbackOnly) {
  ApprovalQueue q;
  ConsoleServer s(q, "t");
  EXPECT_THROW(s.start("0.0.0.0", 0), Error);
  EXPECT_THROW(ConsoleServer(q, ""), Error);
}

// The console drives a real prompt on a secondary.
TEST(Console, ApprovesDeviceRequest) {
  Deployment d;
  d.enroll();
  d.secondary().policy().mode = PolicyMode::prompt;
  const std::string token = new_pairing_token();
  ConsoleServer server(d.secondary().approvals(), token);
  server.start("127.0.0.1", 0);
  std::thread approver([&] {
    httplib::Client c("127.0.0.1", server.port());
    for (int i = 0; i < 500; ++i) {
      auto r = c.Get("/requests?token=" + token);
      if (r && r->status == 200) {
        for (const auto& req : json::parse(r->body)) {
          if (req.at("decision") != "pending") continue;
          c.Post("/requests/" + std::to_string(req.at("id").get<std::uint64_t>()) + "/decision?token=" + token,
                 R"({"decision":"approve"})", "application/json");
          return;
        }
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  });
  const Bytes data = to_bytes(std::string_view("hello"));
  d.secondary().policy().mode = PolicyMode::auto_approve;
  d.primary().encrypt("f", data);
  d.secondary().policy().mode = PolicyMode::prompt;
  EXPECT_EQ(d.primary().decrypt("f"), data);
  approver.join();
  EXPECT_EQ(d.secondary().approvals().approvals(), 1u);
}

}  // namespace
}  // namespace twofe
