#include <gtest/gtest.h>

#include <random>

#include "twofe/error.hpp"
#include "twofe/session.hpp"

namespace twofe {
namespace {

const std::vector<MessageType> kScript = {MessageType::sr_commit, MessageType::sr_reveal, MessageType::tprf_req};

TEST(Session, FollowsScript) {
  ProtocolSession s(Flow::encrypt, new_session_id(), kScript);
  s.accept(MessageType::sr_commit);
  s.sent(MessageType::sr_share);
  s.accept(MessageType::sr_reveal);
  s.accept(MessageType::tprf_req);
  EXPECT_TRUE(s.complete());
  s.finish();
  EXPECT_EQ(s.state(), SessionState::done);
  EXPECT_EQ(s.transcript(), (std::vector<std::string>{"<SR_COMMIT", ">SR_SHARE", "<SR_REVEAL", "<TPRF_REQ"}));
}

TEST(Session, OutOfOrderAborts) {
  ProtocolSession s(Flow::encrypt, new_session_id(), kScript);
  s.stash("s1", Bytes(32, 7));
  try {
    s.accept(MessageType::sr_reveal);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::protocol_order);
  }
  EXPECT_EQ(s.state(), SessionState::aborted);
  EXPECT_EQ(s.secrets_held(), 0u);
  try {
    s.accept(MessageType::sr_commit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::session_aborted);
  }
}

TEST(Session, FinishWipesSecrets) {
  ProtocolSession s(Flow::decrypt, new_session_id(), {MessageType::tprf_req});
  s.stash("k", Bytes(32, 1));
  EXPECT_EQ(s.secrets_held(), 1u);
  EXPECT_EQ(s.secret("k"), Bytes(32, 1));
  s.accept(MessageType::tprf_req);
  s.finish();
  EXPECT_EQ(s.secrets_held(), 0u);
  EXPECT_TRUE(s.secret("k").empty());
  EXPECT_THROW(s.secret("other"), Error);
}

TEST(Session, InspectorSeesClosedSessions) {
  std::vector<std::size_t> held;
  ProtocolSession::set_inspector([&](const ProtocolSession& s) { held.push_back(s.secrets_held()); });
  {
    ProtocolSession s(Flow::decrypt, new_session_id(), {MessageType::tprf_req});
    s.stash("k", Bytes(32, 1));
    s.abort("test");
  }
  ProtocolSession::set_inspector(nullptr);
  EXPECT_EQ(held, std::vector<std::size_t>{0});
}

TEST(Session, Expiry) {
  ProtocolSession s(Flow::decrypt, new_session_id(), {MessageType::tprf_req});
  const auto now = ProtocolSession::Clock::now();
  EXPECT_FALSE(s.expired(now, std::chrono::seconds(30)));
  EXPECT_TRUE(s.expired(now + std::chrono::seconds(31), std::chrono::seconds(30)));
}

// Random message streams: the step counter only ever moves forward, and the
// first unexpected message ends the session for good.
TEST(Session, MonotoneUnderRandomInput) {
  std::mt19937 rng(1234);
  const std::vector<MessageType> alphabet = {MessageType::sr_commit, MessageType::sr_reveal, MessageType::tprf_req,
                                             MessageType::ok, MessageType::sr_share};
  for (int run = 0; run < 500; ++run) {
    ProtocolSession s(Flow::encrypt, new_session_id(), kScript);
    std::size_t last = 0;
    bool aborted = false;
    for (int i = 0; i < 6; ++i) {
      const MessageType t = alphabet[rng() % alphabet.size()];
      const bool expected = !aborted && s.step() < kScript.size() && kScript[s.step()] == t;
      try {
        s.accept(t);
        EXPECT_TRUE(expected);
      } catch (const Error&) {
        EXPECT_FALSE(expected);
        aborted = true;
      }
      EXPECT_GE(s.step(), last);
      last = s.step();
      if (aborted) EXPECT_EQ(s.state(), SessionState::aborted);
    }
  }
}

}  // namespace
}  // namespace twofe
