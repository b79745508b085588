#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "twofe/deployment.hpp"
#include "twofe/error.hpp"

namespace twofe {
namespace {

namespace fs = std::filesystem;

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

// Cloud options whose clock the test can move.
struct Clocked {
  std::shared_ptr<std::chrono::hours> skew = std::make_shared<std::chrono::hours>(0);
  DeploymentOptions options() const {
    DeploymentOptions o;
    auto s = skew;
    o.cloud.now = [s] { return SystemClock::now() + *s; };
    return o;
  }
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("twofe-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

TEST(Cloud, TokensExpire) {
  Clocked clock;
  Deployment d(clock.options());
  d.enroll();
  d.primary().encrypt("a", to_bytes(std::string_view("x")));
  *clock.skew = std::chrono::hours(24 * 31);
  EXPECT_EQ(code_of([&] { d.primary().encrypt("b", {}); }), ErrorCode::bad_token);
  d.primary().login(d.cloud_address(), d.cloud_identity(), "alice", "correct horse");
  EXPECT_NO_THROW(d.primary().encrypt("b", {}));
}

TEST(Cloud, WrongPasswordAndUnknownAccount) {
  Deployment d;
  d.enroll();
  EXPECT_EQ(code_of([&] { d.primary().login(d.cloud_address(), d.cloud_identity(), "alice", "wrong"); }),
            ErrorCode::auth_failure);
  EXPECT_EQ(code_of([&] { d.primary().login(d.cloud_address(), d.cloud_identity(), "bob", "x"); }),
            ErrorCode::unknown_account);
  auto& other = d.add_primary("other");
  EXPECT_EQ(code_of([&] { other.create_account(d.cloud_address(), d.cloud_identity(), "alice", "p", "r"); }),
            ErrorCode::account_exists);
}

TEST(Cloud, TrashIsPurgedAfterRetention) {
  Clocked clock;
  Deployment d(clock.options());
  d.enroll();
  d.primary().encrypt("keep", to_bytes(std::string_view("1")));
  d.primary().encrypt("drop", to_bytes(std::string_view("2")));
  d.primary().remove("drop");
  EXPECT_EQ(d.cloud().file_count("alice"), 1u);
  EXPECT_EQ(d.cloud().file_count("alice", true), 2u);
  *clock.skew = std::chrono::hours(24 * 29);
  d.cloud().purge_expired();
  EXPECT_EQ(d.cloud().file_count("alice", true), 2u);
  *clock.skew = std::chrono::hours(24 * 31);
  d.cloud().purge_expired();
  EXPECT_EQ(d.cloud().file_count("alice", true), 1u);
  d.primary().login(d.cloud_address(), d.cloud_identity(), "alice", "correct horse");
  EXPECT_NE(code_of([&] { d.primary().restore("drop"); }), ErrorCode::internal);
}

TEST(Cloud, VaultFollowsEpochs) {
  Deployment d;
  d.enroll();
  const auto before = d.cloud().vault("alice");
  ASSERT_TRUE(before.primary && before.secondary);
  d.primary().refresh();
  const auto after = d.cloud().vault("alice");
  EXPECT_EQ(after.epoch, before.epoch + 1);
  EXPECT_FALSE(*after.primary == *before.primary);
  EXPECT_FALSE(*after.secondary == *before.secondary);
  EXPECT_EQ(d.cloud().vault_history("alice").size(), 4u);
  EXPECT_EQ(d.cloud().releases("alice"), 0u);
}

TEST(Cloud, StateSurvivesRestart) {
  const fs::path dir = scratch("cloud");
  DeploymentOptions o;
  o.cloud.data_dir = dir;
  CloudService::VaultView vault;
  {
    Deployment d(o);
    d.enroll();
    d.primary().encrypt("a", to_bytes(std::string_view("x")));
    d.primary().encrypt("b", to_bytes(std::string_view("y")));
    d.primary().remove("b");
    vault = d.cloud().vault("alice");
  }
  // A write torn by a crash must not cost the earlier records.
  std::ofstream(dir / "journal.jsonl", std::ios::app) << R"({"id":"alice","verif)";
  CloudService reloaded(o.cloud, std::make_unique<MemoryBlobStore>());
  const auto again = reloaded.vault("alice");
  EXPECT_TRUE(again.enrolled);
  EXPECT_EQ(again.epoch, vault.epoch);
  EXPECT_TRUE(*again.primary == *vault.primary);
  EXPECT_TRUE(*again.secondary == *vault.secondary);
  EXPECT_EQ(reloaded.file_count("alice"), 1u);
  EXPECT_EQ(reloaded.file_count("alice", true), 2u);
  fs::remove_all(dir);
}

TEST(Cloud, DirectoryBlobStore) {
  const fs::path dir = scratch("blobs");
  DirectoryBlobStore store(dir);
  EXPECT_FALSE(store.get("ab/cd"));
  store.put("ab/cd", Bytes{1, 2, 3});
  EXPECT_EQ(store.get("ab/cd"), (Bytes{1, 2, 3}));
  store.erase("ab/cd");
  EXPECT_FALSE(store.get("ab/cd"));
  fs::remove_all(dir);
}

TEST(Cloud, ExternalBlobStorePrefixesKeys) {
  std::map<std::string, Bytes> remote;
  ExternalBlobStore::Client c;
  c.upload = [&](const std::string& k, ByteView v) { remote[k] = Bytes(v.begin(), v.end()); };
  c.download = [&](const std::string& k) -> std::optional<Bytes> {
    auto it = remote.find(k);
    return it == remote.end() ? std::nullopt : std::optional<Bytes>(it->second);
  };
  c.remove = [&](const std::string& k) { remote.erase(k); };
  ExternalBlobStore store(c, "twofe/");
  store.put("x", Bytes{9});
  EXPECT_EQ(remote.count("twofe/x"), 1u);
  EXPECT_EQ(store.get("x"), Bytes{9});
  store.erase("x");
  EXPECT_TRUE(remote.empty());
}

TEST(Cloud, ProofsBindTheirInputs) {
  const Bytes key = recovery_key_from_secret("words");
  const Bytes nonce(32, 1);
  const Bytes id1(32, 2), id2(32, 3);
  EXPECT_EQ(recovery_proof(key, nonce, "alice", id1), recovery_proof(key, nonce, "alice", id1));
  EXPECT_NE(recovery_proof(key, nonce, "alice", id1), recovery_proof(key, nonce, "alice", id2));
  EXPECT_NE(recovery_proof(key, nonce, "alice", id1), recovery_proof(key, nonce, "bob", id1));
  EXPECT_NE(recovery_proof(key, nonce, "alice", id1),
            password_reset_proof(key, nonce, "alice", std::string(id1.begin(), id1.end())));
}

}  // namespace
}  // namespace twofe
