#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "twofe/cloud.hpp"
#include "twofe/devices.hpp"
#include "twofe/random.hpp"
#include "twofe/tcp_transport.hpp"
#include "twofe/transport.hpp"

namespace twofe {

enum class TransportKind : std::uint8_t { local, tcp };

struct DeploymentOptions {
  TransportKind transport = TransportKind::local;
  // Replaces system entropy for the deployment's lifetime when set.
  std::optional<std::uint64_t> seed;
  CloudOptions cloud = fast_cloud_options();
  std::string host = "127.0.0.1";

  // Argon2id at the library minimum, for tests and simulations.
  static CloudOptions fast_cloud_options();
};

// A cloud plus any number of named devices on one network. The in-process
// transport supports offline nodes and tampering; the TCP transport runs
// every node behind its own loopback server.
class Deployment {
 public:
  explicit Deployment(DeploymentOptions options = {});
  ~Deployment();
  Deployment(const Deployment&) = delete;
  Deployment& operator=(const Deployment&) = delete;

  CloudService& cloud() { return *cloud_; }
  const std::string& cloud_address() const { return cloud_address_; }
  Bytes cloud_identity() const { return cloud_identity_.public_bytes(); }

  PrimaryDevice& add_primary(const std::string& name, DeviceOptions options = {});
  SecondaryDevice& add_secondary(const std::string& name, DeviceOptions options = {});
  // A device brought up from an existing (possibly stolen) state image.
  PrimaryDevice& adopt_primary(const std::string& name, DeviceState state, DeviceOptions options = {});
  SecondaryDevice& adopt_secondary(const std::string& name, DeviceState state, DeviceOptions options = {});

  PrimaryDevice& primary(const std::string& name = "primary");
  SecondaryDevice& secondary(const std::string& name = "secondary");
  std::string address_of(const std::string& name) const;
  bool has(const std::string& name) const { return nodes_.count(name) != 0; }

  // Creates the account on "primary" and enrolls "secondary".
  void enroll(const std::string& account = "alice", const std::string& password = "correct horse",
              const std::string& recovery_secret = "recovery words");

  // In-process only.
  LocalNetwork& local();
  void set_online(const std::string& name, bool online);

  WireLog& log();

 private:
  struct Forward;
  struct Node;

  Node& add_node(const std::string& name, const DeviceState& state);

  DeploymentOptions options_;
  std::unique_ptr<DeterministicRandom> rng_;
  LocalNetwork local_;
  WireLog tcp_log_;
  Identity cloud_identity_;
  std::string cloud_address_;
  std::unique_ptr<Forward> cloud_forward_;
  std::unique_ptr<TcpServer> cloud_server_;
  std::unique_ptr<Network> cloud_net_;
  std::unique_ptr<CloudService> cloud_;
  std::map<std::string, std::unique_ptr<Node>> nodes_;
  std::map<std::string, std::string> addresses_;
};

}  // namespace twofe
