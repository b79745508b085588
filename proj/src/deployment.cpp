#include "twofe/deployment.hpp"

#include <sodium.h>

#include "twofe/error.hpp"
#include "twofe/random.hpp"

namespace twofe {

struct Deployment::Forward : Endpoint {
  Endpoint* target = nullptr;
  std::optional<Message> handle(const Message& m, const PeerInfo& from) override {
    if (!target) throw Error(ErrorCode::peer_unreachable, "node is not running");
    return target->handle(m, from);
  }
};

struct Deployment::Node {
  Forward forward;
  std::unique_ptr<Network> network;
  std::unique_ptr<TcpServer> server;
  std::unique_ptr<Device> device;
};

CloudOptions DeploymentOptions::fast_cloud_options() {
  CloudOptions o;
  o.pwhash_opslimit = crypto_pwhash_OPSLIMIT_MIN;
  o.pwhash_memlimit = crypto_pwhash_MEMLIMIT_MIN;
  return o;
}

Deployment::Deployment(DeploymentOptions options) : options_(std::move(options)) {
  if (options_.seed) rng_ = std::make_unique<DeterministicRandom>(*options_.seed);
  cloud_identity_ = Identity::generate();
  cloud_ = std::make_unique<CloudService>(options_.cloud, std::make_unique<MemoryBlobStore>());
  cloud_forward_ = std::make_unique<Forward>();
  cloud_forward_->target = cloud_.get();
  if (options_.transport == TransportKind::local) {
    cloud_address_ = "cloud";
    local_.attach(cloud_address_, cloud_forward_.get(), cloud_identity_.public_bytes());
    cloud_net_ = local_.port(cloud_address_);
  } else {
    cloud_server_ = std::make_unique<TcpServer>(*cloud_forward_, cloud_identity_);
    cloud_server_->start(options_.host, 0);
    cloud_address_ = cloud_server_->address();
    cloud_net_ = std::make_unique<TcpNetwork>(cloud_address_, cloud_identity_, &tcp_log_);
  }
  cloud_->set_network(cloud_net_.get());
}

Deployment::~Deployment() {
  for (auto& [name, node] : nodes_) {
    if (node->server) node->server->stop();
  }
  if (cloud_server_) cloud_server_->stop();
  for (auto& [name, node] : nodes_) node->forward.target = nullptr;
  cloud_forward_->target = nullptr;
  nodes_.clear();
  cloud_.reset();
}

Deployment::Node& Deployment::add_node(const std::string& name, const DeviceState& state) {
  if (nodes_.count(name)) throw Error(ErrorCode::usage, "node " + name + " already exists");
  auto node = std::make_unique<Node>();
  if (options_.transport == TransportKind::local) {
    local_.attach(name, &node->forward, state.identity.public_bytes());
    node->network = local_.port(name);
    addresses_[name] = name;
  } else {
    node->server = std::make_unique<TcpServer>(node->forward, state.identity);
    node->server->start(options_.host, 0);
    addresses_[name] = node->server->address();
    node->network = std::make_unique<TcpNetwork>(addresses_[name], state.identity, &tcp_log_);
  }
  return *nodes_.emplace(name, std::move(node)).first->second;
}

PrimaryDevice& Deployment::add_primary(const std::string& name, DeviceOptions options) {
  return adopt_primary(name, fresh_device_state(Role::primary), std::move(options));
}

SecondaryDevice& Deployment::add_secondary(const std::string& name, DeviceOptions options) {
  return adopt_secondary(name, fresh_device_state(Role::secondary), std::move(options));
}

PrimaryDevice& Deployment::adopt_primary(const std::string& name, DeviceState state, DeviceOptions options) {
  Node& node = add_node(name, state);
  auto device = std::make_unique<PrimaryDevice>(std::move(state), *node.network, std::move(options));
  auto& ref = *device;
  node.device = std::move(device);
  node.forward.target = node.device.get();
  return ref;
}

SecondaryDevice& Deployment::adopt_secondary(const std::string& name, DeviceState state, DeviceOptions options) {
  Node& node = add_node(name, state);
  auto device = std::make_unique<SecondaryDevice>(std::move(state), *node.network, std::move(options));
  auto& ref = *device;
  node.device = std::move(device);
  node.forward.target = node.device.get();
  return ref;
}

PrimaryDevice& Deployment::primary(const std::string& name) {
  auto it = nodes_.find(name);
  auto* p = it == nodes_.end() ? nullptr : dynamic_cast<PrimaryDevice*>(it->second->device.get());
  if (!p) throw Error(ErrorCode::usage, "no primary named " + name);
  return *p;
}

SecondaryDevice& Deployment::secondary(const std::string& name) {
  auto it = nodes_.find(name);
  auto* s = it == nodes_.end() ? nullptr : dynamic_cast<SecondaryDevice*>(it->second->device.get());
  if (!s) throw Error(ErrorCode::usage, "no secondary named " + name);
  return *s;
}

std::string Deployment::address_of(const std::string& name) const {
  if (name == "cloud") return cloud_address_;
  auto it = addresses_.find(name);
  if (it == addresses_.end()) throw Error(ErrorCode::usage, "no node named " + name);
  return it->second;
}

void Deployment::enroll(const std::string& account, const std::string& password,
                        const std::string& recovery_secret) {
  if (!has("primary")) add_primary("primary");
  if (!has("secondary")) add_secondary("secondary");
  primary().create_account(cloud_address_, cloud_identity(), account, password, recovery_secret);
  primary().enroll(address_of("secondary"));
}

LocalNetwork& Deployment::local() {
  if (options_.transport != TransportKind::local) throw Error(ErrorCode::usage, "not an in-process deployment");
  return local_;
}

void Deployment::set_online(const std::string& name, bool online) { local().set_online(address_of(name), online); }

WireLog& Deployment::log() { return options_.transport == TransportKind::local ? local_.log() : tcp_log_; }

}  // namespace twofe
