#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "twofe/bytes.hpp"
#include "twofe/wire.hpp"

namespace twofe {

// Who sent a message, as established by the transport (channel identity for
// TCP, registration for the in-process network).
struct PeerInfo {
  std::string address;
  Bytes identity;
};

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  // Returns the reply for a request; one-way messages return nullopt.
  // Errors are thrown as twofe::Error and turned into ERROR replies by the
  // transport.
  virtual std::optional<Message> handle(const Message& m, const PeerInfo& from) = 0;
};

// A node's view of the network. Every message is encoded to bytes on send
// and decoded on receipt, whatever the transport.
class Network {
 public:
  virtual ~Network() = default;
  // Throws peer-unreachable when the address cannot be reached.
  virtual Message request(const std::string& to, const Message& m) = 0;
  virtual void send(const std::string& to, const Message& m) = 0;
  virtual const std::string& self() const = 0;
};

enum class WireKind : std::uint8_t { request, reply, one_way };

struct WireEvent {
  std::uint64_t seq = 0;
  std::string from;
  std::string to;
  WireKind kind = WireKind::request;
  MessageType type = MessageType::ok;
  Flow flow = Flow::none;
  SessionId session{};
  Bytes bytes;
};

// Shared wire log with observers; both transports record into one.
class WireLog {
 public:
  using Observer = std::function<void(const WireEvent&)>;

  void record(WireEvent e);
  std::vector<WireEvent> events() const;
  void clear();
  int add_observer(Observer o);
  void remove_observer(int id);
  // Digest over every recorded message, for determinism checks.
  Bytes digest() const;

 private:
  mutable std::mutex mu_;
  std::vector<WireEvent> events_;
  std::map<int, Observer> observers_;
  int next_id_ = 0;
  std::uint64_t seq_ = 0;
};

// In-process network: endpoints are registered under address strings and
// called synchronously. Supports taking nodes offline and tampering with
// messages a node emits (the malware capability).
class LocalNetwork {
 public:
  // May rewrite the message about to leave `from`. Runs before encoding.
  using Tamper = std::function<void(Message&, const std::string& to)>;

  void attach(const std::string& address, Endpoint* endpoint, Bytes identity);
  void detach(const std::string& address);
  void set_online(const std::string& address, bool online);
  bool online(const std::string& address) const;
  void set_tamper(const std::string& address, Tamper t);

  std::unique_ptr<Network> port(const std::string& address);

  WireLog& log() { return log_; }

 private:
  class Port;
  struct Node {
    Endpoint* endpoint = nullptr;
    Bytes identity;
    bool online = true;
    Tamper tamper;
  };

  std::optional<Message> deliver(const std::string& from, const std::string& to, Message m, WireKind kind);

  mutable std::mutex mu_;
  std::map<std::string, Node> nodes_;
  WireLog log_;
};

}  // namespace twofe
