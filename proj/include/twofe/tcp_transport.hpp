#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "twofe/bytes.hpp"
#include "twofe/transport.hpp"

namespace twofe {

// Long-term Ed25519 signing identity of a node.
struct Identity {
  std::array<std::uint8_t, 32> public_key{};
  std::array<std::uint8_t, 64> secret_key{};

  static Identity generate();
  static Identity from_secret(ByteView secret_key);
  Bytes public_bytes() const { return to_bytes(public_key); }
};

// Short, human-comparable fingerprint of an identity key.
std::string fingerprint(ByteView identity);

// Mutually authenticated encrypted stream over a connected socket.
//
// Handshake (X25519 ephemerals, Ed25519 statics):
//   C -> S  e_c
//   S -> C  e_s | id_s | sig_s("2FE-CHAN-S" | e_c | e_s)
//   C -> S  id_c | sig_c("2FE-CHAN-C" | e_c | e_s | id_s)
// Session keys come from crypto_kx; frames are be32 length || AEAD(payload)
// with a per-direction counter nonce.
class SecureChannel {
 public:
  static std::unique_ptr<SecureChannel> client(int fd, const Identity& self, const std::optional<Bytes>& expected_peer,
                                               std::chrono::milliseconds timeout);
  static std::unique_ptr<SecureChannel> server(int fd, const Identity& self, std::chrono::milliseconds timeout);

  ~SecureChannel();
  SecureChannel(const SecureChannel&) = delete;
  SecureChannel& operator=(const SecureChannel&) = delete;

  void write_frame(ByteView plaintext);
  Bytes read_frame();
  const Bytes& peer_identity() const { return peer_identity_; }
  int fd() const { return fd_; }
  void set_timeout(std::chrono::milliseconds timeout);

 private:
  explicit SecureChannel(int fd) : fd_(fd) {}

  int fd_;
  std::array<std::uint8_t, 32> rx_{};
  std::array<std::uint8_t, 32> tx_{};
  std::uint64_t rx_counter_ = 0;
  std::uint64_t tx_counter_ = 0;
  Bytes peer_identity_;
};

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};
HostPort parse_address(const std::string& address);  // throws usage

// Serves one Endpoint over TCP, one thread per connection.
class TcpServer {
 public:
  TcpServer(Endpoint& endpoint, Identity identity, std::chrono::milliseconds io_timeout = std::chrono::minutes(3));
  ~TcpServer();

  // Binds and starts accepting. Port 0 picks an ephemeral port.
  void start(const std::string& host, std::uint16_t port);
  void stop();
  std::uint16_t port() const { return port_; }
  std::string address() const;

 private:
  void accept_loop();
  void serve(int fd);

  Endpoint& endpoint_;
  Identity identity_;
  std::chrono::milliseconds io_timeout_;
  std::string host_;
  std::uint16_t port_ = 0;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
};

// Client side: persistent connections per destination, optional identity
// pinning per address, and a shared wire log.
class TcpNetwork : public Network {
 public:
  TcpNetwork(std::string self_address, Identity identity, WireLog* log = nullptr,
             std::chrono::milliseconds timeout = std::chrono::minutes(3));
  ~TcpNetwork() override;

  void pin(const std::string& address, Bytes identity);

  Message request(const std::string& to, const Message& m) override;
  void send(const std::string& to, const Message& m) override;
  const std::string& self() const override { return self_; }

  // Identity the peer at `address` presented on the last connection.
  std::optional<Bytes> peer_identity(const std::string& address);

 private:
  struct Connection {
    std::mutex mu;
    std::unique_ptr<SecureChannel> channel;
  };

  std::shared_ptr<Connection> connection(const std::string& to);
  void drop(const std::string& to);
  std::optional<Message> exchange(const std::string& to, const Message& m, bool one_way);

  std::string self_;
  Identity identity_;
  WireLog* log_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Connection>> connections_;
  std::map<std::string, Bytes> pins_;
};

}  // namespace twofe
