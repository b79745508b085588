#include "twofe/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sodium.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "twofe/error.hpp"
#include "twofe/hashing.hpp"
#include "twofe/random.hpp"

namespace twofe {

namespace {

constexpr std::uint8_t kFrameRequest = 0;
constexpr std::uint8_t kFrameOneWay = 1;
constexpr std::uint8_t kFrameReply = 2;
constexpr std::size_t kMaxFrame = std::size_t{256} << 20;

[[noreturn]] void io_failure(const std::string& what) {
  throw Error(ErrorCode::peer_unreachable, what + ": " + std::strerror(errno));
}

void write_all(int fd, ByteView data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_failure("send");
    }
    off += static_cast<std::size_t>(n);
  }
}

void read_exact(int fd, std::span<std::uint8_t> out) {
  std::size_t off = 0;
  while (off < out.size()) {
    const ssize_t n = ::recv(fd, out.data() + off, out.size() - off, 0);
    if (n == 0) throw Error(ErrorCode::peer_unreachable, "connection closed");
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw Error(ErrorCode::timeout, "peer did not answer in time");
      io_failure("recv");
    }
    off += static_cast<std::size_t>(n);
  }
}

void set_socket_timeout(int fd, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
}

Bytes transcript(std::string_view label, std::initializer_list<ByteView> parts) {
  ByteWriter w;
  w.raw(to_bytes(label));
  for (auto p : parts) w.raw(p);
  return w.take();
}

std::array<std::uint8_t, 12> counter_nonce(std::uint64_t counter) {
  std::array<std::uint8_t, 12> n{};
  for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(counter >> (8 * (7 - i)));
  return n;
}

int connect_to(const std::string& address, std::chrono::milliseconds timeout) {
  const HostPort hp = parse_address(address);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(hp.port);
  if (::getaddrinfo(hp.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error(ErrorCode::peer_unreachable, "cannot resolve " + address);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    set_socket_timeout(fd, timeout);
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error(ErrorCode::peer_unreachable, "cannot connect to " + address);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

}  // namespace

Identity Identity::generate() {
  ensure_crypto_init();
  Identity id;
  const auto seed = random_array<32>();
  crypto_sign_seed_keypair(id.public_key.data(), id.secret_key.data(), seed.data());
  return id;
}

Identity Identity::from_secret(ByteView secret_key) {
  ensure_crypto_init();
  Identity id;
  id.secret_key = to_array<64>(secret_key);
  crypto_sign_ed25519_sk_to_pk(id.public_key.data(), id.secret_key.data());
  return id;
}

std::string fingerprint(ByteView identity) {
  const auto d = sha256(identity);
  return to_hex(ByteView(d).first(8));
}

std::unique_ptr<SecureChannel> SecureChannel::client(int fd, const Identity& self,
                                                     const std::optional<Bytes>& expected_peer,
                                                     std::chrono::milliseconds timeout) {
  ensure_crypto_init();
  std::unique_ptr<SecureChannel> ch(new SecureChannel(fd));
  set_socket_timeout(fd, timeout);
  std::array<std::uint8_t, crypto_kx_PUBLICKEYBYTES> epk{};
  std::array<std::uint8_t, crypto_kx_SECRETKEYBYTES> esk{};
  crypto_kx_keypair(epk.data(), esk.data());
  write_all(fd, epk);

  std::array<std::uint8_t, 32 + 32 + 64> hello{};
  read_exact(fd, hello);
  const ByteView e_s = ByteView(hello).subspan(0, 32);
  const ByteView id_s = ByteView(hello).subspan(32, 32);
  const ByteView sig_s = ByteView(hello).subspan(64, 64);
  const Bytes signed_s = transcript("2FE-CHAN-S", {epk, e_s});
  if (crypto_sign_verify_detached(sig_s.data(), signed_s.data(), signed_s.size(), id_s.data()) != 0) {
    sodium_memzero(esk.data(), esk.size());
    throw Error(ErrorCode::auth_failure, "server handshake signature invalid");
  }
  if (expected_peer && !constant_time_equal(*expected_peer, id_s)) {
    sodium_memzero(esk.data(), esk.size());
    throw Error(ErrorCode::auth_failure, "server identity does not match the pinned key");
  }
  const Bytes signed_c = transcript("2FE-CHAN-C", {epk, e_s, id_s});
  std::array<std::uint8_t, 32 + 64> reply{};
  std::copy(self.public_key.begin(), self.public_key.end(), reply.begin());
  crypto_sign_detached(reply.data() + 32, nullptr, signed_c.data(), signed_c.size(), self.secret_key.data());
  write_all(fd, reply);

  if (crypto_kx_client_session_keys(ch->rx_.data(), ch->tx_.data(), epk.data(), esk.data(), e_s.data()) != 0) {
    sodium_memzero(esk.data(), esk.size());
    throw Error(ErrorCode::auth_failure, "key exchange failed");
  }
  sodium_memzero(esk.data(), esk.size());
  ch->peer_identity_.assign(id_s.begin(), id_s.end());
  return ch;
}

std::unique_ptr<SecureChannel> SecureChannel::server(int fd, const Identity& self, std::chrono::milliseconds timeout) {
  ensure_crypto_init();
  std::unique_ptr<SecureChannel> ch(new SecureChannel(fd));
  set_socket_timeout(fd, timeout);
  std::array<std::uint8_t, 32> e_c{};
  read_exact(fd, e_c);

  std::array<std::uint8_t, crypto_kx_PUBLICKEYBYTES> epk{};
  std::array<std::uint8_t, crypto_kx_SECRETKEYBYTES> esk{};
  crypto_kx_keypair(epk.data(), esk.data());
  const Bytes signed_s = transcript("2FE-CHAN-S", {e_c, epk});
  std::array<std::uint8_t, 32 + 32 + 64> hello{};
  std::copy(epk.begin(), epk.end(), hello.begin());
  std::copy(self.public_key.begin(), self.public_key.end(), hello.begin() + 32);
  crypto_sign_detached(hello.data() + 64, nullptr, signed_s.data(), signed_s.size(), self.secret_key.data());
  write_all(fd, hello);

  std::array<std::uint8_t, 32 + 64> reply{};
  read_exact(fd, reply);
  const ByteView id_c = ByteView(reply).subspan(0, 32);
  const Bytes signed_c = transcript("2FE-CHAN-C", {e_c, epk, self.public_key});
  if (crypto_sign_verify_detached(reply.data() + 32, signed_c.data(), signed_c.size(), id_c.data()) != 0) {
    sodium_memzero(esk.data(), esk.size());
    throw Error(ErrorCode::auth_failure, "client handshake signature invalid");
  }
  if (crypto_kx_server_session_keys(ch->rx_.data(), ch->tx_.data(), epk.data(), esk.data(), e_c.data()) != 0) {
    sodium_memzero(esk.data(), esk.size());
    throw Error(ErrorCode::auth_failure, "key exchange failed");
  }
  sodium_memzero(esk.data(), esk.size());
  ch->peer_identity_.assign(id_c.begin(), id_c.end());
  return ch;
}

SecureChannel::~SecureChannel() {
  sodium_memzero(rx_.data(), rx_.size());
  sodium_memzero(tx_.data(), tx_.size());
  if (fd_ >= 0) ::close(fd_);
}

void SecureChannel::set_timeout(std::chrono::milliseconds timeout) { set_socket_timeout(fd_, timeout); }

void SecureChannel::write_frame(ByteView plaintext) {
  const auto nonce = counter_nonce(tx_counter_++);
  Bytes frame(4 + plaintext.size() + crypto_aead_chacha20poly1305_IETF_ABYTES);
  const auto len = static_cast<std::uint32_t>(frame.size() - 4);
  frame[0] = static_cast<std::uint8_t>(len >> 24);
  frame[1] = static_cast<std::uint8_t>(len >> 16);
  frame[2] = static_cast<std::uint8_t>(len >> 8);
  frame[3] = static_cast<std::uint8_t>(len);
  unsigned long long clen = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(frame.data() + 4, &clen, plaintext.data(), plaintext.size(), nullptr, 0,
                                            nullptr, nonce.data(), tx_.data());
  write_all(fd_, frame);
}

Bytes SecureChannel::read_frame() {
  std::array<std::uint8_t, 4> header{};
  read_exact(fd_, header);
  const std::size_t len = (std::size_t{header[0]} << 24) | (std::size_t{header[1]} << 16) |
                          (std::size_t{header[2]} << 8) | header[3];
  if (len < crypto_aead_chacha20poly1305_IETF_ABYTES || len > kMaxFrame) {
    throw Error(ErrorCode::invalid_encoding, "bad frame length");
  }
  Bytes cipher(len);
  read_exact(fd_, cipher);
  Bytes plain(len - crypto_aead_chacha20poly1305_IETF_ABYTES);
  unsigned long long plen = 0;
  const auto nonce = counter_nonce(rx_counter_++);
  if (crypto_aead_chacha20poly1305_ietf_decrypt(plain.data(), &plen, nullptr, cipher.data(), cipher.size(), nullptr, 0,
                                                nonce.data(), rx_.data()) != 0) {
    throw Error(ErrorCode::auth_failure, "frame failed authentication");
  }
  return plain;
}

HostPort parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
    throw Error(ErrorCode::usage, "address must be host:port, got '" + address + "'");
  }
  HostPort hp;
  hp.host = address.substr(0, colon);
  if (hp.host.size() > 2 && hp.host.front() == '[' && hp.host.back() == ']') hp.host = hp.host.substr(1, hp.host.size() - 2);
  try {
    const int port = std::stoi(address.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    hp.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw Error(ErrorCode::usage, "bad port in '" + address + "'");
  }
  return hp;
}

TcpServer::TcpServer(Endpoint& endpoint, Identity identity, std::chrono::milliseconds io_timeout)
    : endpoint_(endpoint), identity_(identity), io_timeout_(io_timeout) {}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string p = std::to_string(port);
  if (::getaddrinfo(host.c_str(), p.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error(ErrorCode::io, "cannot resolve listen address " + host);
  }
  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (listen_fd_ < 0 || ::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 64) != 0) {
    ::freeaddrinfo(res);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::io, "cannot listen on " + host + ":" + p + ": " + std::strerror(errno));
  }
  ::freeaddrinfo(res);
  sockaddr_storage bound{};
  socklen_t blen = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
  port_ = ntohs(bound.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                                            : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
  host_ = host;
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

std::string TcpServer::address() const { return host_ + ":" + std::to_string(port_); }

void TcpServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  listen_fd_ = -1;
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void TcpServer::accept_loop() {
  while (running_) {
    sockaddr_storage peer{};
    socklen_t plen = sizeof peer;
    const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &plen);
    if (fd < 0) {
      if (!running_) return;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mu_);
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void TcpServer::serve(int fd) {
  std::string peer_address;
  {
    sockaddr_storage peer{};
    socklen_t plen = sizeof peer;
    if (::getpeername(fd, reinterpret_cast<sockaddr*>(&peer), &plen) == 0) {
      char host[NI_MAXHOST] = {0}, serv[NI_MAXSERV] = {0};
      ::getnameinfo(reinterpret_cast<sockaddr*>(&peer), plen, host, sizeof host, serv, sizeof serv,
                    NI_NUMERICHOST | NI_NUMERICSERV);
      peer_address = std::string(host) + ":" + serv;
    }
  }
  try {
    auto channel = SecureChannel::server(fd, identity_, io_timeout_);
    // Idle persistent connections may sit quietly between requests.
    channel->set_timeout(std::chrono::hours(24));
    const PeerInfo peer{peer_address, channel->peer_identity()};
    while (running_) {
      const Bytes frame = channel->read_frame();
      if (frame.empty()) break;
      const std::uint8_t kind = frame[0];
      const Message m = Message::decode(ByteView(frame).subspan(1));
      std::optional<Message> reply;
      try {
        reply = endpoint_.handle(m, peer);
      } catch (const Error& e) {
        reply = error_message(m.flow, m.session, e);
      } catch (const std::exception& e) {
        reply = error_message(m.flow, m.session, Error(ErrorCode::internal, e.what()));
      }
      if (kind == kFrameOneWay) continue;
      if (!reply) reply = ok_message(m.flow, m.session);
      ByteWriter w;
      w.u8(kFrameReply).raw(reply->encode());
      channel->write_frame(w.bytes());
    }
    // The channel destructor closes fd; remove it from the shutdown list.
    std::lock_guard lock(mu_);
    std::erase(open_fds_, fd);
    return;
  } catch (const std::exception&) {
  }
  std::lock_guard lock(mu_);
  std::erase(open_fds_, fd);
}

TcpNetwork::TcpNetwork(std::string self_address, Identity identity, WireLog* log, std::chrono::milliseconds timeout)
    : self_(std::move(self_address)), identity_(identity), log_(log), timeout_(timeout) {}

TcpNetwork::~TcpNetwork() = default;

void TcpNetwork::pin(const std::string& address, Bytes identity) {
  std::lock_guard lock(mu_);
  pins_[address] = std::move(identity);
}

std::optional<Bytes> TcpNetwork::peer_identity(const std::string& address) {
  std::lock_guard lock(mu_);
  auto it = connections_.find(address);
  if (it == connections_.end() || !it->second->channel) return std::nullopt;
  return it->second->channel->peer_identity();
}

std::shared_ptr<TcpNetwork::Connection> TcpNetwork::connection(const std::string& to) {
  std::lock_guard lock(mu_);
  auto& slot = connections_[to];
  if (!slot) slot = std::make_shared<Connection>();
  return slot;
}

void TcpNetwork::drop(const std::string& to) {
  std::lock_guard lock(mu_);
  connections_.erase(to);
}

std::optional<Message> TcpNetwork::exchange(const std::string& to, const Message& m, bool one_way) {
  std::optional<Bytes> pin;
  {
    std::lock_guard lock(mu_);
    if (auto it = pins_.find(to); it != pins_.end()) pin = it->second;
  }
  ByteWriter w;
  w.u8(one_way ? kFrameOneWay : kFrameRequest).raw(m.encode());
  const Bytes frame = w.take();

  for (int attempt = 0; attempt < 2; ++attempt) {
    auto conn = connection(to);
    std::unique_lock lock(conn->mu);
    const bool reused = conn->channel != nullptr;
    try {
      if (!conn->channel) {
        const int fd = connect_to(to, timeout_);
        try {
          conn->channel = SecureChannel::client(fd, identity_, pin, timeout_);
        } catch (...) {
          ::close(fd);
          throw;
        }
      }
      conn->channel->write_frame(frame);
    } catch (const Error&) {
      conn->channel.reset();
      lock.unlock();
      drop(to);
      if (reused) continue;
      throw;
    }
    if (log_) log_->record({0, self_, to, one_way ? WireKind::one_way : WireKind::request, m.type, m.flow, m.session,
                            m.encode()});
    if (one_way) return std::nullopt;
    try {
      const Bytes reply = conn->channel->read_frame();
      if (reply.empty() || reply[0] != kFrameReply) throw Error(ErrorCode::invalid_encoding, "expected reply frame");
      Message out = Message::decode(ByteView(reply).subspan(1));
      if (log_) log_->record({0, to, self_, WireKind::reply, out.type, out.flow, out.session, out.encode()});
      return out;
    } catch (const Error&) {
      conn->channel.reset();
      lock.unlock();
      drop(to);
      throw;
    }
  }
  throw Error(ErrorCode::peer_unreachable, to);
}

Message TcpNetwork::request(const std::string& to, const Message& m) { return *exchange(to, m, false); }

void TcpNetwork::send(const std::string& to, const Message& m) { exchange(to, m, true); }

}  // namespace twofe
