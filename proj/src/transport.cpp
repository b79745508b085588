#include "twofe/transport.hpp"

#include "twofe/error.hpp"
#include "twofe/hashing.hpp"

namespace twofe {

void WireLog::record(WireEvent e) {
  std::vector<Observer> observers;
  {
    std::lock_guard lock(mu_);
    e.seq = ++seq_;
    events_.push_back(e);
    for (const auto& [id, o] : observers_) observers.push_back(o);
  }
  for (const auto& o : observers) o(e);
}

std::vector<WireEvent> WireLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

void WireLog::clear() {
  std::lock_guard lock(mu_);
  events_.clear();
}

int WireLog::add_observer(Observer o) {
  std::lock_guard lock(mu_);
  observers_[next_id_] = std::move(o);
  return next_id_++;
}

void WireLog::remove_observer(int id) {
  std::lock_guard lock(mu_);
  observers_.erase(id);
}

Bytes WireLog::digest() const {
  std::lock_guard lock(mu_);
  ByteWriter w;
  for (const auto& e : events_) {
    w.field(e.from).field(e.to).u8(static_cast<std::uint8_t>(e.kind)).field(e.bytes);
  }
  const auto d = sha256(w.bytes());
  return Bytes(d.begin(), d.end());
}

class LocalNetwork::Port : public Network {
 public:
  Port(LocalNetwork& net, std::string self) : net_(net), self_(std::move(self)) {}

  Message request(const std::string& to, const Message& m) override {
    auto reply = net_.deliver(self_, to, m, WireKind::request);
    if (!reply) throw Error(ErrorCode::internal, "request to " + to + " produced no reply");
    return *reply;
  }

  void send(const std::string& to, const Message& m) override { net_.deliver(self_, to, m, WireKind::one_way); }

  const std::string& self() const override { return self_; }

 private:
  LocalNetwork& net_;
  std::string self_;
};

void LocalNetwork::attach(const std::string& address, Endpoint* endpoint, Bytes identity) {
  std::lock_guard lock(mu_);
  auto& node = nodes_[address];
  node.endpoint = endpoint;
  node.identity = std::move(identity);
  node.online = true;
}

void LocalNetwork::detach(const std::string& address) {
  std::lock_guard lock(mu_);
  nodes_.erase(address);
}

void LocalNetwork::set_online(const std::string& address, bool online) {
  std::lock_guard lock(mu_);
  nodes_[address].online = online;
}

bool LocalNetwork::online(const std::string& address) const {
  std::lock_guard lock(mu_);
  auto it = nodes_.find(address);
  return it != nodes_.end() && it->second.online && it->second.endpoint != nullptr;
}

void LocalNetwork::set_tamper(const std::string& address, Tamper t) {
  std::lock_guard lock(mu_);
  nodes_[address].tamper = std::move(t);
}

std::unique_ptr<Network> LocalNetwork::port(const std::string& address) {
  return std::make_unique<Port>(*this, address);
}

std::optional<Message> LocalNetwork::deliver(const std::string& from, const std::string& to, Message m,
                                             WireKind kind) {
  Endpoint* target = nullptr;
  PeerInfo peer{from, {}};
  Tamper out_tamper, back_tamper;
  {
    std::lock_guard lock(mu_);
    auto src = nodes_.find(from);
    auto dst = nodes_.find(to);
    const bool src_up = src == nodes_.end() || src->second.online;
    if (!src_up || dst == nodes_.end() || !dst->second.online || dst->second.endpoint == nullptr) {
      throw Error(ErrorCode::peer_unreachable, to);
    }
    target = dst->second.endpoint;
    if (src != nodes_.end()) {
      peer.identity = src->second.identity;
      out_tamper = src->second.tamper;
    }
    back_tamper = dst->second.tamper;
  }

  if (out_tamper) out_tamper(m, to);
  Bytes wire = m.encode();
  log_.record({0, from, to, kind, m.type, m.flow, m.session, wire});
  const Message received = Message::decode(wire);

  std::optional<Message> reply;
  try {
    reply = target->handle(received, peer);
  } catch (const Error& e) {
    reply = error_message(received.flow, received.session, e);
  } catch (const std::exception& e) {
    reply = error_message(received.flow, received.session, Error(ErrorCode::internal, e.what()));
  }
  if (kind == WireKind::one_way) return std::nullopt;
  if (!reply) reply = ok_message(received.flow, received.session);

  if (back_tamper) back_tamper(*reply, from);
  Bytes reply_wire = reply->encode();
  log_.record({0, to, from, WireKind::reply, reply->type, reply->flow, reply->session, reply_wire});
  return Message::decode(reply_wire);
}

}  // namespace twofe
