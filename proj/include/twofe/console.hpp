#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "twofe/approval.hpp"

namespace httplib {
class Server;
}

namespace twofe {

// Loopback HTTP+JSON API the approval console talks to. Every route needs the
// pairing token, as ?token= or an X-Pairing-Token header.
//
//   GET  /requests                    every request, newest last
//   POST /requests/{id}/decision      {"decision": "approve" | "deny"}
//   GET  /notifications               notification history
//   GET  /events                      server-sent events
class ConsoleServer {
 public:
  ConsoleServer(ApprovalQueue& queue, std::string pairing_token);
  ~ConsoleServer();
  ConsoleServer(const ConsoleServer&) = delete;
  ConsoleServer& operator=(const ConsoleServer&) = delete;

  // Loopback hosts only; port 0 picks an ephemeral port.
  void start(const std::string& host, std::uint16_t port);
  void stop();
  std::uint16_t port() const { return port_; }

 private:
  struct Subscriber {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> frames;
    bool closed = false;
  };

  bool authorized(const std::string& query_token, const std::string& header_token) const;
  void broadcast(const ApprovalEvent& e);

  ApprovalQueue& queue_;
  std::string token_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::uint16_t port_ = 0;
  int observer_ = -1;
  std::atomic<bool> running_{false};
  std::mutex subs_mu_;
  std::vector<std::shared_ptr<Subscriber>> subscribers_;
};

// A fresh random pairing token (hex).
std::string new_pairing_token();

}  // namespace twofe
