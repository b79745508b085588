#include "twofe/console.hpp"

#include <algorithm>

#include "httplib.h"
#include "json.hpp"
#include "twofe/error.hpp"
#include "twofe/random.hpp"

namespace twofe {

namespace {

using nlohmann::json;

constexpr auto kKeepAlive = std::chrono::seconds(15);

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, ErrorCode code, const std::string& detail) {
  send_json(res, status, {{"error", std::string(error_name(code))}, {"code", static_cast<int>(code)},
                          {"detail", detail}});
}

json array_of(const std::vector<std::string>& items) {
  json a = json::array();
  for (const auto& s : items) a.push_back(json::parse(s));
  return a;
}

std::string sse_frame(const ApprovalEvent& e) {
  std::string name;
  std::string data;
  switch (e.kind) {
    case ApprovalEventKind::request:
      name = "request";
      data = to_json(e.request);
      break;
    case ApprovalEventKind::decision:
      name = "decision";
      data = to_json(e.request);
      break;
    case ApprovalEventKind::notification:
      name = "notification";
      data = to_json(e.notification);
      break;
  }
  return "event: " + name + "\ndata: " + data + "\n\n";
}

bool is_loopback(const std::string& host) {
  return host == "127.0.0.1" || host == "localhost" || host == "::1" || host.rfind("127.", 0) == 0;
}

}  // namespace

std::string new_pairing_token() { return to_hex(random_array<16>()); }

ConsoleServer::ConsoleServer(ApprovalQueue& queue, std::string pairing_token)
    : queue_(queue), token_(std::move(pairing_token)), server_(std::make_unique<httplib::Server>()) {
  if (token_.empty()) throw Error(ErrorCode::usage, "console needs a pairing token");

  server_->set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (authorized(req.get_param_value("token"), req.get_header_value("X-Pairing-Token"))) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    send_error(res, 401, ErrorCode::bad_token, "missing or wrong pairing token");
    return httplib::Server::HandlerResponse::Handled;
  });

  server_->Get("/requests", [this](const httplib::Request&, httplib::Response& res) {
    std::vector<std::string> items;
    for (const auto& r : queue_.requests()) items.push_back(to_json(r));
    send_json(res, 200, array_of(items));
  });

  server_->Post(R"(/requests/(\d+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
    std::uint64_t id = 0;
    try {
      id = std::stoull(req.matches[1].str());
    } catch (const std::exception&) {
      send_error(res, 404, ErrorCode::unknown_request, "no such request");
      return;
    }
    std::string decision;
    try {
      decision = json::parse(req.body).at("decision").get<std::string>();
    } catch (const json::exception&) {
      send_error(res, 400, ErrorCode::usage, R"(body must be {"decision": "approve" | "deny"})");
      return;
    }
    if (decision != "approve" && decision != "deny") {
      send_error(res, 400, ErrorCode::usage, "decision must be approve or deny");
      return;
    }
    try {
      queue_.decide(id, decision == "approve");
    } catch (const Error& e) {
      const int status = e.code() == ErrorCode::unknown_request ? 404 : e.code() == ErrorCode::already_decided ? 409 : 500;
      send_error(res, status, e.code(), e.detail());
      return;
    }
    send_json(res, 200, json::parse(to_json(*queue_.find(id))));
  });

  server_->Get("/notifications", [this](const httplib::Request&, httplib::Response& res) {
    std::vector<std::string> items;
    for (const auto& n : queue_.notifications()) items.push_back(to_json(n));
    send_json(res, 200, array_of(items));
  });

  server_->Get("/events", [this](const httplib::Request&, httplib::Response& res) {
    auto sub = std::make_shared<Subscriber>();
    {
      std::lock_guard lock(subs_mu_);
      subscribers_.push_back(sub);
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub](std::size_t, httplib::DataSink& sink) {
          std::unique_lock lock(sub->mu);
          sub->cv.wait_for(lock, kKeepAlive, [&] { return sub->closed || !sub->frames.empty(); });
          if (sub->closed || !running_) return false;
          std::string out = sub->frames.empty() ? std::string(": keep-alive\n\n") : std::string();
          while (!sub->frames.empty()) {
            out += sub->frames.front();
            sub->frames.pop_front();
          }
          lock.unlock();
          return sink.write(out.data(), out.size());
        },
        [this, sub](bool) {
          std::lock_guard lock(subs_mu_);
          subscribers_.erase(std::remove(subscribers_.begin(), subscribers_.end(), sub), subscribers_.end());
        });
  });

  observer_ = queue_.add_observer([this](const ApprovalEvent& e) { broadcast(e); });
}

ConsoleServer::~ConsoleServer() {
  stop();
  queue_.remove_observer(observer_);
}

bool ConsoleServer::authorized(const std::string& query_token, const std::string& header_token) const {
  const std::string& given = query_token.empty() ? header_token : query_token;
  return given.size() == token_.size() && constant_time_equal(to_bytes(given), to_bytes(token_));
}

void ConsoleServer::broadcast(const ApprovalEvent& e) {
  const std::string frame = sse_frame(e);
  std::lock_guard lock(subs_mu_);
  for (auto& sub : subscribers_) {
    {
      std::lock_guard slock(sub->mu);
      sub->frames.push_back(frame);
    }
    sub->cv.notify_all();
  }
}

void ConsoleServer::start(const std::string& host, std::uint16_t port) {
  if (!is_loopback(host)) throw Error(ErrorCode::usage, "the console listens on loopback only, not " + host);
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(ErrorCode::io, "cannot bind console to " + host + ":" + std::to_string(port));
  port_ = static_cast<std::uint16_t>(bound);
  running_ = true;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
}

void ConsoleServer::stop() {
  if (!running_.exchange(false)) return;
  {
    std::lock_guard lock(subs_mu_);
    for (auto& sub : subscribers_) {
      {
        std::lock_guard slock(sub->mu);
        sub->closed = true;
      }
      sub->cv.notify_all();
    }
  }
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace twofe
