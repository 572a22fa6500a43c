#pragma once

#include <atomic>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "qdhf/feedback_channel.hpp"

// after Eigen: <resolv.h> defines a _res macro
#include <httplib.h>

namespace qdhf {

inline nlohmann::json status_json(const FeedbackChannel& channel) {
  const RunStatus s = channel.status();
  nlohmann::json j{{"iteration", s.iteration},
                   {"total_iterations", s.total_iterations},
                   {"budget", {{"used", s.budget_used}, {"total", s.budget_total}}},
                   {"pending", channel.pending_count()},
                   {"waiting_for_feedback", s.waiting_for_feedback},
                   {"finished", s.finished}};
  j["coverage_all"] = s.coverage_all ? nlohmann::json(*s.coverage_all) : nlohmann::json(nullptr);
  return j;
}

/// HTTP front end over a FeedbackChannel. Routes are served both under
/// /api/v1/ and the unversioned /api/ prefix.
class FeedbackService {
 public:
  explicit FeedbackService(FeedbackChannel& channel, std::string static_dir = {})
      : channel_(channel) {
    for (const std::string prefix : {"/api/v1", "/api"}) routes(prefix);
    if (!static_dir.empty()) server_.set_mount_point("/", static_dir);
  }

  ~FeedbackService() { stop(); }
  FeedbackService(const FeedbackService&) = delete;
  FeedbackService& operator=(const FeedbackService&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws if binding fails.
  int start(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host)
                                : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  static void send(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void routes(const std::string& prefix) {
    server_.Get(prefix + "/status", [this](const httplib::Request&, httplib::Response& res) {
      send(res, 200, status_json(channel_));
    });

    server_.Get(prefix + "/triplets/next", [this](const httplib::Request&, httplib::Response& res) {
      if (auto req = channel_.next_pending()) {
        send(res, 200, {{"request_id", req->id},
                        {"ref", req->payload.value("ref", nlohmann::json())},
                        {"a", req->payload.value("a", nlohmann::json())},
                        {"b", req->payload.value("b", nlohmann::json())}});
        return;
      }
      const bool finished = channel_.status().finished || channel_.closed();
      send(res, 200, {{"request_id", nullptr}, {"state", finished ? "finished" : "running"}});
    });

    server_.Post(prefix + R"(/triplets/(\d+))",
                 [this](const httplib::Request& req, httplib::Response& res) {
      RequestId id = 0;
      try {
        id = std::stoull(req.matches[1].str());
      } catch (const std::exception&) {
        send(res, 404, {{"error", "unknown request id"}});
        return;
      }
      const auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object() || !body.contains("choice") ||
          !body["choice"].is_string()) {
        send(res, 400, {{"error", "body must be {\"choice\": \"A\"|\"B\"|\"skip\"}"}});
        return;
      }
      const std::string c = body["choice"].get<std::string>();
      std::optional<Choice> choice;
      if (c == "A") {
        choice = Choice::ACloser;
      } else if (c == "B") {
        choice = Choice::BCloser;
      } else if (c != "skip") {
        send(res, 400, {{"error", "choice must be A, B or skip"}});
        return;
      }
      switch (channel_.resolve(id, choice)) {
        case ResolveResult::Ok:
          send(res, 200, {{"request_id", id}, {"accepted", c}});
          break;
        case ResolveResult::UnknownId:
          send(res, 404, {{"error", "unknown request id"}});
          break;
        case ResolveResult::AlreadyResolved:
          send(res, 409, {{"error", "request already resolved"}});
          break;
        case ResolveResult::Closed:
          send(res, 409, {{"error", "run is no longer accepting judgments"}});
          break;
      }
    });
  }

  FeedbackChannel& channel_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace qdhf
