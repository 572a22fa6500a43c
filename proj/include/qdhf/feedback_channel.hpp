#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "qdhf/feedback.hpp"

namespace qdhf {

using RequestId = std::uint64_t;

struct JudgmentRequest {
  RequestId id = 0;
  Triplet triplet;
  nlohmann::json payload;  // {"ref": ..., "a": ..., "b": ...} render payloads
};

enum class ResolveResult { Ok, UnknownId, AlreadyResolved, Closed };

/// Read-only progress snapshot published by the optimizer.
struct RunStatus {
  int iteration = 0;
  int total_iterations = 0;
  int budget_used = 0;
  int budget_total = 0;
  bool waiting_for_feedback = false;
  bool finished = false;
  std::optional<double> coverage_all;
};

/// Record of a human answer as it arrived.
struct ResolutionLogEntry {
  RequestId id = 0;
  Triplet triplet;
  std::optional<Choice> choice;  // nullopt = skipped
};

/// The only state shared between the optimizer thread and the HTTP service.
/// The optimizer enqueues requests and blocks on resolution events; the
/// service resolves each request at most once.
class FeedbackChannel {
 public:
  struct Event {
    RequestId id = 0;
    Triplet triplet;
    std::optional<Choice> choice;
  };

  RequestId enqueue(const Triplet& t, nlohmann::json payload) {
    std::lock_guard lock(mu_);
    const RequestId id = next_id_++;
    requests_.emplace(id, Entry{JudgmentRequest{id, t, std::move(payload)}, false});
    pending_.push_back(id);
    return id;
  }

  /// Oldest unresolved request, if any.
  [[nodiscard]] std::optional<JudgmentRequest> next_pending() const {
    std::lock_guard lock(mu_);
    if (pending_.empty()) return std::nullopt;
    return requests_.at(pending_.front()).request;
  }

  /// `choice == nullopt` skips the request.
  ResolveResult resolve(RequestId id, std::optional<Choice> choice) {
    {
      std::lock_guard lock(mu_);
      if (closed_) return ResolveResult::Closed;
      auto it = requests_.find(id);
      if (it == requests_.end()) return ResolveResult::UnknownId;
      if (it->second.resolved) return ResolveResult::AlreadyResolved;
      it->second.resolved = true;
      std::erase(pending_, id);
      events_.push_back(Event{id, it->second.request.triplet, choice});
      log_.push_back(ResolutionLogEntry{id, it->second.request.triplet, choice});
    }
    cv_.notify_all();
    return ResolveResult::Ok;
  }

  /// Blocks until a resolution arrives. Throws JudgeError on timeout or when
  /// the channel is closed.
  Event wait_event(std::optional<std::chrono::milliseconds> timeout) {
    std::unique_lock lock(mu_);
    auto ready = [&] { return closed_ || !events_.empty(); };
    if (timeout) {
      if (!cv_.wait_for(lock, *timeout, ready)) throw JudgeError("timed out waiting for judgment");
    } else {
      cv_.wait(lock, ready);
    }
    if (events_.empty()) throw JudgeError("feedback channel closed");
    Event ev = std::move(events_.front());
    events_.pop_front();
    return ev;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  [[nodiscard]] bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

  [[nodiscard]] std::size_t pending_count() const {
    std::lock_guard lock(mu_);
    return pending_.size();
  }

  void publish(const RunStatus& s) {
    std::lock_guard lock(mu_);
    status_ = s;
  }

  [[nodiscard]] RunStatus status() const {
    std::lock_guard lock(mu_);
    return status_;
  }

  [[nodiscard]] std::vector<ResolutionLogEntry> log() const {
    std::lock_guard lock(mu_);
    return log_;
  }

 private:
  struct Entry {
    JudgmentRequest request;
    bool resolved = false;
  };

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<RequestId, Entry> requests_;
  std::deque<RequestId> pending_;
  std::deque<Event> events_;
  std::vector<ResolutionLogEntry> log_;
  RunStatus status_;
  RequestId next_id_ = 1;
  bool closed_ = false;
};

/// Routes 2AFC queries to people through a FeedbackChannel. Skipped
/// requests are not charged; a replacement is drawn when the skip arrives.
class HumanJudge final : public Judge {
 public:
  explicit HumanJudge(FeedbackChannel& channel,
                      std::optional<std::chrono::milliseconds> timeout = std::nullopt)
      : channel_(channel), timeout_(timeout) {}

  std::vector<Judgment> collect(int n, const TripletSource& source) override {
    std::map<RequestId, Judgment> answered;
    auto post = [&] {
      const Triplet t = source.next();
      channel_.enqueue(t, source.render ? source.render(t) : nlohmann::json::object());
    };
    for (int i = 0; i < n; ++i) post();
    while (static_cast<int>(answered.size()) < n) {
      const auto ev = channel_.wait_event(timeout_);
      if (ev.choice) {
        answered.emplace(ev.id, Judgment{ev.triplet, *ev.choice, JudgeSource::Human});
      } else {
        post();
      }
    }
    std::vector<Judgment> out;
    out.reserve(answered.size());
    for (auto& [id, j] : answered) out.push_back(j);
    return out;
  }

  [[nodiscard]] JudgeSource kind() const override { return JudgeSource::Human; }

 private:
  FeedbackChannel& channel_;
  std::optional<std::chrono::milliseconds> timeout_;
};

}  // namespace qdhf
