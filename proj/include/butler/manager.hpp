#pragma once

// Rule-based manager primitives: tasks, shortest-job-first selection, the
// blackboard and the event log.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "butler/error.hpp"

namespace butler {

struct TaskAction {
  std::string kind;
  nlohmann::json args = nlohmann::json::object();
};

struct Task {
  std::string id;
  std::string name;
  double estimated_duration = 0.0;  // seconds
  int priority_class = 0;           // lower is more urgent
  std::vector<std::string> deps;
  TaskAction action;
};

/// Orders tasks by (priority class, estimated duration, id).
inline bool runs_before(const Task& a, const Task& b) {
  return std::tie(a.priority_class, a.estimated_duration, a.id) <
         std::tie(b.priority_class, b.estimated_duration, b.id);
}

/// Most urgent class first, then shortest job, then lexicographic id.
/// Returns the index into `ready`, or nothing when it is empty.
inline std::optional<std::size_t> schedule_next(std::span<const Task> ready) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < ready.size(); ++i)
    if (!best || runs_before(ready[i], ready[*best])) best = i;
  return best;
}

inline std::optional<std::size_t> schedule_next(std::span<const Task* const> ready) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < ready.size(); ++i)
    if (!best || runs_before(*ready[i], *ready[*best])) best = i;
  return best;
}

// ---------------------------------------------------------------------------

struct BlackboardEntry {
  nlohmann::json value;
  std::uint64_t timestamp = 0;
};

/// Latest value per key. Keys are `<module>/<name>`. Timestamps come from a
/// single write counter, so they strictly increase per key. Readers may run
/// concurrently with each other; writes are exclusive.
class Blackboard {
 public:
  static bool valid_key(const std::string& key) {
    const auto slash = key.find('/');
    return slash != std::string::npos && slash > 0 && slash + 1 < key.size();
  }

  std::uint64_t put(const std::string& key, nlohmann::json value) {
    if (key.empty()) throw InvalidArgument("blackboard key must be non-empty");
    if (!valid_key(key)) throw InvalidArgument("blackboard key '" + key + "' must be namespaced as <module>/<name>");
    std::unique_lock lock(mutex_);
    const std::uint64_t ts = ++clock_;
    entries_[key] = {std::move(value), ts};
    return ts;
  }

  std::optional<BlackboardEntry> get(const std::string& key) const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::string> keys() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  nlohmann::json snapshot() const {
    std::shared_lock lock(mutex_);
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, e] : entries_) j[k] = {{"value", e.value}, {"timestamp", e.timestamp}};
    return j;
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, BlackboardEntry> entries_;
  std::uint64_t clock_ = 0;
};

// ---------------------------------------------------------------------------

enum class EventKind { task_started, task_finished, stage_entered, feedback, blackboard_write, error };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::task_started: return "task_started";
    case EventKind::task_finished: return "task_finished";
    case EventKind::stage_entered: return "stage_entered";
    case EventKind::feedback: return "feedback";
    case EventKind::blackboard_write: return "blackboard_write";
    case EventKind::error: return "error";
  }
  return "unknown";
}

struct Event {
  std::int64_t tick = 0;  // simulated milliseconds
  EventKind kind = EventKind::error;
  nlohmann::json payload = nlohmann::json::object();
};

class EventLog {
 public:
  void append(std::int64_t tick, EventKind kind, nlohmann::json payload) {
    if (!events_.empty() && tick < events_.back().tick) throw InvalidArgument("event ticks must not decrease");
    events_.push_back({tick, kind, std::move(payload)});
  }

  const std::vector<Event>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

  std::size_t count(EventKind kind) const {
    std::size_t n = 0;
    for (const auto& e : events_) n += e.kind == kind ? 1 : 0;
    return n;
  }

  /// One JSON object per line: {"kind":..., "payload":..., "tick":...}.
  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : events_) {
      const nlohmann::json j = {{"tick", e.tick}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
      out += j.dump();
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<Event> events_;
};

}  // namespace butler
