#pragma once

// Scenario scripts and the deterministic engine that executes them against
// scripted navigation, dialogue, perception and movement stubs.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "butler/error.hpp"
#include "butler/frame_io.hpp"
#include "butler/gmr.hpp"
#include "butler/manager.hpp"
#include "butler/perception.hpp"
#include "butler/random.hpp"

namespace butler {

struct Stage {
  std::string name;
  std::vector<Task> tasks;
};

struct ScenarioOptions {
  bool depth_noise = false;
  std::string start_waypoint = "start";
  double approach_standoff = 0.8;  // metres kept from an approached target
  double search_turn = std::numbers::pi / 4.0;
  PerceptionOptions perception;
};

struct ScenarioScript {
  std::string name;
  std::vector<Stage> stages;
  ScenarioOptions options;
};

/// Scripted bindings that stand in for the robot's modules.
struct ScenarioStubs {
  std::map<std::string, RobotPose2D> waypoints;
  std::map<std::string, nlohmann::json> dialogue;  // answer key -> reply
  std::map<std::string, PerceptionFrame> frames;
  std::map<std::string, nlohmann::json> features;  // person -> attributes
  std::map<std::string, LearnedMovement> movements;
};

inline const std::set<std::string>& known_action_kinds() {
  static const std::set<std::string> kinds{"say",          "ask",          "navigate",      "approach",
                                           "observe_person", "find_free_chair", "detect_waving", "find_object",
                                           "play_movement", "wait",         "feedback"};
  return kinds;
}

namespace detail {

inline std::vector<std::string> frame_names(const nlohmann::json& args) {
  std::vector<std::string> out;
  if (args.contains("frames")) {
    for (const auto& f : args.at("frames")) out.push_back(f.get<std::string>());
  } else if (args.contains("frame")) {
    out.push_back(args.at("frame").get<std::string>());
  }
  return out;
}

inline std::string arg_string(const Task& task, const char* name) {
  const auto& a = task.action.args;
  if (!a.contains(name) || !a.at(name).is_string())
    throw InvalidArgument("task '" + task.id + "' (" + task.action.kind + ") needs string argument '" + name + "'");
  return a.at(name).get<std::string>();
}

}  // namespace detail

/// Structural checks plus stub coverage. Throws InvalidArgument for a
/// malformed script and StubMissing for an unbound stub reference.
inline void validate_scenario(const ScenarioScript& script, const ScenarioStubs& stubs) {
  if (script.stages.empty()) throw InvalidArgument("scenario has no stages");
  std::set<std::string> earlier;
  std::set<std::string> all_ids;
  for (const auto& stage : script.stages) {
    std::set<std::string> local;
    for (const auto& t : stage.tasks) {
      if (t.id.empty()) throw InvalidArgument("task id must be non-empty");
      if (!all_ids.insert(t.id).second) throw InvalidArgument("duplicate task id '" + t.id + "'");
      local.insert(t.id);
      if (!(t.estimated_duration >= 0.0) || !std::isfinite(t.estimated_duration))
        throw InvalidArgument("task '" + t.id + "' has a negative duration");
      if (!known_action_kinds().contains(t.action.kind))
        throw InvalidArgument("task '" + t.id + "' has unknown action kind '" + t.action.kind + "'");
    }
    for (const auto& t : stage.tasks)
      for (const auto& d : t.deps)
        if (!local.contains(d) && !earlier.contains(d))
          throw InvalidArgument("task '" + t.id + "' depends on '" + d + "' outside this or earlier stages");

    // Kahn's algorithm over in-stage edges.
    std::map<std::string, int> indeg;
    for (const auto& t : stage.tasks) indeg[t.id] = 0;
    for (const auto& t : stage.tasks)
      for (const auto& d : t.deps)
        if (local.contains(d)) ++indeg[t.id];
    std::vector<std::string> queue;
    for (const auto& [id, n] : indeg)
      if (n == 0) queue.push_back(id);
    std::size_t seen = 0;
    while (!queue.empty()) {
      const auto id = queue.back();
      queue.pop_back();
      ++seen;
      for (const auto& t : stage.tasks)
        if (std::find(t.deps.begin(), t.deps.end(), id) != t.deps.end() && --indeg[t.id] == 0) queue.push_back(t.id);
    }
    if (seen != stage.tasks.size()) throw InvalidArgument("stage '" + stage.name + "' has cyclic dependencies");
    earlier.insert(local.begin(), local.end());
  }

  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw StubMissing(what);
  };
  for (const auto& stage : script.stages) {
    for (const auto& t : stage.tasks) {
      const auto& kind = t.action.kind;
      const std::string where = " (stage '" + stage.name + "', task '" + t.id + "')";
      if (kind == "ask") {
        const auto key = detail::arg_string(t, "answer");
        need(stubs.dialogue.contains(key), "dialogue reply '" + key + "'" + where);
      } else if (kind == "navigate") {
        const auto wp = detail::arg_string(t, "waypoint");
        need(stubs.waypoints.contains(wp), "waypoint '" + wp + "'" + where);
      } else if (kind == "approach") {
        detail::arg_string(t, "target");
      } else if (kind == "play_movement") {
        const auto mv = detail::arg_string(t, "movement");
        need(stubs.movements.contains(mv), "movement '" + mv + "'" + where);
      } else if (kind == "observe_person" || kind == "find_free_chair" || kind == "detect_waving" ||
                 kind == "find_object") {
        const auto frames = detail::frame_names(t.action.args);
        if (frames.empty()) throw InvalidArgument("task '" + t.id + "' needs 'frame' or 'frames'");
        for (const auto& f : frames) need(stubs.frames.contains(f), "perception frame '" + f + "'" + where);
        if (kind == "observe_person" && t.action.args.contains("features")) {
          const auto fe = detail::arg_string(t, "features");
          need(stubs.features.contains(fe), "person features '" + fe + "'" + where);
        }
        if (kind == "find_object") detail::arg_string(t, "label");
      }
    }
  }
}

struct ScenarioOutcome {
  EventLog log;
  nlohmann::json blackboard;  // final snapshot
  bool completed = false;     // every stage ran and no error was recorded
};

namespace detail {

/// Executes one script. Time is simulated: a task starts at the current
/// tick and the clock then advances by its estimated duration.
class ScenarioEngine {
 public:
  ScenarioEngine(const ScenarioScript& script, const ScenarioStubs& stubs, std::uint64_t seed)
      : script_(script), stubs_(stubs), seed_(seed) {}

  ScenarioOutcome run() {
    validate_scenario(script_, stubs_);
    for (const auto& [name, m] : stubs_.movements) store_.put(m);
    const auto start = stubs_.waypoints.find(script_.options.start_waypoint);
    pose_ = start != stubs_.waypoints.end() ? start->second : RobotPose2D{};
    write("navigation/pose", pose_json(script_.options.start_waypoint));

    bool halted = false;
    for (const auto& stage : script_.stages) {
      log_.append(tick_, EventKind::stage_entered, {{"stage", stage.name}});
      if (!run_stage(stage)) {
        halted = true;
        break;
      }
    }
    ScenarioOutcome out;
    out.blackboard = board_.snapshot();
    out.completed = !halted && log_.count(EventKind::error) == 0;
    out.log = std::move(log_);
    return out;
  }

 private:
  bool run_stage(const Stage& stage) {
    std::vector<const Task*> pending;
    for (const auto& t : stage.tasks) pending.push_back(&t);
    bool stage_ok = true;
    while (true) {
      std::vector<const Task*> ready;
      for (const auto* t : pending)
        if (std::all_of(t->deps.begin(), t->deps.end(), [&](const std::string& d) { return done_.contains(d); }))
          ready.push_back(t);
      const auto pick = schedule_next(std::span<const Task* const>(ready));
      if (!pick) break;
      const Task& task = *ready[*pick];
      pending.erase(std::find(pending.begin(), pending.end(), &task));
      log_.append(tick_, EventKind::task_started, {{"id", task.id}, {"name", task.name}, {"kind", task.action.kind}});
      try {
        execute(task);
      } catch (const Error& e) {
        log_.append(tick_, EventKind::error, {{"task", task.id}, {"stage", stage.name}, {"message", e.what()}});
        stage_ok = false;
        continue;
      } catch (const nlohmann::json::exception& e) {
        log_.append(tick_, EventKind::error, {{"task", task.id}, {"stage", stage.name}, {"message", e.what()}});
        stage_ok = false;
        continue;
      }
      tick_ += std::llround(task.estimated_duration * 1000.0);
      done_.insert(task.id);
      log_.append(tick_, EventKind::task_finished, {{"id", task.id}});
    }
    for (const auto* t : pending) {
      log_.append(tick_, EventKind::error,
                  {{"task", t->id}, {"stage", stage.name}, {"message", "skipped: a dependency did not complete"}});
      stage_ok = false;
    }
    return stage_ok;
  }

  void write(const std::string& key, nlohmann::json value) {
    const auto ts = board_.put(key, value);
    log_.append(tick_, EventKind::blackboard_write, {{"key", key}, {"value", std::move(value)}, {"timestamp", ts}});
  }

  nlohmann::json read(const std::string& key) const {
    const auto e = board_.get(key);
    if (!e) throw TaskActionFailed("blackboard has no entry '" + key + "'");
    return e->value;
  }

  nlohmann::json pose_json(const std::string& waypoint = "") const {
    nlohmann::json j = {{"x", pose_.x}, {"y", pose_.y}, {"theta", pose_.theta}};
    if (!waypoint.empty()) j["waypoint"] = waypoint;
    return j;
  }

  PerceptionFrame capture(const std::string& name) {
    PerceptionFrame f = stubs_.frames.at(name);
    f.pose = pose_;
    f.timestamp = static_cast<double>(tick_) / 1000.0;
    if (script_.options.depth_noise) f.depth = apply_depth_noise(f.depth, derive_seed(seed_, 0xca7, captures_));
    ++captures_;
    return f;
  }

  std::string render(const std::string& text) const {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
      const auto open = text.find('{', i);
      if (open == std::string::npos) {
        out += text.substr(i);
        break;
      }
      const auto close = text.find('}', open);
      if (close == std::string::npos) throw TaskActionFailed("unterminated placeholder in '" + text + "'");
      out += text.substr(i, open - i);
      const auto v = read(text.substr(open + 1, close - open - 1));
      out += v.is_string() ? v.get<std::string>() : v.dump();
      i = close + 1;
    }
    return out;
  }

  static nlohmann::json object_json(const WorldObject& o) {
    return {{"label", o.label}, {"x", o.x}, {"y", o.y}, {"distance", o.distance}};
  }

  void execute(const Task& task) {
    const auto& kind = task.action.kind;
    const auto args = task.action.args.is_null() ? nlohmann::json::object() : task.action.args;
    if (kind == "say") {
      std::string text;
      if (args.contains("variants")) {
        const auto sel = read(args.at("select").get<std::string>());
        const auto key = sel.is_string() ? sel.get<std::string>() : sel.dump();
        const auto& variants = args.at("variants");
        if (variants.contains(key)) text = variants.at(key).get<std::string>();
        else if (args.contains("text")) text = args.at("text").get<std::string>();
        else throw TaskActionFailed("no utterance variant for '" + key + "'");
      } else {
        text = args.at("text").get<std::string>();
      }
      write("dialogue/said", render(text));
    } else if (kind == "ask") {
      const auto answer = args.at("answer").get<std::string>();
      if (args.contains("prompt")) write("dialogue/said", render(args.at("prompt").get<std::string>()));
      write(args.value("store", "dialogue/" + answer), stubs_.dialogue.at(answer));
    } else if (kind == "navigate") {
      const auto wp = args.at("waypoint").get<std::string>();
      pose_ = stubs_.waypoints.at(wp);
      write("navigation/pose", pose_json(wp));
    } else if (kind == "approach") {
      const auto target = read(args.at("target").get<std::string>());
      const double tx = target.at("x").get<double>(), ty = target.at("y").get<double>();
      const double dx = tx - pose_.x, dy = ty - pose_.y;
      const double dist = std::hypot(dx, dy);
      const double heading = dist > 0.0 ? std::atan2(dy, dx) : pose_.theta;
      const double travel = std::max(0.0, dist - args.value("standoff", script_.options.approach_standoff));
      pose_ = RobotPose2D(pose_.x + travel * std::cos(heading), pose_.y + travel * std::sin(heading), heading);
      write("navigation/pose", pose_json());
    } else if (kind == "observe_person") {
      const auto frame = capture(detail::frame_names(args).front());
      const auto loc = localize_objects(frame);
      const WorldObject* best = nullptr;
      for (const auto& o : loc.objects)
        if (o.label == script_.options.perception.person_label && (!best || o.distance < best->distance)) best = &o;
      if (!best) throw TaskActionFailed("no person with valid depth in view");
      const auto store = args.value("store", std::string("guest"));
      write(store + "/position", object_json(*best));
      if (args.contains("features"))
        for (const auto& [k, v] : stubs_.features.at(args.at("features").get<std::string>()).items())
          write(store + "/" + k, v);
    } else if (kind == "find_free_chair") {
      const auto frames = detail::frame_names(args);
      for (std::size_t i = 0; i < frames.size(); ++i) {
        if (i > 0) {
          pose_ = RobotPose2D(pose_.x, pose_.y, pose_.theta + args.value("turn", script_.options.search_turn));
          write("navigation/pose", pose_json());
        }
        const auto rep = analyze_frame(capture(frames[i]), script_.options.perception);
        const ChairReport* best = nullptr;
        for (const auto& c : rep.chairs)
          if (c.occupancy.status == ChairStatus::free && c.location &&
              (!best || c.location->distance < best->location->distance))
            best = &c;
        write("perception/chairs", chairs_json(rep));
        if (best) {
          auto j = object_json(*best->location);
          j["overlap"] = best->occupancy.overlap;
          write("perception/free_chair", std::move(j));
          return;
        }
      }
      throw TaskActionFailed("no free chair found");
    } else if (kind == "detect_waving") {
      for (const auto& name : detail::frame_names(args)) {
        const auto frame = capture(name);
        const auto rep = analyze_frame(frame, script_.options.perception);
        for (std::size_t p = 0; p < rep.waving.size(); ++p) {
          if (!rep.waving[p].any()) continue;
          log_.append(tick_, EventKind::feedback,
                      {{"signal", "eyes_color_changed"}, {"color", args.value("color", std::string("blue"))},
                       {"task", task.id}});
          write("perception/waving", true);
          write("perception/waving_person", object_json(waving_person(frame, rep, p)));
          return;
        }
      }
      write("perception/waving", false);
      throw TaskActionFailed("nobody waved");
    } else if (kind == "find_object") {
      const auto label = args.at("label").get<std::string>();
      for (const auto& name : detail::frame_names(args)) {
        const auto loc = localize_objects(capture(name));
        const WorldObject* best = nullptr;
        for (const auto& o : loc.objects)
          if (o.label == label && (!best || o.distance < best->distance)) best = &o;
        if (best) {
          write(args.value("store", "perception/" + label), object_json(*best));
          return;
        }
      }
      throw TaskActionFailed("no '" + label + "' found");
    } else if (kind == "play_movement") {
      const auto name = args.at("movement").get<std::string>();
      const auto movement = store_.get(name);
      if (!movement) throw TaskActionFailed("unknown movement '" + name + "'");
      const double speed = args.value("speed", 1.0);
      const auto traj = generate_trajectory(*movement, speed, args.value("rate", movement->default_rate));
      const auto& last = traj.samples().back().q;
      write("movement/last", {{"name", name},
                              {"speed", speed},
                              {"samples", traj.size()},
                              {"duration_s", traj.duration()},
                              {"final_q", std::vector<double>(last.data(), last.data() + last.size())}});
    } else if (kind == "feedback") {
      log_.append(tick_, EventKind::feedback, {{"signal", args.at("signal").get<std::string>()}, {"task", task.id}});
    } else if (kind == "wait") {
      // advances the clock only
    } else {
      throw TaskActionFailed("unknown action kind '" + kind + "'");
    }
  }

  static nlohmann::json chairs_json(const FrameReport& rep) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : rep.chairs)
      arr.push_back({{"status", to_string(c.occupancy.status)}, {"overlap", c.occupancy.overlap}});
    return arr;
  }

  /// The person mask holding the raised wrist, else the nearest person.
  WorldObject waving_person(const PerceptionFrame& frame, const FrameReport& rep, std::size_t person) const {
    const auto& kp = frame.persons[person].keypoints;
    const auto& wave = rep.waving[person];
    const Keypoint wrist = kp.get(wave.right ? "wrist_r" : "wrist_l");
    const WorldObject* nearest = nullptr;
    for (const auto& o : rep.localization.objects) {
      if (o.label != script_.options.perception.person_label) continue;
      if (frame.detections[o.detection_index].bbox.contains(static_cast<int>(wrist.u), static_cast<int>(wrist.v)))
        return o;
      if (!nearest || o.distance < nearest->distance) nearest = &o;
    }
    if (!nearest) throw TaskActionFailed("waving person has no localized mask");
    return *nearest;
  }

  const ScenarioScript& script_;
  const ScenarioStubs& stubs_;
  std::uint64_t seed_;
  Blackboard board_;
  EventLog log_;
  MovementStore store_;
  RobotPose2D pose_;
  std::set<std::string> done_;
  std::int64_t tick_ = 0;
  std::uint64_t captures_ = 0;
};

}  // namespace detail

/// Runs every stage in order. A failing task is recorded as an error
/// event; the rest of its stage still runs where dependencies allow, and
/// the scenario stops at the end of that stage.
inline ScenarioOutcome run_scenario_detailed(const ScenarioScript& script, const ScenarioStubs& stubs,
                                             std::uint64_t seed) {
  return detail::ScenarioEngine(script, stubs, seed).run();
}

inline EventLog run_scenario(const ScenarioScript& script, const ScenarioStubs& stubs, std::uint64_t seed) {
  return run_scenario_detailed(script, stubs, seed).log;
}

// ---------------------------------------------------------------------------
// Script files

inline nlohmann::json task_to_json(const Task& t) {
  return {{"id", t.id},
          {"name", t.name},
          {"duration_s", t.estimated_duration},
          {"priority", t.priority_class},
          {"deps", t.deps},
          {"action",
           {{"kind", t.action.kind},
            {"args", t.action.args.is_null() ? nlohmann::json::object() : t.action.args}}}};
}

inline Task task_from_json(const nlohmann::json& j) {
  Task t;
  t.id = j.at("id").get<std::string>();
  t.name = j.value("name", t.id);
  t.estimated_duration = j.at("duration_s").get<double>();
  t.priority_class = j.value("priority", 0);
  t.deps = j.value("deps", std::vector<std::string>{});
  const auto& a = j.at("action");
  t.action.kind = a.at("kind").get<std::string>();
  t.action.args = a.value("args", nlohmann::json::object());
  if (t.action.args.is_null()) t.action.args = nlohmann::json::object();
  return t;
}

inline nlohmann::json scenario_to_json(const ScenarioScript& script, const ScenarioStubs& stubs) {
  nlohmann::json j;
  j["name"] = script.name;
  j["options"] = {{"depth_noise", script.options.depth_noise},
                  {"start_waypoint", script.options.start_waypoint},
                  {"approach_standoff", script.options.approach_standoff},
                  {"search_turn", script.options.search_turn},
                  {"overlap_threshold", script.options.perception.overlap_threshold},
                  {"min_keypoint_confidence", script.options.perception.min_keypoint_confidence}};
  auto& stages = j["stages"] = nlohmann::json::array();
  for (const auto& s : script.stages) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : s.tasks) tasks.push_back(task_to_json(t));
    stages.push_back({{"name", s.name}, {"tasks", std::move(tasks)}});
  }
  auto& st = j["stubs"];
  st["waypoints"] = nlohmann::json::object();
  for (const auto& [n, p] : stubs.waypoints) st["waypoints"][n] = {{"x", p.x}, {"y", p.y}, {"theta", p.theta}};
  st["dialogue"] = nlohmann::json::object();
  for (const auto& [n, v] : stubs.dialogue) st["dialogue"][n] = v;
  st["features"] = nlohmann::json::object();
  for (const auto& [n, v] : stubs.features) st["features"][n] = v;
  st["frames"] = nlohmann::json::object();
  for (const auto& [n, f] : stubs.frames) st["frames"][n] = frame_to_json(f);
  st["movements"] = nlohmann::json::object();
  for (const auto& [n, m] : stubs.movements) st["movements"][n] = movement_to_json(m);
  return j;
}

struct LoadedScenario {
  ScenarioScript script;
  ScenarioStubs stubs;
};

/// Parses a script document. String-valued frame or movement stubs are
/// file paths resolved against `base_dir`.
inline LoadedScenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  LoadedScenario out;
  try {
    out.script.name = j.at("name").get<std::string>();
    if (j.contains("options")) {
      const auto& o = j.at("options");
      auto& opt = out.script.options;
      opt.depth_noise = o.value("depth_noise", opt.depth_noise);
      opt.start_waypoint = o.value("start_waypoint", opt.start_waypoint);
      opt.approach_standoff = o.value("approach_standoff", opt.approach_standoff);
      opt.search_turn = o.value("search_turn", opt.search_turn);
      opt.perception.overlap_threshold = o.value("overlap_threshold", opt.perception.overlap_threshold);
      opt.perception.min_keypoint_confidence =
          o.value("min_keypoint_confidence", opt.perception.min_keypoint_confidence);
    }
    for (const auto& s : j.at("stages")) {
      Stage stage;
      stage.name = s.at("name").get<std::string>();
      for (const auto& t : s.at("tasks")) stage.tasks.push_back(task_from_json(t));
      out.script.stages.push_back(std::move(stage));
    }
    const auto stubs = j.value("stubs", nlohmann::json::object());
    // value() returns a copy; items() must not outlive it.
    const auto section = [&](const char* key) { return stubs.value(key, nlohmann::json::object()); };
    const auto waypoints = section("waypoints"), dialogue = section("dialogue"), features = section("features");
    const auto frames = section("frames"), movements = section("movements");
    for (const auto& [n, p] : waypoints.items())
      out.stubs.waypoints[n] = RobotPose2D(p.at("x").get<double>(), p.at("y").get<double>(), p.value("theta", 0.0));
    for (const auto& [n, v] : dialogue.items()) out.stubs.dialogue[n] = v;
    for (const auto& [n, v] : features.items()) out.stubs.features[n] = v;
    for (const auto& [n, v] : frames.items())
      out.stubs.frames[n] = v.is_string() ? load_frame(base_dir / v.get<std::string>()) : frame_from_json(v);
    for (const auto& [n, v] : movements.items()) {
      auto m = v.is_string() ? load_movement(base_dir / v.get<std::string>()) : movement_from_json(v);
      if (m.name != n) throw FormatError("movement stub '" + n + "' holds movement '" + m.name + "'");
      out.stubs.movements.emplace(n, std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed scenario script: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid scenario script: ") + e.what());
  }
  return out;
}

inline LoadedScenario load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j, path.parent_path());
}

}  // namespace butler
