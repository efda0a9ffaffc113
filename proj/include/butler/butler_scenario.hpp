#pragma once

// The hotel-butler scenario: Reception, Seat, Dialog, Taxi, Bag. Frames
// are rendered synthetically and the three arm movements are learned from
// generated demonstrations, so the whole script is reproducible from code.

#include <numbers>
#include <string>
#include <vector>

#include "butler/gmr.hpp"
#include "butler/scenario.hpp"
#include "butler/synthetic.hpp"

namespace butler {

namespace detail {

struct SceneBuilder {
  PerceptionFrame frame;

  explicit SceneBuilder(int w = 160, int h = 120, double background = 6.0) {
    frame.camera = CameraModel{w, h, kDefaultHfov};
    frame.depth = DepthImage(w, h, static_cast<float>(background));
  }

  /// Adds a rectangular detection. Later objects are closer and overwrite
  /// depth where they overlap earlier ones. Depths are float-exact so the
  /// frame survives the float32 file format unchanged.
  SceneBuilder& object(const std::string& label, PixelRect r, double depth) {
    frame.detections.push_back(DetectionMask::rectangle(label, frame.camera.width, frame.camera.height, r, 0.95));
    for (int v = r.y; v < r.y + r.h; ++v)
      for (int u = r.x; u < r.x + r.w; ++u) frame.depth.at(u, v) = static_cast<float>(depth);
    return *this;
  }

  SceneBuilder& person(PixelRect r, double depth, bool raised) {
    object("person", r, depth);
    frame.persons.push_back({make_person_keypoints(r.x + r.w / 2.0, r.y, r.h / 60.0, raised)});
    return *this;
  }
};

inline Task task(std::string id, std::string name, double duration, int priority, std::vector<std::string> deps,
                 std::string kind, nlohmann::json args = nlohmann::json::object()) {
  return {std::move(id), std::move(name), duration, priority, std::move(deps), {std::move(kind), std::move(args)}};
}

inline LearnedMovement learn_builtin_movement(const std::string& name, Waveform wave, double amplitude,
                                              std::uint64_t seed) {
  DemoGenConfig cfg;
  cfg.label = name;
  cfg.waveform = wave;
  cfg.joints = 5;
  cfg.count = 2;
  cfg.samples = 80;
  cfg.duration = 3.0;
  cfg.amplitude = amplitude;
  cfg.noise = 0.005;
  cfg.idle_pad = 0.5;
  const auto demos = generate_demos(cfg, seed);
  LearnConfig lc;
  lc.seed = seed;
  lc.select.k_min = 1;
  lc.select.k_max = 5;
  lc.select.restarts = 2;
  lc.default_rate = 25.0;
  return learn_movement(demos, name, lc);
}

}  // namespace detail

inline LoadedScenario make_butler_scenario(std::uint64_t seed = 2020) {
  using detail::SceneBuilder;
  using detail::task;
  LoadedScenario out;
  auto& stubs = out.stubs;

  stubs.waypoints["start"] = RobotPose2D(0.0, 0.0, 0.0);
  stubs.waypoints["reception_desk"] = RobotPose2D(-3.0, 2.0, std::numbers::pi / 2.0);
  stubs.waypoints["lounge"] = RobotPose2D(4.0, -1.0, 0.0);

  stubs.frames["lobby"] = SceneBuilder().person({70, 20, 20, 90}, 2.5, false).frame;
  stubs.frames["lounge_view_0"] = SceneBuilder()
                                      .object("chair", {20, 60, 30, 40}, 2.0)
                                      .person({25, 20, 25, 80}, 1.9, false)
                                      .object("chair", {110, 60, 30, 40}, 2.2)
                                      .person({112, 20, 25, 80}, 2.1, false)
                                      .frame;
  stubs.frames["lounge_view_1"] = SceneBuilder()
                                      .object("chair", {30, 60, 30, 40}, 2.4)
                                      .person({32, 20, 25, 80}, 2.3, false)
                                      .object("chair", {100, 62, 32, 40}, 1.8)
                                      .frame;
  stubs.frames["hall_view_0"] = SceneBuilder().person({60, 15, 24, 100}, 3.0, false).frame;
  stubs.frames["hall_view_1"] = SceneBuilder().person({90, 15, 24, 100}, 2.7, true).frame;
  stubs.frames["floor_view"] = SceneBuilder().object("bottle", {20, 80, 8, 20}, 2.2).object("bag", {70, 85, 26, 25}, 1.4).frame;

  stubs.dialogue["guest_name"] = "Alex";
  stubs.dialogue["reservation"] = "one night, single room";
  stubs.dialogue["drink"] = "a glass of water";
  stubs.dialogue["service"] = "taxi";
  stubs.dialogue["taxi_station"] = "a taxi will arrive in ten minutes";
  stubs.dialogue["bag_request"] = "yes, please carry my bag";
  stubs.features["guest"] = {{"gender", "female"}, {"age", 34}};

  stubs.movements.emplace("point_seat", detail::learn_builtin_movement("point_seat", Waveform::min_jerk, 0.8, derive_seed(seed, 1)));
  stubs.movements.emplace("phone_call", detail::learn_builtin_movement("phone_call", Waveform::min_jerk, 1.1, derive_seed(seed, 2)));
  stubs.movements.emplace("take_bag", detail::learn_builtin_movement("take_bag", Waveform::sinusoid, 0.4, derive_seed(seed, 3)));

  auto& script = out.script;
  script.name = "butler";
  script.options.depth_noise = true;

  script.stages.push_back(
      {"Reception",
       {task("rc_wait", "wait for a client", 2.0, 0, {}, "observe_person",
             {{"frame", "lobby"}, {"features", "guest"}, {"store", "guest"}}),
        task("rc_greet", "greet", 1.5, 0, {"rc_wait"}, "say",
             {{"select", "guest/gender"},
              {"variants", {{"female", "Good evening madam, welcome to the Harbour hotel."},
                            {"male", "Good evening sir, welcome to the Harbour hotel."}}},
              {"text", "Good evening, welcome to the Harbour hotel."}}),
        task("rc_approach", "move towards the client", 4.0, 0, {"rc_wait"}, "approach", {{"target", "guest/position"}}),
        task("rc_name", "ask the client's name", 3.0, 0, {"rc_greet", "rc_approach"}, "ask",
             {{"prompt", "May I have your name?"}, {"answer", "guest_name"}, {"store", "guest/name"}}),
        task("rc_booking", "take the reservation", 5.0, 0, {"rc_name"}, "ask",
             {{"prompt", "How long will you stay, {guest/name}?"}, {"answer", "reservation"}, {"store", "guest/reservation"}})}});

  script.stages.push_back(
      {"Seat",
       {task("st_offer", "propose a seat", 1.5, 0, {}, "say", {{"text", "Please, have a seat."}}),
        task("st_search", "turn until a free seat is seen", 6.0, 0, {"st_offer"}, "find_free_chair",
             {{"frames", {"lounge_view_0", "lounge_view_1"}}}),
        task("st_goto", "move towards the seat", 4.0, 0, {"st_search"}, "approach", {{"target", "perception/free_chair"}}),
        task("st_point", "point the seat", 3.0, 0, {"st_goto"}, "play_movement", {{"movement", "point_seat"}}),
        task("st_drink", "ask for a drink", 4.0, 1, {"st_point"}, "ask",
             {{"prompt", "Would you like something to drink?"}, {"answer", "drink"}, {"store", "guest/drink"}})}});

  script.stages.push_back(
      {"Dialog",
       {task("dg_go", "go to the receptionist", 8.0, 0, {}, "navigate", {{"waypoint", "reception_desk"}}),
        task("dg_report", "report the guest", 6.0, 0, {"dg_go"}, "say",
             {{"text", "Our guest {guest/name} is a {guest/gender} of about {guest/age} years, "
                       "staying {guest/reservation}, and would like {guest/drink}."}}),
        task("dg_back", "return to the start", 8.0, 0, {"dg_report"}, "navigate", {{"waypoint", "start"}})}});

  script.stages.push_back(
      {"Taxi",
       {task("tx_watch", "wait for a waving hand", 3.0, 0, {}, "detect_waving", {{"frames", {"hall_view_0", "hall_view_1"}}}),
        task("tx_approach", "move in front of the person", 4.0, 0, {"tx_watch"}, "approach",
             {{"target", "perception/waving_person"}}),
        task("tx_offer", "offer services", 2.0, 0, {"tx_approach"}, "ask",
             {{"prompt", "How can I help you?"}, {"answer", "service"}, {"store", "guest/service"}}),
        task("tx_phone", "mime a phone call", 3.0, 0, {"tx_offer"}, "play_movement", {{"movement", "phone_call"}}),
        task("tx_call", "call the taxi station", 5.0, 0, {"tx_offer"}, "ask", {{"answer", "taxi_station"}, {"store", "taxi/status"}}),
        task("tx_inform", "inform the guest", 2.0, 0, {"tx_phone", "tx_call"}, "say", {{"text", "Good news: {taxi/status}."}})}});

  script.stages.push_back(
      {"Bag",
       {task("bg_offer", "offer to carry the bag", 2.0, 0, {}, "ask",
             {{"prompt", "Shall I carry your bag?"}, {"answer", "bag_request"}, {"store", "guest/bag_request"}}),
        task("bg_find", "detect the bag", 1.0, 0, {"bg_offer"}, "find_object", {{"frame", "floor_view"}, {"label", "bag"}}),
        task("bg_goto", "move in front of the bag", 4.0, 0, {"bg_find"}, "approach",
             {{"target", "perception/bag"}, {"standoff", 0.4}}),
        task("bg_take", "take the bag", 3.0, 0, {"bg_goto"}, "play_movement", {{"movement", "take_bag"}, {"speed", 0.8}}),
        task("bg_return", "carry it back to the start", 8.0, 0, {"bg_take"}, "navigate", {{"waypoint", "start"}}),
        task("bg_done", "announce the end", 1.0, 1, {"bg_take"}, "say", {{"text", "Here is your bag. Have a nice trip!"}})}});
  return out;
}

}  // namespace butler
