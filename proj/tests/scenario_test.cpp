#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "butler/butler_scenario.hpp"
#include "oracles.hpp"

namespace butler {
namespace {

namespace fs = std::filesystem;

const LoadedScenario& butler() {
  static const LoadedScenario s = make_butler_scenario();
  return s;
}

std::vector<std::string> stages_entered(const EventLog& log) {
  std::vector<std::string> out;
  for (const auto& e : log.events())
    if (e.kind == EventKind::stage_entered) out.push_back(e.payload.at("stage").get<std::string>());
  return out;
}

std::ptrdiff_t index_of(const EventLog& log, EventKind kind, const std::string& field, const std::string& value) {
  const auto& ev = log.events();
  for (std::size_t i = 0; i < ev.size(); ++i)
    if (ev[i].kind == kind && ev[i].payload.contains(field) && ev[i].payload.at(field) == value)
      return static_cast<std::ptrdiff_t>(i);
  return -1;
}

TEST(Butler, StagesRunInOrderAndComplete) {
  const auto out = run_scenario_detailed(butler().script, butler().stubs, 2020);
  EXPECT_TRUE(out.completed);
  EXPECT_EQ(stages_entered(out.log), (std::vector<std::string>{"Reception", "Seat", "Dialog", "Taxi", "Bag"}));
  EXPECT_EQ(out.log.count(EventKind::error), 0u);
  EXPECT_EQ(out.log.count(EventKind::task_finished), 25u);
}

TEST(Butler, WavingFeedbackPrecedesApproach) {
  const auto log = run_scenario(butler().script, butler().stubs, 2020);
  const auto fb = index_of(log, EventKind::feedback, "signal", "eyes_color_changed");
  const auto approach = index_of(log, EventKind::task_started, "id", "tx_approach");
  ASSERT_GE(fb, 0);
  ASSERT_GE(approach, 0);
  EXPECT_LT(fb, approach);
  EXPECT_EQ(log.count(EventKind::feedback), 1u);
}

TEST(Butler, RunsAreByteIdentical) {
  const auto a = run_scenario(butler().script, butler().stubs, 2020).to_jsonl();
  const auto b = run_scenario(butler().script, butler().stubs, 2020).to_jsonl();
  EXPECT_EQ(a, b);
  // Depth noise is seeded, so another seed changes the measured positions.
  EXPECT_NE(run_scenario(butler().script, butler().stubs, 7).to_jsonl(), a);
}

TEST(Butler, ModulesReportThroughTheBlackboard) {
  const auto out = run_scenario_detailed(butler().script, butler().stubs, 2020);
  const auto& bb = out.blackboard;
  EXPECT_EQ(bb["perception/free_chair"]["value"]["label"], "chair");
  EXPECT_LT(bb["perception/free_chair"]["value"]["overlap"].get<double>(), kDefaultOverlapThreshold);
  EXPECT_NEAR(bb["perception/free_chair"]["value"]["distance"].get<double>(), 1.8, 0.05);
  EXPECT_EQ(bb["perception/waving"]["value"], true);
  EXPECT_EQ(bb["movement/last"]["value"]["name"], "take_bag");
  EXPECT_EQ(bb["guest/name"]["value"], "Alex");
  EXPECT_EQ(bb["navigation/pose"]["value"]["waypoint"], "start");
  const auto said = bb["dialogue/said"]["value"].get<std::string>();
  EXPECT_EQ(said, "Here is your bag. Have a nice trip!");

  std::set<std::string> played;
  std::map<std::string, std::uint64_t> last_ts;
  for (const auto& e : out.log.events()) {
    if (e.kind != EventKind::blackboard_write) continue;
    const auto key = e.payload.at("key").get<std::string>();
    const auto ts = e.payload.at("timestamp").get<std::uint64_t>();
    if (last_ts.contains(key)) {
      EXPECT_GT(ts, last_ts[key]);
    }
    last_ts[key] = ts;
    if (key == "movement/last") played.insert(e.payload.at("value").at("name").get<std::string>());
  }
  EXPECT_EQ(played, (std::set<std::string>{"point_seat", "phone_call", "take_bag"}));
}

TEST(Butler, ScheduleAuditIsClean) {
  const auto log = run_scenario(butler().script, butler().stubs, 2020);
  const auto audit = oracle::audit_schedule(butler().script, log);
  EXPECT_EQ(audit.started, 25u);
  EXPECT_EQ(audit.dependency_violations, 0u);
  EXPECT_EQ(audit.oracle_mismatches, 0u);
}

TEST(Scenario, MissingStubIsReported) {
  auto stubs = butler().stubs;
  stubs.dialogue.erase("drink");
  EXPECT_THROW(validate_scenario(butler().script, stubs), StubMissing);
  EXPECT_THROW(run_scenario(butler().script, stubs, 1), StubMissing);
  stubs = butler().stubs;
  stubs.frames.erase("floor_view");
  EXPECT_THROW(run_scenario(butler().script, stubs, 1), StubMissing);
  stubs = butler().stubs;
  stubs.movements.erase("take_bag");
  EXPECT_THROW(run_scenario(butler().script, stubs, 1), StubMissing);
}

TEST(Scenario, StructuralErrorsAreRejected) {
  auto script = butler().script;
  script.stages[1].tasks[0].deps.push_back("st_drink");  // st_offer <-> ... <- st_drink
  EXPECT_THROW(validate_scenario(script, butler().stubs), InvalidArgument);

  script = butler().script;
  script.stages[0].tasks[0].deps.push_back("bg_done");  // later stage
  EXPECT_THROW(validate_scenario(script, butler().stubs), InvalidArgument);

  script = butler().script;
  script.stages[2].tasks[0].id = "rc_wait";
  EXPECT_THROW(validate_scenario(script, butler().stubs), InvalidArgument);

  script = butler().script;
  script.stages[0].tasks[0].action.kind = "teleport";
  EXPECT_THROW(validate_scenario(script, butler().stubs), InvalidArgument);

  script = butler().script;
  script.stages[0].tasks[0].estimated_duration = -1.0;
  EXPECT_THROW(validate_scenario(script, butler().stubs), InvalidArgument);

  EXPECT_THROW(validate_scenario(ScenarioScript{}, {}), InvalidArgument);
}

TEST(Scenario, FailureHaltsAtStageBoundary) {
  auto stubs = butler().stubs;
  stubs.frames["hall_view_1"] = stubs.frames["hall_view_0"];  // nobody waves
  const auto out = run_scenario_detailed(butler().script, stubs, 2020);
  EXPECT_FALSE(out.completed);
  EXPECT_EQ(stages_entered(out.log), (std::vector<std::string>{"Reception", "Seat", "Dialog", "Taxi"}));
  EXPECT_GE(index_of(out.log, EventKind::error, "task", "tx_watch"), 0);
  // Every dependent of the failed task is skipped with its own error.
  for (const char* id : {"tx_approach", "tx_offer", "tx_phone", "tx_call", "tx_inform"}) {
    EXPECT_GE(index_of(out.log, EventKind::error, "task", id), 0) << id;
    EXPECT_LT(index_of(out.log, EventKind::task_started, "id", id), 0) << id;
  }
  EXPECT_EQ(out.log.count(EventKind::feedback), 0u);
  EXPECT_EQ(out.blackboard["perception/waving"]["value"], false);
}

TEST(Scenario, IndependentTasksInAFailedStageStillRun) {
  ScenarioScript script;
  script.name = "partial";
  Task bad{"a", "look", 1.0, 0, {}, {"find_object", {{"frame", "empty"}, {"label", "bag"}}}};
  Task after{"b", "after", 1.0, 0, {"a"}, {"wait", {}}};
  Task other{"c", "other", 2.0, 0, {}, {"say", {{"text", "still here"}}}};
  script.stages.push_back({"one", {bad, after, other}});
  script.stages.push_back({"two", {Task{"d", "never", 1.0, 0, {}, {"wait", {}}}}});
  ScenarioStubs stubs;
  stubs.frames["empty"] = generate_scene(3, SceneOptions{.labels = {"chair"}});
  const auto out = run_scenario_detailed(script, stubs, 0);
  EXPECT_FALSE(out.completed);
  EXPECT_GE(index_of(out.log, EventKind::task_finished, "id", "c"), 0);
  EXPECT_GE(index_of(out.log, EventKind::error, "task", "b"), 0);
  EXPECT_EQ(stages_entered(out.log), std::vector<std::string>{"one"});
}

TEST(ScenarioFile, ExportImportReproducesTheRun) {
  const auto doc = scenario_to_json(butler().script, butler().stubs);
  const auto back = scenario_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(scenario_to_json(back.script, back.stubs), doc);
  EXPECT_EQ(run_scenario(back.script, back.stubs, 2020).to_jsonl(),
            run_scenario(butler().script, butler().stubs, 2020).to_jsonl());
}

TEST(ScenarioFile, StubsMayReferenceFiles) {
  const auto dir = fs::temp_directory_path() / "butler_scenario_files";
  fs::remove_all(dir);
  fs::create_directories(dir / "frames");
  auto doc = scenario_to_json(butler().script, butler().stubs);
  save_frame(butler().stubs.frames.at("floor_view"), dir / "frames" / "floor.json");
  save_movement(butler().stubs.movements.at("take_bag"), dir / "take_bag.json");
  doc["stubs"]["frames"]["floor_view"] = "frames/floor.json";
  doc["stubs"]["movements"]["take_bag"] = "take_bag.json";
  std::ofstream(dir / "script.json") << doc.dump(1);
  const auto loaded = load_scenario(dir / "script.json");
  EXPECT_EQ(run_scenario(loaded.script, loaded.stubs, 2020).to_jsonl(),
            run_scenario(butler().script, butler().stubs, 2020).to_jsonl());

  doc["stubs"]["movements"]["take_bag"] = "missing.json";
  std::ofstream(dir / "script.json") << doc.dump(1);
  EXPECT_THROW(load_scenario(dir / "script.json"), IoError);
  fs::remove_all(dir);
}

TEST(ScenarioFile, MalformedScriptsAreRejected) {
  auto doc = scenario_to_json(butler().script, butler().stubs);
  auto no_stages = doc;
  no_stages.erase("stages");
  EXPECT_THROW(scenario_from_json(no_stages), FormatError);
  auto bad_task = doc;
  bad_task["stages"][0]["tasks"][0].erase("duration_s");
  EXPECT_THROW(scenario_from_json(bad_task), FormatError);
  auto renamed = doc;
  renamed["stubs"]["movements"]["other"] = renamed["stubs"]["movements"]["take_bag"];
  EXPECT_THROW(scenario_from_json(renamed), FormatError);
}

TEST(ScenarioFile, ShippedButlerScriptMatchesBuiltIn) {
  const fs::path path = fs::path(BUTLER_DATA_DIR) / "scenarios" / "butler.json";
  ASSERT_TRUE(fs::exists(path)) << path;
  const auto loaded = load_scenario(path);
  EXPECT_EQ(run_scenario(loaded.script, loaded.stubs, 2020).to_jsonl(),
            run_scenario(butler().script, butler().stubs, 2020).to_jsonl());
}

}  // namespace
}  // namespace butler
