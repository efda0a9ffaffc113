#include <gtest/gtest.h>

#include <atomic>
#include <thread>
#include <vector>

#include "butler/manager.hpp"
#include "butler/scenario.hpp"
#include "oracles.hpp"

namespace butler {
namespace {

Task make(std::string id, double duration, int priority = 0) {
  Task t;
  t.id = std::move(id);
  t.estimated_duration = duration;
  t.priority_class = priority;
  t.action.kind = "wait";
  return t;
}

TEST(Schedule, ShortestJobFirst) {
  const std::vector<Task> ready{make("A", 5.0), make("B", 2.0)};
  EXPECT_EQ(schedule_next(ready), 1u);
}

TEST(Schedule, PriorityClassDominatesDuration) {
  const std::vector<Task> ready{make("A", 2.0, 1), make("B", 1.0, 2)};
  EXPECT_EQ(schedule_next(ready), 0u);
}

TEST(Schedule, TieBreaksOnIdAndEmptyIsNone) {
  const std::vector<Task> ready{make("b", 1.0), make("a", 1.0), make("c", 1.0)};
  EXPECT_EQ(schedule_next(ready), 1u);
  EXPECT_FALSE(schedule_next(std::vector<Task>{}).has_value());
}

TEST(Schedule, MatchesExhaustiveOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<Task> ready;
    const int n = 1 + static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i)
      ready.push_back(make(std::string(1, static_cast<char>('a' + rng.below(4))) + std::to_string(i),
                           static_cast<double>(rng.below(4)), static_cast<int>(rng.below(3))));
    const auto pick = schedule_next(ready);
    ASSERT_TRUE(pick.has_value());
    EXPECT_EQ(*pick, oracle::brute_force_next(ready));
    std::vector<const Task*> ptrs;
    for (const auto& t : ready) ptrs.push_back(&t);
    EXPECT_EQ(schedule_next(std::span<const Task* const>(ptrs)), pick);
  }
}

TEST(Blackboard, ReadYourWriteAndLatestWins) {
  Blackboard bb;
  const auto t1 = bb.put("perception/waving", true);
  auto e = bb.get("perception/waving");
  ASSERT_TRUE(e.has_value());
  EXPECT_EQ(e->value, true);
  EXPECT_EQ(e->timestamp, t1);
  const auto t2 = bb.put("perception/waving", false);
  EXPECT_GT(t2, t1);
  EXPECT_EQ(bb.get("perception/waving")->value, false);
  EXPECT_FALSE(bb.get("absent").has_value());
  EXPECT_FALSE(bb.get("perception/absent").has_value());
}

TEST(Blackboard, KeysAreNamespaced) {
  Blackboard bb;
  EXPECT_THROW(bb.put("", 1), InvalidArgument);
  EXPECT_THROW(bb.put("waving", 1), InvalidArgument);
  EXPECT_THROW(bb.put("/waving", 1), InvalidArgument);
  EXPECT_THROW(bb.put("perception/", 1), InvalidArgument);
  EXPECT_NO_THROW(bb.put("guest/name", "Alex"));
  EXPECT_EQ(bb.keys(), std::vector<std::string>{"guest/name"});
  EXPECT_EQ(bb.snapshot()["guest/name"]["value"], "Alex");
}

TEST(Blackboard, TimestampsStrictlyIncreasePerKey) {
  Blackboard bb;
  Rng rng(2);
  std::map<std::string, std::uint64_t> last;
  for (int i = 0; i < 2000; ++i) {
    const std::string key = "m" + std::to_string(rng.below(3)) + "/k" + std::to_string(rng.below(5));
    const auto ts = bb.put(key, i);
    if (last.contains(key)) {
      EXPECT_GT(ts, last[key]);
    }
    last[key] = ts;
    EXPECT_EQ(bb.get(key)->value, i);
  }
}

TEST(Blackboard, ConcurrentReadersSeeCompleteValues) {
  Blackboard bb;
  bb.put("nav/pose", nlohmann::json{{"x", 0}, {"y", 0}});
  std::atomic<bool> stop{false};
  std::atomic<int> torn{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 3; ++r)
    readers.emplace_back([&] {
      while (!stop) {
        const auto e = bb.get("nav/pose");
        if (e->value["x"] != e->value["y"]) ++torn;
      }
    });
  for (int i = 1; i <= 2000; ++i) bb.put("nav/pose", nlohmann::json{{"x", i}, {"y", i}});
  stop = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(torn.load(), 0);
  EXPECT_EQ(bb.get("nav/pose")->value["x"], 2000);
}

TEST(EventLog, TicksNeverDecreaseAndJsonLines) {
  EventLog log;
  log.append(0, EventKind::stage_entered, {{"stage", "Reception"}});
  log.append(0, EventKind::task_started, {{"id", "a"}});
  log.append(1500, EventKind::task_finished, {{"id", "a"}});
  EXPECT_THROW(log.append(1000, EventKind::error, {}), InvalidArgument);
  EXPECT_EQ(log.size(), 3u);
  EXPECT_EQ(log.count(EventKind::task_started), 1u);
  EXPECT_EQ(log.to_jsonl(),
            "{\"kind\":\"stage_entered\",\"payload\":{\"stage\":\"Reception\"},\"tick\":0}\n"
            "{\"kind\":\"task_started\",\"payload\":{\"id\":\"a\"},\"tick\":0}\n"
            "{\"kind\":\"task_finished\",\"payload\":{\"id\":\"a\"},\"tick\":1500}\n");
}

TEST(RandomDags, NoViolationsAndOracleChoices) {
  Rng rng(2024);
  std::size_t started = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto script = oracle::random_dag_script(rng);
    const auto outcome = run_scenario_detailed(script, {}, static_cast<std::uint64_t>(trial));
    ASSERT_TRUE(outcome.completed) << "trial " << trial;
    const auto audit = oracle::audit_schedule(script, outcome.log);
    std::size_t total = 0;
    for (const auto& s : script.stages) total += s.tasks.size();
    EXPECT_EQ(audit.started, total);
    EXPECT_EQ(audit.dependency_violations, 0u) << "trial " << trial;
    EXPECT_EQ(audit.oracle_mismatches, 0u) << "trial " << trial;
    started += audit.started;
    for (std::size_t i = 1; i < outcome.log.events().size(); ++i)
      EXPECT_LE(outcome.log.events()[i - 1].tick, outcome.log.events()[i].tick);
  }
  EXPECT_GT(started, 3000u);
}

}  // namespace
}  // namespace butler
