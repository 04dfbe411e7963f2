// Copyright 2026 The Funky Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>

#include "funky/orchestrator/scheduler.hpp"
#include "support/scheduler_oracle.hpp"
#include "support/scheduler_states.hpp"

namespace funky::orchestrator {
namespace {

using namespace decision;

TaskRecord task(const std::string& id, std::int64_t prio, std::int64_t submit = 0, bool preemptible = true) {
  TaskRecord t;
  t.task_id = TaskId(id);
  t.priority = prio;
  t.submit_time = SimTime{submit};
  t.preemptible = preemptible;
  return t;
}

SchedulerState cluster(Policy p, std::vector<std::uint32_t> slots) {
  SchedulerState s;
  s.policy = p;
  for (std::size_t i = 0; i < slots.size(); ++i) s.add_node(NodeId("n" + std::to_string(i)), slots[i]);
  return s;
}

void run_until_idle(SchedulerState& s) {
  for (int i = 0; i < 100; ++i) {
    auto ds = schedule_step(s);
    if (ds.empty()) return;
    for (const auto& d : ds) apply(s, d);
    check_invariants(s);
  }
  FAIL() << "scheduler did not settle";
}

TEST(Policy, NamesRoundTrip) {
  for (auto p : kAllPolicies) EXPECT_EQ(policy_from_string(to_string(p)), p);
  EXPECT_EQ(policy_from_string("pre_mg"), Policy::PRE_MG);
  EXPECT_EQ(policy_from_string("Fcfs"), Policy::FCFS);
  EXPECT_THROW(policy_from_string("lottery"), Error);
  EXPECT_FALSE(permits_eviction(Policy::NO_PRE));
  EXPECT_TRUE(permits_eviction(Policy::PRE_EV));
  EXPECT_FALSE(permits_migration(Policy::PRE_EV));
}

TEST(WaitQueue, OrderAndFcfsBlindness) {
  auto s = cluster(Policy::PRE_MG, {1});
  s.submit(task("b", 1, 5));
  s.submit(task("a", 1, 5));
  s.submit(task("hi", 9, 7));
  s.submit(task("old", 0, 1));
  EXPECT_EQ(wait_queue(s), (std::vector<TaskId>{TaskId("hi"), TaskId("a"), TaskId("b"), TaskId("old")}));
  s.policy = Policy::FCFS;
  EXPECT_EQ(wait_queue(s), (std::vector<TaskId>{TaskId("old"), TaskId("a"), TaskId("b"), TaskId("hi")}));
  EXPECT_THROW(s.submit(task("a", 0)), Error);
}

TEST(ScheduleStep, DeploysOnRoomiestNode) {
  auto s = cluster(Policy::NO_PRE, {1, 3, 2});
  s.submit(task("t", 0));
  EXPECT_EQ(schedule_step(s), (std::vector<SchedulingDecision>{Deploy{TaskId("t"), NodeId("n1")}}));
}

TEST(ScheduleStep, TiesGoToSmallestNode) {
  auto s = cluster(Policy::NO_PRE, {2, 2});
  s.submit(task("t", 0));
  EXPECT_EQ(schedule_step(s), (std::vector<SchedulingDecision>{Deploy{TaskId("t"), NodeId("n0")}}));
}

TEST(ScheduleStep, PreemptsLowestPriorityVictim) {
  auto s = cluster(Policy::PRE_EV, {1, 1});
  s.submit(task("lo1", 1));
  s.submit(task("lo0", 0, 1));
  run_until_idle(s);
  s.submit(task("hi", 5, 2));
  auto ds = schedule_step(s);
  auto lo0_node = *s.tasks.at(TaskId("lo0")).node;
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[0], SchedulingDecision(Evict{TaskId("lo0"), lo0_node}));
  EXPECT_EQ(ds[1], SchedulingDecision(Deploy{TaskId("hi"), lo0_node}));
}

TEST(ScheduleStep, NoPreemptionWithoutPermission) {
  for (auto p : {Policy::FCFS, Policy::NO_PRE}) {
    auto s = cluster(p, {1});
    s.submit(task("lo", 0));
    run_until_idle(s);
    s.submit(task("hi", 5, 1));
    EXPECT_TRUE(schedule_step(s).empty());
  }
}

TEST(ScheduleStep, NonPreemptibleAndEqualPriorityAreSafe) {
  auto s = cluster(Policy::PRE_MG, {1, 1});
  s.submit(task("np", 0, 0, false));
  s.submit(task("eq", 5, 1));
  run_until_idle(s);
  s.submit(task("hi", 5, 2));
  EXPECT_TRUE(schedule_step(s).empty());
}

TEST(SelectVictim, TiesGoToLatestDeployThenId) {
  auto s = cluster(Policy::PRE_EV, {3});
  s.submit(task("a", 0));
  s.submit(task("b", 0));
  s.submit(task("c", 0));
  s.now = SimTime{1};
  apply(s, Deploy{TaskId("a"), NodeId("n0")});
  s.now = SimTime{2};
  apply(s, Deploy{TaskId("c"), NodeId("n0")});
  apply(s, Deploy{TaskId("b"), NodeId("n0")});
  EXPECT_EQ(select_victim(s.cluster.at(NodeId("n0")), 1, s), TaskId("b"));
  EXPECT_EQ(select_victim(s.cluster.at(NodeId("n0")), 0, s), std::nullopt);
}

TEST(SelectVictim, AntiThrashWindow) {
  auto s = cluster(Policy::PRE_EV, {1});
  s.anti_thrash = Duration{100};
  s.submit(task("lo", 0));
  run_until_idle(s);
  s.tasks.at(TaskId("lo")).last_evicted = SimTime{0};
  s.now = SimTime{50};
  EXPECT_EQ(select_victim(s.cluster.at(NodeId("n0")), 5, s), std::nullopt);
  s.now = SimTime{100};
  EXPECT_EQ(select_victim(s.cluster.at(NodeId("n0")), 5, s), TaskId("lo"));
}

TEST(ScheduleStep, EvictedTaskPrefersContextNodeThenMigrates) {
  auto s = cluster(Policy::PRE_MG, {1, 2});
  s.submit(task("lo", 0));
  apply(s, Deploy{TaskId("lo"), NodeId("n0")});
  s.submit(task("hi", 5, 1));
  apply(s, Evict{TaskId("lo"), NodeId("n0")});
  apply(s, Deploy{TaskId("hi"), NodeId("n0")});
  // n0 is full; PRE_MG migrates to n1.
  EXPECT_EQ(schedule_step(s),
            (std::vector<SchedulingDecision>{Migrate{TaskId("lo"), NodeId("n0"), NodeId("n1")}}));
  // PRE_EV must wait for its context node.
  s.policy = Policy::PRE_EV;
  EXPECT_TRUE(schedule_step(s).empty());
  finish(s, TaskId("hi"), TaskState::Completed);
  EXPECT_EQ(schedule_step(s), (std::vector<SchedulingDecision>{Resume{TaskId("lo"), NodeId("n0")}}));
}

TEST(ScheduleStep, PinnedTaskOnlyLandsOnPin) {
  auto s = cluster(Policy::PRE_MG, {1, 4});
  auto t = task("p", 0);
  t.pinned = NodeId("n0");
  s.submit(t);
  EXPECT_EQ(schedule_step(s), (std::vector<SchedulingDecision>{Deploy{TaskId("p"), NodeId("n0")}}));
}

TEST(ScheduleStep, HeldTasksAreSkipped) {
  auto s = cluster(Policy::PRE_MG, {1});
  s.submit(task("t", 0));
  run_until_idle(s);
  apply(s, Evict{TaskId("t"), NodeId("n0")});
  s.tasks.at(TaskId("t")).held = true;
  EXPECT_TRUE(schedule_step(s).empty());
  apply(s, Resume{TaskId("t"), NodeId("n0")});
  EXPECT_FALSE(s.tasks.at(TaskId("t")).held);
}

TEST(ScheduleStep, BlockedHeadDoesNotStarveOthers) {
  auto s = cluster(Policy::PRE_MG, {1, 1});
  auto p = task("pinned", 9);
  p.pinned = NodeId("n0");
  s.submit(task("np", 9, 0, false));
  apply(s, Deploy{TaskId("np"), NodeId("n0")});
  s.submit(p);
  s.submit(task("other", 0, 1));
  EXPECT_EQ(schedule_step(s), (std::vector<SchedulingDecision>{Deploy{TaskId("other"), NodeId("n1")}}));
}

TEST(Apply, RejectsIllegalDecisions) {
  auto s = cluster(Policy::PRE_MG, {1, 1});
  s.submit(task("a", 0));
  s.submit(task("b", 0));
  apply(s, Deploy{TaskId("a"), NodeId("n0")});
  EXPECT_THROW(apply(s, Deploy{TaskId("b"), NodeId("n0")}), Error);  // double booking
  EXPECT_THROW(apply(s, Deploy{TaskId("a"), NodeId("n1")}), Error);  // not waiting
  EXPECT_THROW(apply(s, Resume{TaskId("b"), NodeId("n1")}), Error);
  EXPECT_THROW(apply(s, Evict{TaskId("a"), NodeId("n1")}), Error);    // wrong node
  EXPECT_THROW(apply(s, Deploy{TaskId("b"), NodeId("n9")}), Error);   // unknown node
  EXPECT_THROW(apply(s, Deploy{TaskId("zz"), NodeId("n1")}), Error);  // unknown task
  apply(s, Evict{TaskId("a"), NodeId("n0")});
  EXPECT_THROW(apply(s, Migrate{TaskId("a"), NodeId("n0"), NodeId("n0")}), Error);
  EXPECT_THROW(apply(s, Migrate{TaskId("a"), NodeId("n1"), NodeId("n0")}), Error);
  apply(s, Migrate{TaskId("a"), NodeId("n0"), NodeId("n1")});
  EXPECT_EQ(s.tasks.at(TaskId("a")).node, NodeId("n1"));
  check_invariants(s);
  EXPECT_NO_THROW(finish(s, TaskId("a"), TaskState::Completed));
  EXPECT_THROW(finish(s, TaskId("a"), TaskState::Failed), Error);
  EXPECT_THROW(finish(s, TaskId("b"), TaskState::Running), Error);
}

TEST(Invariants, DetectCorruption) {
  auto s = cluster(Policy::PRE_MG, {1});
  s.submit(task("a", 0));
  s.submit(task("b", 0));
  apply(s, Deploy{TaskId("a"), NodeId("n0")});
  check_invariants(s);
  auto over = s;
  over.cluster.at(NodeId("n0")).running.push_back(TaskId("b"));
  EXPECT_THROW(check_invariants(over), Error);
  auto ghost = s;
  ghost.tasks.at(TaskId("a")).state = TaskState::Waiting;
  EXPECT_THROW(check_invariants(ghost), Error);
  auto floating = s;
  floating.tasks.at(TaskId("b")).state = TaskState::Running;
  EXPECT_THROW(check_invariants(floating), Error);
}

TEST(Liveness, EveryTaskEventuallyRuns) {
  std::mt19937_64 rng(5);
  for (auto p : kAllPolicies)
    for (int round = 0; round < 50; ++round) {
      auto s = cluster(p, {1, 2});
      std::size_t n = 2 + rng() % 6;
      for (std::size_t i = 0; i < n; ++i)
        s.submit(task("t" + std::to_string(i), static_cast<std::int64_t>(rng() % 4), static_cast<std::int64_t>(i)));
      std::set<TaskId> ran;
      for (int it = 0; it < 500; ++it) {
        auto ds = schedule_step(s);
        for (const auto& d : ds) apply(s, d);
        check_invariants(s);
        for (const auto& [id, t] : s.tasks)
          if (t.state == TaskState::Running) ran.insert(id);
        if (ds.empty()) {
          // Complete the oldest running task.
          std::optional<TaskId> done;
          for (const auto& [id, t] : s.tasks)
            if (t.state == TaskState::Running && (!done || t.deploy_time < s.tasks.at(*done).deploy_time)) done = id;
          if (!done) break;
          finish(s, *done, TaskState::Completed);
        }
        s.now += Duration{1};
      }
      EXPECT_EQ(ran.size(), n) << to_string(p);
    }
}

TEST(Oracle, SmallStateSpaceAgrees) {
  testing::SmallStateSpace space;
  space.slot_counts = {1};
  space.priorities = {0, 1};
  space.submit_times = {0};
  space.vary_deploy_time = false;
  for (auto p : kAllPolicies) {
    std::size_t mismatches = 0;
    auto n = testing::for_each_small_state(space, p, [&](const SchedulerState& s) {
      if (schedule_step(s) != testing::oracle_schedule_step(s)) ++mismatches;
    });
    EXPECT_GT(n, 1000u);
    EXPECT_EQ(mismatches, 0u) << to_string(p);
  }
}

TEST(Oracle, RandomStatesWithPinsHoldsAndAntiThrash) {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 3000; ++round) {
    auto s = cluster(kAllPolicies[rng() % 4], {1 + static_cast<std::uint32_t>(rng() % 2), 1, 2});
    s.anti_thrash = Duration{static_cast<std::int64_t>(rng() % 3) * 5};
    s.now = SimTime{10};
    for (int i = 0; i < 5; ++i) {
      auto t = task("t" + std::to_string(i), static_cast<std::int64_t>(rng() % 3), static_cast<std::int64_t>(rng() % 3),
                    rng() % 4 != 0);
      if (rng() % 5 == 0) t.pinned = NodeId("n" + std::to_string(rng() % 3));
      s.submit(t);
    }
    // Random legal history.
    for (int k = 0; k < 8; ++k) {
      s.now += Duration{static_cast<std::int64_t>(rng() % 3)};
      auto ds = testing::oracle_schedule_step(s);
      if (ds.empty()) break;
      for (const auto& d : ds) apply(s, d);
      if (rng() % 3 == 0)
        for (auto& [id, t] : s.tasks)
          if (t.state == TaskState::Running && rng() % 2) {
            finish(s, id, TaskState::Completed);
            break;
          }
      for (auto& [id, t] : s.tasks) {
        if (t.state == TaskState::Evicted && rng() % 4 == 0) t.held = true;
        if (t.last_evicted && rng() % 2) t.last_evicted = SimTime{static_cast<std::int64_t>(rng() % 11)};
      }
      ASSERT_EQ(schedule_step(s), testing::oracle_schedule_step(s));
    }
  }
}

}  // namespace
}  // namespace funky::orchestrator
