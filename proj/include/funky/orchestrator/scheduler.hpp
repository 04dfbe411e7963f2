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

#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "funky/common.hpp"

namespace funky::orchestrator {

enum class Policy { FCFS, NO_PRE, PRE_EV, PRE_MG };
std::string_view to_string(Policy p);
// fcfs | no_pre | pre_ev | pre_mg (case-insensitive). Throws ParseError.
Policy policy_from_string(std::string_view s);
inline constexpr Policy kAllPolicies[] = {Policy::FCFS, Policy::NO_PRE, Policy::PRE_EV, Policy::PRE_MG};

constexpr bool permits_eviction(Policy p) { return p == Policy::PRE_EV || p == Policy::PRE_MG; }
constexpr bool permits_migration(Policy p) { return p == Policy::PRE_MG; }

enum class TaskState { Waiting, Running, Evicted, Completed, Failed };
std::string_view to_string(TaskState s);

struct TaskRecord {
  TaskId task_id;
  std::int64_t priority = 0;
  bool preemptible = true;
  TaskState state = TaskState::Waiting;
  std::optional<NodeId> node;          // while Running
  std::optional<NodeId> context_node;  // while Evicted
  SimTime submit_time{0};
  SimTime deploy_time{0};
  std::optional<SimTime> last_evicted;
  std::uint32_t vfpga_num = 1;
  std::optional<NodeId> pinned;  // funky.node_id annotation
  bool held = false;             // evicted by request; skipped until resumed explicitly
};

struct NodeInfo {
  NodeId node_id;
  std::uint32_t slots = 1;
  std::vector<TaskId> running;
  std::uint32_t free_slots() const { return slots - static_cast<std::uint32_t>(running.size()); }
};

struct SchedulerState {
  std::map<TaskId, TaskRecord> tasks;
  std::map<NodeId, NodeInfo> cluster;
  Policy policy = Policy::PRE_MG;
  SimTime now{0};
  Duration anti_thrash{0};  // a task evicted within this window is not a victim again

  void add_node(NodeId id, std::uint32_t slots);
  // Throws TaskExists.
  void submit(TaskRecord t);
};

namespace decision {
struct Deploy {
  TaskId task;
  NodeId node;
  friend bool operator==(const Deploy&, const Deploy&) = default;
};
struct Resume {
  TaskId task;
  NodeId node;
  friend bool operator==(const Resume&, const Resume&) = default;
};
struct Migrate {
  TaskId task;
  NodeId from;
  NodeId to;
  friend bool operator==(const Migrate&, const Migrate&) = default;
};
struct Evict {
  TaskId task;
  NodeId node;
  friend bool operator==(const Evict&, const Evict&) = default;
};
}  // namespace decision
using SchedulingDecision = std::variant<decision::Deploy, decision::Resume, decision::Migrate, decision::Evict>;
std::string describe(const SchedulingDecision& d);

// Waiting and Evicted tasks that are not held, in scheduling order: priority desc, submit asc,
// task_id asc. FCFS drops the priority key.
std::vector<TaskId> wait_queue(const SchedulerState& s);

// Preference: the context node if it has a free slot; the node with most
// free slots; when the policy evicts, the node whose lowest-priority
// preemptible task is below the task's priority (lowest such priority
// first). Smallest node_id breaks ties. An evicted task may only land on its
// context node unless the policy migrates; a pinned task only on its pin.
std::optional<NodeId> select_node(const TaskRecord& task, const SchedulerState& s);

// Lowest-priority preemptible Running task on `node` with priority below
// `incoming`; ties go to the latest deploy, then the smallest task_id.
std::optional<TaskId> select_victim(const NodeInfo& node, std::int64_t incoming, const SchedulerState& s);

// Decisions for the first task in the wait queue that has a legal action:
// [Deploy], [Resume], [Migrate] or [Evict, then one of those]. Empty when no
// waiting task can be placed. Pure.
std::vector<SchedulingDecision> schedule_step(const SchedulerState& s);

// Applies one decision. Throws InvalidState if it is not legal in `s`
// (double-booked slot, wrong task state, ...).
void apply(SchedulerState& s, const SchedulingDecision& d);
// A Running task finished (Completed) or died (Failed); frees its slot.
void finish(SchedulerState& s, const TaskId& t, TaskState terminal);
// Structural invariants (slot accounting, node/state agreement).
// Throws InvalidState naming the first violation.
void check_invariants(const SchedulerState& s);

}  // namespace funky::orchestrator
