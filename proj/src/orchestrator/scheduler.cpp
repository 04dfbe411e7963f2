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

#include "funky/orchestrator/scheduler.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>

namespace funky::orchestrator {

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::FCFS: return "fcfs";
    case Policy::NO_PRE: return "no_pre";
    case Policy::PRE_EV: return "pre_ev";
    case Policy::PRE_MG: return "pre_mg";
  }
  return "?";
}

Policy policy_from_string(std::string_view s) {
  std::string low(s);
  std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto p : kAllPolicies)
    if (to_string(p) == low) return p;
  fail(Errc::ParseError, "unknown policy '" + std::string(s) + "' (fcfs, no_pre, pre_ev, pre_mg)");
}

std::string_view to_string(TaskState s) {
  switch (s) {
    case TaskState::Waiting: return "Waiting";
    case TaskState::Running: return "Running";
    case TaskState::Evicted: return "Evicted";
    case TaskState::Completed: return "Completed";
    case TaskState::Failed: return "Failed";
  }
  return "?";
}

void SchedulerState::add_node(NodeId id, std::uint32_t slots) {
  if (slots == 0) fail(Errc::InvalidConfig, "node " + id.str() + " needs at least one slot");
  auto& n = cluster[id];
  n.node_id = std::move(id);
  n.slots = slots;
}

void SchedulerState::submit(TaskRecord t) {
  if (tasks.contains(t.task_id)) fail(Errc::TaskExists, t.task_id.str() + " already submitted");
  auto id = t.task_id;
  tasks.emplace(std::move(id), std::move(t));
}

std::string describe(const SchedulingDecision& d) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, decision::Deploy>) return "deploy " + x.task.str() + " on " + x.node.str();
        if constexpr (std::is_same_v<T, decision::Resume>) return "resume " + x.task.str() + " on " + x.node.str();
        if constexpr (std::is_same_v<T, decision::Migrate>)
          return "migrate " + x.task.str() + " " + x.from.str() + "->" + x.to.str();
        if constexpr (std::is_same_v<T, decision::Evict>) return "evict " + x.task.str() + " on " + x.node.str();
      },
      d);
}

std::vector<TaskId> wait_queue(const SchedulerState& s) {
  std::vector<const TaskRecord*> q;
  for (const auto& [id, t] : s.tasks)
    if (!t.held && (t.state == TaskState::Waiting || t.state == TaskState::Evicted)) q.push_back(&t);
  const bool blind = s.policy == Policy::FCFS;
  std::sort(q.begin(), q.end(), [blind](const TaskRecord* a, const TaskRecord* b) {
    auto pa = blind ? 0 : a->priority;
    auto pb = blind ? 0 : b->priority;
    return std::tie(pb, a->submit_time, a->task_id) < std::tie(pa, b->submit_time, b->task_id);
  });
  std::vector<TaskId> out;
  out.reserve(q.size());
  for (const auto* t : q) out.push_back(t->task_id);
  return out;
}

std::optional<TaskId> select_victim(const NodeInfo& node, std::int64_t incoming, const SchedulerState& s) {
  const TaskRecord* best = nullptr;
  for (const auto& id : node.running) {
    auto it = s.tasks.find(id);
    if (it == s.tasks.end()) continue;
    const auto& t = it->second;
    if (t.state != TaskState::Running || !t.preemptible || t.priority >= incoming) continue;
    if (s.anti_thrash.count() > 0 && t.last_evicted && s.now - *t.last_evicted < s.anti_thrash) continue;
    if (!best || std::tie(t.priority, best->deploy_time, t.task_id) < std::tie(best->priority, t.deploy_time, best->task_id))
      best = &t;
  }
  if (!best) return std::nullopt;
  return best->task_id;
}

std::optional<NodeId> select_node(const TaskRecord& task, const SchedulerState& s) {
  const bool evicted = task.state == TaskState::Evicted;
  if (evicted && task.context_node && (!task.pinned || *task.pinned == *task.context_node)) {
    auto it = s.cluster.find(*task.context_node);
    if (it != s.cluster.end() && it->second.free_slots() > 0) return it->first;
  }
  auto candidate = [&](const NodeInfo& n) {
    if (task.pinned && n.node_id != *task.pinned) return false;
    return !evicted || permits_migration(s.policy) || (task.context_node && n.node_id == *task.context_node);
  };
  const NodeInfo* roomiest = nullptr;
  for (const auto& [id, n] : s.cluster)
    if (candidate(n) && n.free_slots() > 0 && (!roomiest || n.free_slots() > roomiest->free_slots())) roomiest = &n;
  if (roomiest) return roomiest->node_id;
  if (!permits_eviction(s.policy)) return std::nullopt;
  const NodeInfo* pick = nullptr;
  std::int64_t pick_prio = 0;
  for (const auto& [id, n] : s.cluster) {
    if (!candidate(n)) continue;
    auto v = select_victim(n, task.priority, s);
    if (!v) continue;
    auto p = s.tasks.at(*v).priority;
    if (!pick || p < pick_prio) {
      pick = &n;
      pick_prio = p;
    }
  }
  if (!pick) return std::nullopt;
  return pick->node_id;
}

namespace {

SchedulingDecision placement(const TaskRecord& t, const NodeId& node) {
  if (t.state == TaskState::Waiting) return decision::Deploy{t.task_id, node};
  if (t.context_node && *t.context_node == node) return decision::Resume{t.task_id, node};
  return decision::Migrate{t.task_id, t.context_node.value_or(node), node};
}

TaskRecord& task_in(SchedulerState& s, const TaskId& id) {
  auto it = s.tasks.find(id);
  if (it == s.tasks.end()) fail(Errc::UnknownTask, "unknown task " + id.str());
  return it->second;
}

NodeInfo& node_in(SchedulerState& s, const NodeId& id) {
  auto it = s.cluster.find(id);
  if (it == s.cluster.end()) fail(Errc::InvalidState, "unknown node " + id.str());
  return it->second;
}

void occupy(SchedulerState& s, TaskRecord& t, const NodeId& node) {
  auto& n = node_in(s, node);
  if (n.free_slots() == 0) fail(Errc::InvalidState, "no free slot on " + node.str() + " for " + t.task_id.str());
  n.running.push_back(t.task_id);
  t.state = TaskState::Running;
  t.node = node;
  t.context_node.reset();
  t.held = false;
  t.deploy_time = s.now;
}

void vacate(SchedulerState& s, TaskRecord& t) {
  auto& n = node_in(s, *t.node);
  n.running.erase(std::remove(n.running.begin(), n.running.end(), t.task_id), n.running.end());
  t.node.reset();
}

[[noreturn]] void illegal(const SchedulingDecision& d, const TaskRecord& t) {
  fail(Errc::InvalidState, "illegal decision '" + describe(d) + "': task is " + std::string(to_string(t.state)));
}

}  // namespace

std::vector<SchedulingDecision> schedule_step(const SchedulerState& s) {
  for (const auto& id : wait_queue(s)) {
    const auto& t = s.tasks.at(id);
    auto node = select_node(t, s);
    if (!node) continue;
    const auto& n = s.cluster.at(*node);
    if (n.free_slots() > 0) return {placement(t, *node)};
    auto victim = select_victim(n, t.priority, s);
    if (!victim) continue;
    return {decision::Evict{*victim, *node}, placement(t, *node)};
  }
  return {};
}

void apply(SchedulerState& s, const SchedulingDecision& d) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        auto& t = task_in(s, x.task);
        if constexpr (std::is_same_v<T, decision::Deploy>) {
          if (t.state != TaskState::Waiting) illegal(d, t);
          occupy(s, t, x.node);
        } else if constexpr (std::is_same_v<T, decision::Resume>) {
          if (t.state != TaskState::Evicted || t.context_node != x.node) illegal(d, t);
          occupy(s, t, x.node);
        } else if constexpr (std::is_same_v<T, decision::Migrate>) {
          if (t.state != TaskState::Evicted || t.context_node != x.from || x.from == x.to) illegal(d, t);
          occupy(s, t, x.to);
        } else {
          if (t.state != TaskState::Running || t.node != x.node || !t.preemptible) illegal(d, t);
          vacate(s, t);
          t.state = TaskState::Evicted;
          t.context_node = x.node;
          t.last_evicted = s.now;
        }
      },
      d);
}

void finish(SchedulerState& s, const TaskId& id, TaskState terminal) {
  if (terminal != TaskState::Completed && terminal != TaskState::Failed)
    fail(Errc::InvalidState, "finish needs a terminal state");
  auto& t = task_in(s, id);
  if (t.state == TaskState::Completed || t.state == TaskState::Failed)
    fail(Errc::InvalidState, id.str() + " already finished");
  if (t.state == TaskState::Running) vacate(s, t);
  t.context_node.reset();
  t.state = terminal;
}

void check_invariants(const SchedulerState& s) {
  std::map<TaskId, int> seen;
  for (const auto& [nid, n] : s.cluster) {
    if (n.running.size() > n.slots) fail(Errc::InvalidState, nid.str() + " is over-booked");
    for (const auto& id : n.running) {
      auto it = s.tasks.find(id);
      if (it == s.tasks.end()) fail(Errc::InvalidState, nid.str() + " runs unknown task " + id.str());
      if (it->second.state != TaskState::Running || it->second.node != nid)
        fail(Errc::InvalidState, id.str() + " listed on " + nid.str() + " but not running there");
      if (++seen[id] > 1) fail(Errc::InvalidState, id.str() + " holds two slots");
    }
  }
  for (const auto& [id, t] : s.tasks) {
    if (t.state == TaskState::Running && !seen.contains(id))
      fail(Errc::InvalidState, id.str() + " is Running without a slot");
    if (t.state == TaskState::Evicted && !t.context_node)
      fail(Errc::InvalidState, id.str() + " is Evicted without a context node");
  }
}

}  // namespace funky::orchestrator
