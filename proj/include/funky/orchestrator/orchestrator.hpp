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

#include <atomic>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "funky/config.hpp"
#include "funky/orchestrator/scheduler.hpp"
#include "funky/runtime/node.hpp"

namespace funky::orchestrator {

using runtime::json;

struct DeployRequest {
  TaskId task;
  std::int64_t priority = 0;
  runtime::Annotations annotations;
  // Forwarded to create: program_ref or program, and optional split.
  json program = json::object();

  // {task_id, priority, annotations, program_ref | program, split}.
  static DeployRequest from_json(const json& args);
};

struct SnapshotRecord {
  SimTime at{0};  // timer instant the snapshot belongs to
  std::string path;
  NodeId node;
};

struct CheckpointTimer {
  Duration interval{0};
  SimTime next_due{0};
  std::vector<SnapshotRecord> history;
};

struct OrchestratorConfig {
  Policy policy = Policy::PRE_MG;
  Duration anti_thrash{0};
  std::optional<runtime::Endpoint> listen;
  std::map<std::string, runtime::Endpoint> nodes;  // static membership
  std::map<std::string, std::uint32_t> slots;  // missing nodes get one
  Duration tick{1'000'000};

  // Keys: scheduler.policy, scheduler.anti_thrash_s, orchestrator.listen,
  // orchestrator.tick_ms, cluster.<node_id> = host:port and
  // cluster.<node_id>.slots.
  static OrchestratorConfig from_config(const KvConfig& cfg);
};

// Cluster-level services over node runtimes. Scheduling decisions come from
// schedule_step and are executed as runtime commands; the scheduler state is
// only updated for commands that succeeded.
class Orchestrator {
 public:
  explicit Orchestrator(runtime::PeerDirectory& nodes, Policy policy = Policy::PRE_MG, Duration anti_thrash = {});

  void add_node(const NodeId& node, std::uint32_t slots);
  SchedulerState state() const;
  std::vector<std::string> decision_log() const;

  // Submits and schedules. Throws TaskExists.
  json deploy(const DeployRequest& req);
  // Runs schedule_step until it yields nothing and executes each decision.
  std::vector<SchedulingDecision> schedule();

  // Explicit services. All throw UnknownTask; the Funky ones throw
  // NotPreemptible for tasks deployed with funky.preemptible=false.
  json evict(const TaskId& t);
  json resume(const TaskId& t);
  json migrate(const TaskId& t, const NodeId& dest);
  json checkpoint(const TaskId& t, const std::string& path);
  json restore(const TaskId& t, const std::string& path, std::optional<NodeId> node = std::nullopt);
  json replicate(const TaskId& t, const NodeId& dest, std::optional<TaskId> replica = std::nullopt);
  json scale(const TaskId& t, std::uint32_t vfpga_num);
  void periodic_checkpoint(const TaskId& t, Duration interval);
  const CheckpointTimer* timer(const TaskId& t) const;

  // Drives a Running task's guest on its node.
  json run(const TaskId& t, std::optional<double> until_ms = std::nullopt);
  json step(const TaskId& t, std::size_t steps);

  // Advances orchestrator time, taking due periodic checkpoints.
  std::vector<json> tick(SimTime now);
  // The task failed at `now`: restore from the latest snapshot taken at or
  // before `now`, or mark it Failed when there is none.
  json on_failure(const TaskId& t, SimTime now);
  // Polls nodes: finished tasks are released, faulted or vanished tasks go
  // through on_failure.
  json poll();

  json status() const;
  json task_status(const TaskId& t) const;
  // Wire entry point; never throws.
  json handle(const json& request);
  // Called for heartbeats from unknown nodes.
  std::function<void(const std::string& node, const runtime::Endpoint& ep)> on_join;

 private:
  json node_call(const NodeId& node, const std::string& verb, const TaskId* task, json args = json::object());
  void execute(const SchedulingDecision& d);
  TaskRecord& record(const TaskId& t);
  void need_preemptible(const TaskRecord& r, std::string_view verb) const;
  json record_json(const TaskRecord& r) const;
  json dispatch(const std::string& verb, const json& args);

  runtime::PeerDirectory& nodes_;
  SchedulerState state_;
  std::map<TaskId, DeployRequest> specs_;
  std::map<TaskId, CheckpointTimer> timers_;
  std::vector<std::string> log_;
  std::uint64_t seq_ = 0;
  mutable std::recursive_mutex mu_;
};

// Live-mode orchestrator: JsonServer front end, TCP node directory filled
// from config and heartbeats, and a timer thread for tick/poll.
class OrchestratorDaemon {
 public:
  explicit OrchestratorDaemon(OrchestratorConfig cfg);
  ~OrchestratorDaemon();

  void start();
  void stop();
  const runtime::Endpoint& endpoint() const { return server_->endpoint(); }
  Orchestrator& orchestrator() { return orch_; }
  std::uint64_t heartbeats() const { return heartbeats_; }

 private:
  void timer_loop();

  OrchestratorConfig cfg_;
  runtime::TcpPeers peers_;
  Orchestrator orch_;
  std::unique_ptr<runtime::JsonServer> server_;
  std::thread timer_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> heartbeats_{0};
  std::mutex timer_mu_;
  std::condition_variable timer_cv_;
  std::chrono::steady_clock::time_point started_;
};

}  // namespace funky::orchestrator
