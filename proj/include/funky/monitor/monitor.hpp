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

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "funky/fpga/device.hpp"
#include "funky/guest/guest.hpp"
#include "funky/monitor/context.hpp"
#include "funky/monitor/costs.hpp"
#include "funky/protocol/validate.hpp"

namespace funky::monitor {

enum class Phase { Running, Synchronizing, Evicted, CheckpointingSaved, Terminated };
std::string_view to_string(Phase p);

struct IsolationFaultRecord {
  protocol::ReqId req_id = 0;
  protocol::ViolationKind kind = protocol::ViolationKind::UnknownBuffer;
  std::string detail;
};

struct MonitorEvent {
  SimTime at{0};
  std::string what;  // dispatch, complete, fault, init, exit, evict, resume, checkpoint, restore
  protocol::ReqId req_id = 0;
  std::string detail;
};

// One request on the worker timeline.
struct ScheduledRequest {
  protocol::ReqId id = 0;
  std::string kind;
  SimTime prep_start{0};
  SimTime start{0};  // device issue
  SimTime end{0};
  bool dispatched = false;
};

struct EvictReport {
  FpgaContext context;
  Duration sync_wait{0};
  Duration transfer{0};  // d2h of dirty buffers
};

struct ResumeReport {
  Duration resume{0};  // worker spawn + h2d of sync and dirty buffers
  Duration reconfig{0};
  Duration total() const { return resume + reconfig; }
};

struct CheckpointReport {
  Snapshot snapshot;
  std::filesystem::path path;
  Duration evict{0};
  Duration persist{0};
  std::optional<ResumeReport> resumed;
  Duration duration() const { return evict + persist; }
};

struct RunResult {
  std::size_t steps = 0;
  bool done = false;
  bool blocked = false;
};

// Host-side monitor of one task. The worker half services the guest's queue
// against the device on a simulated timeline; the monitor half implements the
// state commands. Time only moves through run(), advance_to() and the state
// commands, so everything is deterministic.
class MonitorInstance : public guest::GuestEnv {
 public:
  MonitorInstance(TaskId task, fpga::FpgaDevice& device, StateCosts costs = {}, SimTime now = SimTime{0});

  // Fresh guest.
  void boot(const guest::TaskProgram& program);
  // Rebuild from a snapshot and resume its FPGA state on `device`. Charges the
  // snapshot load time. Throws SnapshotCorrupt, NoFreeSlot.
  static MonitorInstance restore(const Snapshot& snap, fpga::FpgaDevice& device, StateCosts costs = {},
                                 SimTime now = SimTime{0}, ResumeReport* report = nullptr);

  const TaskId& task_id() const { return task_; }
  Phase phase() const { return phase_; }
  SimTime now() const { return now_; }
  const guest::GuestState& guest() const { return guest_; }
  const std::optional<protocol::VFpgaHandle>& handle() const { return guest_.handle; }
  fpga::FpgaDevice& device() const { return *device_; }
  // Move a task that holds no vFPGA to another device. Throws InvalidState.
  void rebind(fpga::FpgaDevice& device);
  const StateCosts& costs() const { return costs_; }
  bool completed() const { return completed_; }
  const std::optional<IsolationFaultRecord>& fault() const { return fault_; }
  const std::optional<FpgaContext>& retained_context() const { return context_; }
  const std::vector<MonitorEvent>& events() const { return events_; }
  const std::deque<ScheduledRequest>& schedule() const { return sched_; }
  std::vector<protocol::ReqId> in_flight() const;

  std::string node_id;
  std::int64_t priority = 0;

  // Steps the guest while Running. Stops at `until` (device time is then
  // advanced to exactly `until`), after `max_steps` guest steps, or when the
  // guest finishes.
  RunResult run(std::optional<SimTime> until = std::nullopt,
                std::optional<std::size_t> max_steps = std::nullopt);
  RunResult run_steps(std::size_t n) { return run(std::nullopt, n); }
  // Processes device events up to t and moves the clock there.
  void advance_to(SimTime t);

  // Time the in-flight request still needs; blocks (moves the clock) until
  // it is done. Requests not yet dispatched keep their schedule.
  Duration sync_fpga();
  // Throws AlreadyEvicted, InvalidState when terminated.
  EvictReport evict();
  // Throws AlreadyRunning, NoFreeSlot, OutOfMemory.
  ResumeReport resume(fpga::FpgaDevice& device);
  ResumeReport resume() { return resume(*device_); }
  // Throws StoreUnavailable (after restoring the prior phase), InvalidState.
  CheckpointReport checkpoint(const SnapshotStore& store, const std::string& name);
  // Snapshot of an evicted task without persisting it.
  Snapshot make_snapshot() const;
  // Tear down: drop the device state and stop the guest.
  void kill();

  // Digest over the task's device buffers (id, size, address, state,
  // divergence, contents), its registers and its bitstream.
  std::uint64_t device_state_digest() const;

  // guest::GuestEnv
  protocol::VFpgaHandle vfpga_init(const std::string& bitstream_id, std::span<const std::uint8_t> bitstream) override;
  void vfpga_exit(const protocol::VFpgaHandle& handle) override;
  void doorbell(protocol::QueueId queue) override;
  bool wait(protocol::QueueId queue, protocol::ReqId req) override;

 private:
  void schedule_new();
  void reschedule_all();
  void place(ScheduledRequest& s, const protocol::FunkyRequest& r, SimTime visible);
  Duration device_cost(const protocol::FunkyRequest& r) const;
  bool dispatch(ScheduledRequest& s);
  void complete(ScheduledRequest& s);
  void apply_effects(const protocol::FunkyRequest& r);
  void execute(const protocol::ExecuteReq& e);
  void terminate_with_fault(protocol::ReqId id, protocol::ViolationKind kind, std::string detail);
  void release_device();
  void drain_dispatched();
  void finish_task();
  std::optional<std::size_t> slot() const;
  void log(std::string what, protocol::ReqId id = 0, std::string detail = {});

  TaskId task_;
  fpga::FpgaDevice* device_;
  StateCosts costs_;
  SimTime now_;
  Phase phase_ = Phase::Running;
  guest::GuestState guest_;
  std::optional<fpga::Bitstream> bitstream_;
  std::deque<ScheduledRequest> sched_;
  protocol::ReqId scheduled_upto_ = 0;
  SimTime last_start_{0};
  SimTime device_free_{0};
  SimTime last_end_{0};
  bool paused_ = false;
  bool completed_ = false;
  std::optional<IsolationFaultRecord> fault_;
  std::optional<FpgaContext> context_;
  std::vector<MonitorEvent> events_;
  std::uint64_t next_handle_ = 1;
};

}  // namespace funky::monitor
