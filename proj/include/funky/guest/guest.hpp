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
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "funky/fpga/content.hpp"
#include "funky/guest/program.hpp"
#include "funky/protocol/request.hpp"

namespace funky::guest {

using protocol::BufferId;
using protocol::FunkyRequest;
using protocol::QueueId;
using protocol::ReqId;
using protocol::VFpgaHandle;

// A named host array inside guest memory.
struct HostRegion {
  GuestAddr addr = 0;
  Bytes size = 0;
  friend bool operator==(const HostRegion&, const HostRegion&) = default;
};

inline constexpr GuestAddr kHostBase = 0x100000;
inline constexpr Bytes kPageSize = 4096;

// Everything the guest VM holds: its program, program counter, host memory,
// OpenCL object bookkeeping and the shared request queue. Captured whole in
// snapshots; only ever observed at step boundaries.
struct GuestState {
  TaskProgram program;
  std::vector<ApiCall> flat;  // derived from program
  std::size_t pc = 0;
  bool awaiting = false;  // blocked in finish() on the queue's last request
  fpga::Content memory;  // guest physical memory [0, guest_mem_bytes)
  std::map<std::string, HostRegion> host;
  std::map<std::string, BufferId> buffer_ids;
  std::vector<std::optional<protocol::KernelArg>> deferred;
  std::optional<VFpgaHandle> handle;
  protocol::RequestQueue queue;
  BufferId id_base = 0;
  std::uint32_t buffers_created = 0;
  Bytes guest_mem_bytes = 0;

  // Lays out host buffers with their initial contents. Buffer ids are drawn
  // from a base derived from `task` so co-located tasks do not collide.
  // Throws ProtocolViolation if the program breaks its structural rules.
  static GuestState boot(const TaskProgram& program, const TaskId& task);

  bool done() const { return pc >= flat.size() && !awaiting; }
  const ApiCall* current() const { return pc < flat.size() ? &flat[pc] : nullptr; }
  // Bytes held in host arrays.
  Bytes memory_bytes() const;
  fpga::Content region_contents(const std::string& name) const;
  // Digest over all host arrays (name order).
  std::uint64_t output_digest() const;
  // Guest memory access; the range must lie inside [0, guest_mem_bytes).
  fpga::Content read_memory(GuestAddr addr, Bytes size) const;
  void write_memory(GuestAddr addr, const fpga::Content& src);

  std::vector<std::uint8_t> encode() const;
  static GuestState decode(std::span<const std::uint8_t> bytes);
  friend bool operator==(const GuestState&, const GuestState&) = default;
};

namespace action {
struct HypercallInit {
  std::string bitstream_id;
  std::vector<std::uint8_t> bitstream;
};
struct HypercallExit {};
struct Submit {
  FunkyRequest request;
};
struct Await {};
}  // namespace action
using Action = std::variant<action::HypercallInit, action::HypercallExit, action::Submit, action::Await>;

// The FunkyCL mapping of one API call. Updates only guest-side bookkeeping
// (deferred kernel arguments, buffer ids); issues nothing by itself.
// Throws ProtocolViolation on non-contiguous set_arg indices and on calls that
// need a vFPGA before create_program.
std::vector<Action> translate(const ApiCall& call, GuestState& state);

// What the guest sees of its monitor: the two hypercalls plus the queue
// doorbell and completion wait.
class GuestEnv {
 public:
  virtual ~GuestEnv() = default;
  virtual VFpgaHandle vfpga_init(const std::string& bitstream_id, std::span<const std::uint8_t> bitstream) = 0;
  virtual void vfpga_exit(const VFpgaHandle& handle) = 0;
  virtual void doorbell(QueueId queue) = 0;
  // True once `req` has completed. A blocking environment waits; a
  // non-blocking one may return false, leaving the guest parked in finish().
  virtual bool wait(QueueId queue, ReqId req) = 0;
};

enum class StepOutcome { Progressed, Blocked, Done };

// Executes the current step (or continues a parked finish()).
StepOutcome step(GuestState& state, GuestEnv& env);

// Boots and runs to completion against a blocking environment.
GuestState run_program(const TaskProgram& program, GuestEnv& env, const TaskId& task);

}  // namespace funky::guest
