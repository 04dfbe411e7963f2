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

#include <optional>
#include <set>
#include <string>

#include "funky/fpga/device.hpp"
#include "funky/protocol/request.hpp"

namespace funky::protocol {

enum class ViolationKind {
  ForeignBuffer,
  UnknownBuffer,
  DuplicateBuffer,
  AddressOutOfRange,
  RangeOutOfBounds,
  CapacityExceeded,
  ZeroSize,
  UnknownQueue,
  UnknownKernel,
  UnknownRequest,
};

std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::string detail;
};

// What the monitor knows about the submitting task when checking a request.
struct TaskContext {
  TaskId task;
  GuestAddr addr_begin = 0;  // guest memory range [addr_begin, addr_end)
  GuestAddr addr_end = 0;
  const fpga::FpgaDevice* device = nullptr;
  const fpga::Bitstream* bitstream = nullptr;  // null skips the kernel check
  std::set<QueueId> queues;
  ReqId own_id = 0;  // id the request was submitted under (SYNC targets must precede it)
};

// Never throws; returns the first rule the request breaks.
std::optional<Violation> validate(const FunkyRequest& request, const TaskContext& ctx);

}  // namespace funky::protocol
