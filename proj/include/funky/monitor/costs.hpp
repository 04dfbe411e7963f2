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

#include "funky/common.hpp"
#include "funky/config.hpp"
#include "funky/fpga/cost_model.hpp"

namespace funky::monitor {

// Host-side costs of state management beyond the device model.
struct StateCosts {
  // Guest VM image in a snapshot besides its host arrays (kernel, runtime, heap).
  Bytes vm_base_bytes = 123 * MiB + 512 * KiB;
  double store_bw = 1.0 * static_cast<double>(GiB);  // sequential snapshot write/read, bytes/s
  double checkpoint_slowdown = 4.0;                   // dirty-page scan and random writes
  double network_bw = 100e9 / 8;                      // inter-node, bytes/s
  Duration sandbox_boot{200'000};
  Duration sandbox_teardown{100'000};

  // Keys under `prefix`: vm_base_bytes, store_bw_bytes_per_s,
  // checkpoint_slowdown, network_gbps, boot_ms, teardown_ms.
  static StateCosts from_config(const KvConfig& cfg, const std::string& prefix = "state.");
};

// Copy dirty buffers to host memory.
Duration eviction_time(const fpga::CostModel& m, Bytes dirty_bytes);
// Respawn the worker and copy `restore_bytes` (sync + dirty) back. Excludes
// reconfiguration, which callers charge separately.
Duration resume_time(const fpga::CostModel& m, Bytes restore_bytes);
Duration persist_time(const StateCosts& c, Bytes snapshot_bytes);
Duration load_time(const StateCosts& c, Bytes snapshot_bytes);
Duration network_time(const StateCosts& c, Bytes bytes);
// Logical snapshot size: VM image + host arrays + dirty FPGA buffers.
Bytes snapshot_bytes(const StateCosts& c, Bytes guest_bytes, Bytes dirty_bytes);

}  // namespace funky::monitor
