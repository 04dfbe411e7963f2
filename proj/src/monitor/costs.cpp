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

#include "funky/monitor/costs.hpp"

namespace funky::monitor {

StateCosts StateCosts::from_config(const KvConfig& cfg, const std::string& prefix) {
  StateCosts c;
  c.vm_base_bytes = static_cast<Bytes>(cfg.integer(prefix + "vm_base_bytes", static_cast<long long>(c.vm_base_bytes)));
  c.store_bw = cfg.number(prefix + "store_bw_bytes_per_s", c.store_bw);
  c.checkpoint_slowdown = cfg.number(prefix + "checkpoint_slowdown", c.checkpoint_slowdown);
  c.network_bw = cfg.number(prefix + "network_gbps", c.network_bw * 8 / 1e9) * 1e9 / 8;
  if (cfg.has(prefix + "boot_ms")) c.sandbox_boot = ceil_millis(cfg.number(prefix + "boot_ms", 0));
  if (cfg.has(prefix + "teardown_ms")) c.sandbox_teardown = ceil_millis(cfg.number(prefix + "teardown_ms", 0));
  if (!(c.store_bw > 0) || !(c.network_bw > 0) || !(c.checkpoint_slowdown > 0))
    fail(Errc::InvalidConfig, "state cost rates must be positive");
  return c;
}

Duration eviction_time(const fpga::CostModel& m, Bytes dirty_bytes) {
  return fpga::transfer_cost(m, dirty_bytes, fpga::Direction::D2H);
}

Duration resume_time(const fpga::CostModel& m, Bytes restore_bytes) {
  return m.worker_spawn() + fpga::transfer_cost(m, restore_bytes, fpga::Direction::H2D);
}

Duration persist_time(const StateCosts& c, Bytes snapshot_bytes) {
  return ceil_seconds(static_cast<double>(snapshot_bytes) / c.store_bw * c.checkpoint_slowdown);
}

Duration load_time(const StateCosts& c, Bytes snapshot_bytes) {
  return ceil_seconds(static_cast<double>(snapshot_bytes) / c.store_bw);
}

Duration network_time(const StateCosts& c, Bytes bytes) {
  return ceil_seconds(static_cast<double>(bytes) / c.network_bw);
}

Bytes snapshot_bytes(const StateCosts& c, Bytes guest_bytes, Bytes dirty_bytes) {
  return c.vm_base_bytes + guest_bytes + dirty_bytes;
}

}  // namespace funky::monitor
