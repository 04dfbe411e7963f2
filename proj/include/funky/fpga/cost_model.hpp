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

#include <filesystem>
#include <map>
#include <string>

#include "funky/common.hpp"
#include "funky/config.hpp"

namespace funky::fpga {

enum class Direction : std::uint8_t { H2D = 0, D2H = 1 };

std::string_view to_string(Direction d);

// Timing model of one FPGA card (Shell DMA engine, reconfiguration, kernels)
// plus the host-side worker thread that drives it.
struct CostModel {
  double bw_h2d = 9.2 * static_cast<double>(GiB);  // bytes/s
  double bw_d2h = 5.5 * static_cast<double>(GiB);  // bytes/s
  Duration dma_fixed_latency{200};
  Duration reconfig_latency{3'500'000};
  Duration worker_spawn_min{97'600};
  Duration worker_spawn_max{158'000};
  // Host-side handling of one request (validation, address translation,
  // doorbell). Overlaps the device time of the previously issued request.
  Duration request_overhead{1'084};
  std::map<std::string, double> kernel_throughput;  // bytes/s per kernel id
  Bytes mem_capacity = 8 * GiB;

  // Simulation mode uses the midpoint of the observed spawn range.
  Duration worker_spawn() const { return (worker_spawn_min + worker_spawn_max) / 2; }

  // Throws InvalidConfig when a rate is not positive or a latency negative.
  void validate() const;

  static CostModel defaults();
  // Keys: bw_h2d_bytes_per_s, bw_d2h_bytes_per_s, dma_fixed_latency_ms,
  // reconfig_latency_ms, worker_spawn_ms ("a" or "lo-hi"), request_overhead_ms,
  // kernel_throughput.<id>_bytes_per_s, mem_capacity_bytes. Missing keys keep
  // their defaults. `prefix` scopes the keys inside a larger config.
  static CostModel from_config(const KvConfig& cfg, const std::string& prefix = "");
  static CostModel load(const std::filesystem::path& path);
  void write_config(std::ostream& os, const std::string& prefix = "") const;
};

Duration transfer_cost(const CostModel& model, Bytes bytes, Direction dir);
// Throws UnknownKernel when the kernel has no throughput entry.
Duration execute_cost(const CostModel& model, const std::string& kernel_id, Bytes total_input_bytes);

}  // namespace funky::fpga
