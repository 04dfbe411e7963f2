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

#include "funky/fpga/cost_model.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace funky::fpga {

std::string_view to_string(Direction d) { return d == Direction::H2D ? "h2d" : "d2h"; }

void CostModel::validate() const {
  if (!(bw_h2d > 0) || !(bw_d2h > 0)) fail(Errc::InvalidConfig, "DMA bandwidths must be positive");
  if (dma_fixed_latency.count() < 0 || reconfig_latency.count() < 0 || request_overhead.count() < 0)
    fail(Errc::InvalidConfig, "latencies must be non-negative");
  if (worker_spawn_min.count() < 0 || worker_spawn_max < worker_spawn_min)
    fail(Errc::InvalidConfig, "worker spawn range is invalid");
  for (const auto& [id, tp] : kernel_throughput)
    if (!(tp > 0)) fail(Errc::InvalidConfig, "kernel throughput for " + id + " must be positive");
  if (mem_capacity == 0) fail(Errc::InvalidConfig, "memory capacity must be positive");
}

CostModel CostModel::defaults() {
  CostModel m;
  m.kernel_throughput = {
      {"vadd", 1000.0 * MiB},
      {"stream", 1000.0 * MiB},
      {"shift_register", 1000.0 * MiB},
      {"mmult", 500.0 * MiB},
  };
  return m;
}

CostModel CostModel::from_config(const KvConfig& cfg, const std::string& prefix) {
  CostModel m = defaults();
  auto key = [&](const char* k) { return prefix + k; };
  m.bw_h2d = cfg.number(key("bw_h2d_bytes_per_s"), m.bw_h2d);
  m.bw_d2h = cfg.number(key("bw_d2h_bytes_per_s"), m.bw_d2h);
  if (cfg.has(key("dma_fixed_latency_ms")))
    m.dma_fixed_latency = ceil_millis(cfg.number(key("dma_fixed_latency_ms"), 0));
  if (cfg.has(key("reconfig_latency_ms")))
    m.reconfig_latency = ceil_millis(cfg.number(key("reconfig_latency_ms"), 0));
  if (cfg.has(key("request_overhead_ms")))
    m.request_overhead = ceil_millis(cfg.number(key("request_overhead_ms"), 0));
  if (auto spawn = cfg.get(key("worker_spawn_ms"))) {
    auto dash = spawn->find('-', 1);
    try {
      if (dash == std::string::npos) {
        m.worker_spawn_min = m.worker_spawn_max = ceil_millis(std::stod(*spawn));
      } else {
        m.worker_spawn_min = ceil_millis(std::stod(spawn->substr(0, dash)));
        m.worker_spawn_max = ceil_millis(std::stod(spawn->substr(dash + 1)));
      }
    } catch (const std::invalid_argument&) {
      fail(Errc::InvalidConfig, "worker_spawn_ms must be a number or lo-hi range: " + *spawn);
    }
  }
  if (cfg.has(key("mem_capacity_bytes")))
    m.mem_capacity = static_cast<Bytes>(cfg.integer(key("mem_capacity_bytes"), 0));

  const std::string suffix = "_bytes_per_s";
  for (const auto& [k, v] : cfg.with_prefix(key("kernel_throughput."))) {
    if (k.size() <= suffix.size() || k.compare(k.size() - suffix.size(), suffix.size(), suffix) != 0)
      fail(Errc::InvalidConfig, "kernel throughput key must end in _bytes_per_s: " + k);
    auto id = k.substr(0, k.size() - suffix.size());
    m.kernel_throughput[id] = cfg.number(key("kernel_throughput.") + k, 0);
  }
  m.validate();
  return m;
}

CostModel CostModel::load(const std::filesystem::path& path) { return from_config(KvConfig::load(path)); }

void CostModel::write_config(std::ostream& os, const std::string& prefix) const {
  auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << prefix << "bw_h2d_bytes_per_s = " << bw_h2d << "\n";
  os << prefix << "bw_d2h_bytes_per_s = " << bw_d2h << "\n";
  os << prefix << "dma_fixed_latency_ms = " << to_millis(dma_fixed_latency) << "\n";
  os << prefix << "reconfig_latency_ms = " << to_millis(reconfig_latency) << "\n";
  os << prefix << "worker_spawn_ms = " << to_millis(worker_spawn_min) << "-" << to_millis(worker_spawn_max) << "\n";
  os << prefix << "request_overhead_ms = " << to_millis(request_overhead) << "\n";
  os << prefix << "mem_capacity_bytes = " << mem_capacity << "\n";
  for (const auto& [id, tp] : kernel_throughput)
    os << prefix << "kernel_throughput." << id << "_bytes_per_s = " << tp << "\n";
  os.precision(old);
}

Duration transfer_cost(const CostModel& model, Bytes bytes, Direction dir) {
  double bw = dir == Direction::H2D ? model.bw_h2d : model.bw_d2h;
  return model.dma_fixed_latency + ceil_seconds(static_cast<double>(bytes) / bw);
}

Duration execute_cost(const CostModel& model, const std::string& kernel_id, Bytes total_input_bytes) {
  auto it = model.kernel_throughput.find(kernel_id);
  if (it == model.kernel_throughput.end()) fail(Errc::UnknownKernel, "no throughput for kernel " + kernel_id);
  return ceil_seconds(static_cast<double>(total_input_bytes) / it->second);
}

}  // namespace funky::fpga
