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
#include <optional>
#include <vector>

#include "funky/sim/sim.hpp"

namespace funky::sim {

inline const std::vector<std::size_t> kDefaultVfpgaCounts{1, 2, 4, 8, 16, 32, 64, 128};
inline const std::vector<double> kDefaultAccelRates{0, 0.25, 0.5, 0.75, 1.0};

struct ScalabilityRow {
  std::size_t vfpgas = 0;
  double accel_rate = 0;
  double throughput_per_min = 0;
  double makespan_s = 0;
  std::size_t completed = 0;
  std::uint64_t event_digest = 0;
};

// One run_sim per (count, rate) with the rate forced on every job. Runs are
// independent and executed on up to `threads` workers (0 = hardware).
std::vector<ScalabilityRow> experiment_scalability(const std::vector<TraceJob>& trace, const SimConfig& base,
                                                   const std::vector<std::size_t>& counts = kDefaultVfpgaCounts,
                                                   const std::vector<double>& rates = kDefaultAccelRates,
                                                   unsigned threads = 0);

struct FaultRow {
  std::optional<Duration> interval;  // none = no checkpointing
  double success_mean_s = 0;         // no failures, checkpoints on
  double restore_mean_s = 0;         // failures, restore from the latest snapshot
  double restart_mean_s = 0;         // failures, restart from scratch
  double success_overhead_s = 0;     // success_mean minus the no-failure, no-checkpoint mean
  std::size_t checkpoints = 0;
};

inline const std::vector<std::optional<Duration>> kDefaultIntervals{
    Duration{30'000'000}, Duration{60'000'000}, Duration{300'000'000}, Duration{600'000'000}, std::nullopt};

std::vector<FaultRow> experiment_fault_tolerance(const std::vector<TraceJob>& trace, const SimConfig& base,
                                                 const std::vector<std::optional<Duration>>& intervals = kDefaultIntervals,
                                                 unsigned threads = 0);

struct SchedulingWorkload {
  std::vector<TraceJob> jobs;  // submit times are replaced by the permutation
  double gap_s = 5;            // arrival spacing
  std::size_t permutations = 20;
  std::uint64_t seed = 0;
};

// Arrival orders: the listed order first, then seeded shuffles, all distinct
// when the batch allows it.
std::vector<std::vector<TraceJob>> arrival_orders(const SchedulingWorkload& w);

struct SchedulingRow {
  Policy policy = Policy::FCFS;
  std::int64_t priority = 0;
  double mean_completion_s = 0;  // over every permutation and job of the class
  std::size_t samples = 0;
};

std::vector<SchedulingRow> experiment_scheduling(const SchedulingWorkload& w, const SimConfig& base,
                                                 const std::vector<Policy>& policies = {std::begin(orchestrator::kAllPolicies),
                                                                                        std::end(orchestrator::kAllPolicies)},
                                                 unsigned threads = 0);

// Columnar text plus a JSON document, <stem>.csv and <stem>.json under dir.
void write_scalability(const std::filesystem::path& dir, const std::vector<ScalabilityRow>& rows);
void write_faults(const std::filesystem::path& dir, const std::vector<FaultRow>& rows);
void write_scheduling(const std::filesystem::path& dir, const std::vector<SchedulingRow>& rows);

}  // namespace funky::sim
