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
#include <optional>
#include <string>
#include <vector>

#include "funky/config.hpp"
#include "funky/fpga/cost_model.hpp"
#include "funky/monitor/costs.hpp"
#include "funky/orchestrator/scheduler.hpp"
#include "funky/sim/trace.hpp"
#include "json.hpp"

namespace funky::sim {

using json = nlohmann::json;
using orchestrator::Policy;

enum class FailureModel { None, Uniform };

struct SimConfig {
  std::size_t n_vfpgas = 32;
  std::size_t vfpgas_per_node = 1;
  Policy policy = Policy::PRE_MG;
  double speedup = 1.6;
  double mem_cap_mib = 8192;
  std::optional<Duration> checkpoint_interval;
  FailureModel failures = FailureModel::None;
  std::uint64_t seed = 0;
  fpga::CostModel cost = fpga::CostModel::defaults();
  monitor::StateCosts state;
  std::optional<double> accel_override;  // replaces every job's accel_rate
  Duration anti_thrash{0};
  bool keep_log = true;  // the digest is computed either way

  // Keys: sim.vfpgas, sim.vfpgas_per_node, sim.policy (or scheduler.policy),
  // sim.speedup, sim.mem_cap_mib, sim.checkpoint_interval_s, sim.failures
  // (none | uniform), sim.seed, sim.accel_rate, scheduler.anti_thrash_s,
  // fpga.* and state.*.
  static SimConfig from_config(const KvConfig& cfg);
  json to_json() const;
};

// Per-job overheads derived from the cost model for a job whose whole FPGA
// memory is dirty.
struct JobCosts {
  Duration boot{0};
  Duration teardown{0};
  Duration evict{0};       // d2h of the job memory
  Duration resume{0};      // worker spawn + reconfiguration + h2d
  Duration migrate{0};     // network + snapshot load + resume
  Duration checkpoint{0};  // evict + persist + resume
  Duration restore{0};     // snapshot load + resume
  Bytes snapshot_bytes = 0;
};
JobCosts job_costs(const SimConfig& cfg, double fpga_mem_mib);

// The failure point of a job as a fraction of its duration, drawn once from
// uniform(0.01, 0.99) with a generator keyed by (seed, job_id).
double failure_fraction(std::uint64_t seed, const std::string& job_id);

struct JobOutcome {
  std::string job_id;
  std::int64_t priority = 0;
  Duration work{0};  // FPGA-ized duration
  SimTime submit{0};
  std::optional<SimTime> first_start;
  std::optional<SimTime> finish;
  std::size_t evictions = 0;
  std::size_t migrations = 0;
  std::size_t checkpoints = 0;
  std::size_t failures = 0;
  Duration lost_work{0};
  Duration recovery{0};  // recovery overhead plus recomputed work
  std::optional<Duration> restored_from;  // progress a failure rolled back to
  Duration completion() const { return finish ? *finish - submit : Duration{0}; }
};

struct SimMetrics {
  std::size_t submitted = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  SimTime makespan{0};  // first submission to last completion
  double throughput_per_min = 0;
  double mean_completion_s = 0;
  std::map<std::int64_t, double> mean_completion_by_priority;
  std::vector<JobOutcome> jobs;
  std::size_t checkpoints = 0;
  Duration checkpoint_overhead{0};
  std::size_t recoveries = 0;
  Duration recovery_time{0};
  std::size_t evictions = 0;
  std::size_t resumes = 0;
  std::size_t migrations = 0;
  std::vector<std::string> event_log;
  std::uint64_t event_digest = 0;

  json summary() const;
};

// Event-driven replay of `jobs` over the scheduler and the state-management
// cost model. Deterministic for a given (jobs, cfg).
SimMetrics run_sim(const std::vector<TraceJob>& jobs, const SimConfig& cfg);

// jobs.csv, summary.json and, when kept, events.log under `dir`.
void write_metrics(const std::filesystem::path& dir, const SimMetrics& m, const SimConfig& cfg);

}  // namespace funky::sim
