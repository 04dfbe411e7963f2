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
#include <string>
#include <vector>

#include "funky/common.hpp"

namespace funky::sim {

struct TraceJob {
  std::string job_id;
  double submit_s = 0;
  double duration_s = 0;  // CPU execution time
  std::int64_t priority = 0;
  double cpu_mem_mib = 0;
  double accel_rate = 0;
};

inline constexpr std::string_view kTraceHeader = "job_id,submit_s,duration_s,priority,cpu_mem_mib,accel_rate";

// One job per line after the header. Returns jobs sorted by submit time
// (stable, so equal submits keep file order). Throws ParseError naming the line.
std::vector<TraceJob> parse_trace(const std::string& text, const std::string& origin = "<trace>");
std::vector<TraceJob> ingest_trace(const std::filesystem::path& path);
std::string format_trace(const std::vector<TraceJob>& jobs);
void write_trace(const std::filesystem::path& path, const std::vector<TraceJob>& jobs);

struct GeneratorConfig {
  std::size_t jobs = 400;
  std::uint64_t seed = 1;
  double mean_interarrival_s = 2.0;
  // Bounded Pareto durations.
  double duration_min_s = 120;
  double duration_max_s = 7200;
  double pareto_alpha = 1.6;
  // Zipf over priority classes 0..classes-1; class 0 is the most common.
  std::size_t priority_classes = 4;
  double zipf_s = 1.2;
  // Log-uniform memory.
  double mem_min_mib = 64;
  double mem_max_mib = 512;
  std::vector<double> accel_rates{0, 0.25, 0.5, 0.75, 1.0};
};

// Borg-like synthetic trace: Poisson arrivals, heavy-tailed durations and
// Zipfian priorities. Values are rounded to what format_trace prints, so a
// generated trace equals its own re-ingested text.
std::vector<TraceJob> generate_trace(const GeneratorConfig& cfg);

struct FpgaJob {
  TraceJob job;
  double fpga_duration_s = 0;
  double fpga_mem_mib = 0;
};

// fpga_duration = d(1-a) + d a / speedup; fpga_mem = min(cpu_mem, mem_cap).
FpgaJob fpgaize(const TraceJob& job, double speedup, double mem_cap_mib);

}  // namespace funky::sim
