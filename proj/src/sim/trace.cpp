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

#include "funky/sim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace funky::sim {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(const std::string& origin, std::size_t line, const std::string& what) {
  fail(Errc::ParseError, origin + ":" + std::to_string(line) + ": " + what);
}

double number(const std::string& field, const std::string& origin, std::size_t line, const char* name) {
  double v = 0;
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || p != field.data() + field.size() || !std::isfinite(v))
    bad(origin, line, std::string("bad ") + name + " '" + field + "'");
  return v;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

// Dividing by the exact reciprocal yields the double nearest the printed
// decimal, which is what parsing it back produces.
double round_to(double v, double per_unit) { return std::round(v * per_unit) / per_unit; }

}  // namespace

std::vector<TraceJob> parse_trace(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<TraceJob> jobs;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      std::string compact;
      for (char c : line)
        if (c != ' ' && c != '\t') compact += c;
      if (compact != kTraceHeader) bad(origin, line_no, "expected header '" + std::string(kTraceHeader) + "'");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 6) bad(origin, line_no, "expected 6 columns, got " + std::to_string(f.size()));
    TraceJob j;
    j.job_id = f[0];
    if (j.job_id.empty()) bad(origin, line_no, "empty job_id");
    j.submit_s = number(f[1], origin, line_no, "submit_s");
    j.duration_s = number(f[2], origin, line_no, "duration_s");
    auto prio = number(f[3], origin, line_no, "priority");
    if (prio != std::floor(prio)) bad(origin, line_no, "priority must be an integer");
    j.priority = static_cast<std::int64_t>(prio);
    j.cpu_mem_mib = number(f[4], origin, line_no, "cpu_mem_mib");
    j.accel_rate = number(f[5], origin, line_no, "accel_rate");
    if (j.submit_s < 0) bad(origin, line_no, "negative submit_s");
    if (j.duration_s <= 0) bad(origin, line_no, "duration_s must be positive");
    if (j.cpu_mem_mib < 0) bad(origin, line_no, "negative cpu_mem_mib");
    if (j.accel_rate < 0 || j.accel_rate > 1) bad(origin, line_no, "accel_rate outside [0,1]");
    jobs.push_back(std::move(j));
  }
  if (!header) bad(origin, line_no, "missing header");
  std::stable_sort(jobs.begin(), jobs.end(), [](const TraceJob& a, const TraceJob& b) { return a.submit_s < b.submit_s; });
  return jobs;
}

std::vector<TraceJob> ingest_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::ParseError, "cannot read trace " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str(), path.string());
}

std::string format_trace(const std::vector<TraceJob>& jobs) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& j : jobs)
    out += j.job_id + "," + fmt(j.submit_s) + "," + fmt(j.duration_s) + "," + std::to_string(j.priority) + "," +
           fmt(j.cpu_mem_mib) + "," + fmt(j.accel_rate) + "\n";
  return out;
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceJob>& jobs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::StoreUnavailable, "cannot write " + path.string());
  out << format_trace(jobs);
}

std::vector<TraceJob> generate_trace(const GeneratorConfig& cfg) {
  if (cfg.priority_classes == 0 || cfg.accel_rates.empty() || cfg.duration_min_s <= 0 ||
      cfg.duration_max_s < cfg.duration_min_s || cfg.mem_min_mib <= 0 || cfg.mem_max_mib < cfg.mem_min_mib)
    fail(Errc::InvalidConfig, "bad generator parameters");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> zipf;
  for (std::size_t k = 1; k <= cfg.priority_classes; ++k) zipf.push_back(1.0 / std::pow(static_cast<double>(k), cfg.zipf_s));
  std::discrete_distribution<std::size_t> prio(zipf.begin(), zipf.end());
  std::uniform_int_distribution<std::size_t> rate(0, cfg.accel_rates.size() - 1);
  const double lo = cfg.duration_min_s, hi = cfg.duration_max_s, a = cfg.pareto_alpha;
  const double ratio = std::pow(lo / hi, a);
  std::vector<TraceJob> jobs;
  double t = 0;
  for (std::size_t i = 0; i < cfg.jobs; ++i) {
    TraceJob j;
    j.job_id = "j" + std::to_string(i);
    j.submit_s = round_to(t, 1000);
    // Inverse CDF of the Pareto bounded to [lo, hi].
    double x = u(rng);
    j.duration_s = round_to(lo / std::pow(1.0 - x * (1.0 - ratio), 1.0 / a), 1000);
    j.duration_s = std::clamp(j.duration_s, lo, hi);
    j.priority = static_cast<std::int64_t>(prio(rng));
    j.cpu_mem_mib = round_to(cfg.mem_min_mib * std::pow(cfg.mem_max_mib / cfg.mem_min_mib, u(rng)), 1);
    j.accel_rate = cfg.accel_rates[rate(rng)];
    jobs.push_back(std::move(j));
    t += -std::log(1.0 - u(rng)) * cfg.mean_interarrival_s;
  }
  return jobs;
}

FpgaJob fpgaize(const TraceJob& job, double speedup, double mem_cap_mib) {
  if (speedup <= 0) fail(Errc::InvalidConfig, "speedup must be positive");
  FpgaJob f;
  f.job = job;
  f.fpga_duration_s = job.duration_s * (1.0 - job.accel_rate) + job.duration_s * job.accel_rate / speedup;
  f.fpga_mem_mib = std::min(job.cpu_mem_mib, mem_cap_mib);
  return f;
}

}  // namespace funky::sim
