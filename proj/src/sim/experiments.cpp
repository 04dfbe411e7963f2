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

#include "funky/sim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <set>
#include <thread>

namespace funky::sim {

namespace {

// Runs every job; results land at their own index, so order is irrelevant.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lk(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) fail(Errc::StoreUnavailable, "cannot write " + p.string());
  return out;
}

std::string interval_name(const std::optional<Duration>& d) {
  return d ? std::to_string(static_cast<long long>(to_seconds(*d))) : "none";
}

}  // namespace

std::vector<ScalabilityRow> experiment_scalability(const std::vector<TraceJob>& trace, const SimConfig& base,
                                                   const std::vector<std::size_t>& counts,
                                                   const std::vector<double>& rates, unsigned threads) {
  std::vector<ScalabilityRow> rows(counts.size() * rates.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    auto cfg = base;
    cfg.n_vfpgas = counts[i / rates.size()];
    cfg.accel_override = rates[i % rates.size()];
    cfg.keep_log = false;
    auto m = run_sim(trace, cfg);
    rows[i] = {cfg.n_vfpgas, *cfg.accel_override, m.throughput_per_min, to_seconds(m.makespan), m.completed,
               m.event_digest};
  });
  return rows;
}

std::vector<FaultRow> experiment_fault_tolerance(const std::vector<TraceJob>& trace, const SimConfig& base,
                                                 const std::vector<std::optional<Duration>>& intervals,
                                                 unsigned threads) {
  // Per interval: success run and failure run; plus the two shared baselines.
  const std::size_t n = intervals.size();
  std::vector<SimMetrics> runs(2 * n + 2);
  parallel_for(runs.size(), threads, [&](std::size_t i) {
    auto cfg = base;
    cfg.keep_log = false;
    if (i < 2 * n) {
      cfg.checkpoint_interval = intervals[i / 2];
      cfg.failures = i % 2 == 0 ? FailureModel::None : FailureModel::Uniform;
    } else {
      cfg.checkpoint_interval.reset();
      cfg.failures = i == 2 * n ? FailureModel::None : FailureModel::Uniform;
    }
    runs[i] = run_sim(trace, cfg);
  });
  const double plain = runs[2 * n].mean_completion_s;
  const double restart = runs[2 * n + 1].mean_completion_s;
  std::vector<FaultRow> rows;
  for (std::size_t k = 0; k < n; ++k) {
    FaultRow r;
    r.interval = intervals[k];
    r.success_mean_s = runs[2 * k].mean_completion_s;
    r.restore_mean_s = runs[2 * k + 1].mean_completion_s;
    r.restart_mean_s = restart;
    r.success_overhead_s = r.success_mean_s - plain;
    r.checkpoints = runs[2 * k].checkpoints;
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::vector<TraceJob>> arrival_orders(const SchedulingWorkload& w) {
  std::vector<std::size_t> idx(w.jobs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::size_t distinct = 1;
  for (std::size_t k = 2; k <= idx.size() && distinct < w.permutations; ++k) distinct *= k;
  const auto want = std::min(w.permutations, distinct);
  std::mt19937_64 rng(w.seed);
  std::set<std::vector<std::size_t>> seen;
  std::vector<std::vector<TraceJob>> out;
  while (out.size() < want) {
    if (!out.empty()) std::shuffle(idx.begin(), idx.end(), rng);
    if (!seen.insert(idx).second) continue;
    std::vector<TraceJob> order;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto j = w.jobs[idx[k]];
      j.submit_s = static_cast<double>(k) * w.gap_s;
      order.push_back(std::move(j));
    }
    out.push_back(std::move(order));
  }
  return out;
}

std::vector<SchedulingRow> experiment_scheduling(const SchedulingWorkload& w, const SimConfig& base,
                                                 const std::vector<Policy>& policies, unsigned threads) {
  auto orders = arrival_orders(w);
  std::vector<SimMetrics> runs(policies.size() * orders.size());
  parallel_for(runs.size(), threads, [&](std::size_t i) {
    auto cfg = base;
    cfg.policy = policies[i / orders.size()];
    cfg.keep_log = false;
    runs[i] = run_sim(orders[i % orders.size()], cfg);
  });
  std::vector<SchedulingRow> rows;
  for (std::size_t p = 0; p < policies.size(); ++p) {
    std::map<std::int64_t, std::pair<double, std::size_t>> acc;
    for (std::size_t o = 0; o < orders.size(); ++o)
      for (const auto& j : runs[p * orders.size() + o].jobs) {
        if (!j.finish) continue;
        acc[j.priority].first += to_seconds(j.completion());
        ++acc[j.priority].second;
      }
    for (const auto& [prio, v] : acc)
      rows.push_back({policies[p], prio, v.first / static_cast<double>(v.second), v.second});
  }
  return rows;
}

void write_scalability(const std::filesystem::path& dir, const std::vector<ScalabilityRow>& rows) {
  auto csv = open_out(dir / "scalability.csv");
  csv << "vfpgas,accel_rate,throughput_per_min,makespan_s,completed\n";
  json j = json::array();
  for (const auto& r : rows) {
    csv << r.vfpgas << ',' << r.accel_rate << ',' << r.throughput_per_min << ',' << r.makespan_s << ',' << r.completed
        << '\n';
    j.push_back({{"vfpgas", r.vfpgas},
                 {"accel_rate", r.accel_rate},
                 {"throughput_per_min", r.throughput_per_min},
                 {"makespan_s", r.makespan_s},
                 {"completed", r.completed},
                 {"event_digest", hex64(r.event_digest)}});
  }
  open_out(dir / "scalability.json") << j.dump(2) << '\n';
}

void write_faults(const std::filesystem::path& dir, const std::vector<FaultRow>& rows) {
  auto csv = open_out(dir / "faults.csv");
  csv << "interval_s,success_mean_s,restore_mean_s,restart_mean_s,success_overhead_s,checkpoints\n";
  json j = json::array();
  for (const auto& r : rows) {
    csv << interval_name(r.interval) << ',' << r.success_mean_s << ',' << r.restore_mean_s << ',' << r.restart_mean_s
        << ',' << r.success_overhead_s << ',' << r.checkpoints << '\n';
    j.push_back({{"interval_s", interval_name(r.interval)},
                 {"success_mean_s", r.success_mean_s},
                 {"restore_mean_s", r.restore_mean_s},
                 {"restart_mean_s", r.restart_mean_s},
                 {"success_overhead_s", r.success_overhead_s},
                 {"checkpoints", r.checkpoints}});
  }
  open_out(dir / "faults.json") << j.dump(2) << '\n';
}

void write_scheduling(const std::filesystem::path& dir, const std::vector<SchedulingRow>& rows) {
  auto csv = open_out(dir / "scheduling.csv");
  csv << "policy,priority,mean_completion_s,samples\n";
  json j = json::array();
  for (const auto& r : rows) {
    csv << orchestrator::to_string(r.policy) << ',' << r.priority << ',' << r.mean_completion_s << ',' << r.samples
        << '\n';
    j.push_back({{"policy", std::string(orchestrator::to_string(r.policy))},
                 {"priority", r.priority},
                 {"mean_completion_s", r.mean_completion_s},
                 {"samples", r.samples}});
  }
  open_out(dir / "scheduling.json") << j.dump(2) << '\n';
}

}  // namespace funky::sim
