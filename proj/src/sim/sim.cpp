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

#include "funky/sim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <random>

namespace funky::sim {

namespace orch = funky::orchestrator;
using orch::TaskState;

SimConfig SimConfig::from_config(const KvConfig& cfg) {
  SimConfig c;
  c.n_vfpgas = static_cast<std::size_t>(cfg.integer("sim.vfpgas", static_cast<long long>(c.n_vfpgas)));
  c.vfpgas_per_node = static_cast<std::size_t>(cfg.integer("sim.vfpgas_per_node", 1));
  if (c.n_vfpgas == 0 || c.vfpgas_per_node == 0) fail(Errc::InvalidConfig, "sim.vfpgas and sim.vfpgas_per_node must be >= 1");
  c.policy = orch::policy_from_string(cfg.get_or("sim.policy", cfg.get_or("scheduler.policy", "pre_mg")));
  c.speedup = cfg.number("sim.speedup", c.speedup);
  if (c.speedup <= 0) fail(Errc::InvalidConfig, "sim.speedup must be positive");
  c.mem_cap_mib = cfg.number("sim.mem_cap_mib", c.mem_cap_mib);
  if (cfg.has("sim.checkpoint_interval_s")) {
    auto v = cfg.get_or("sim.checkpoint_interval_s", "none");
    if (v != "none") c.checkpoint_interval = ceil_seconds(cfg.number("sim.checkpoint_interval_s", 0));
  }
  auto f = cfg.get_or("sim.failures", "none");
  if (f == "uniform") c.failures = FailureModel::Uniform;
  else if (f != "none") fail(Errc::InvalidConfig, "sim.failures must be none or uniform");
  c.seed = static_cast<std::uint64_t>(cfg.integer("sim.seed", 0));
  if (cfg.has("sim.accel_rate")) c.accel_override = cfg.number("sim.accel_rate", 0);
  c.anti_thrash = ceil_seconds(cfg.number("scheduler.anti_thrash_s", 0));
  c.cost = fpga::CostModel::from_config(cfg, "fpga.");
  c.state = monitor::StateCosts::from_config(cfg, "state.");
  return c;
}

json SimConfig::to_json() const {
  json j{{"vfpgas", n_vfpgas},
         {"vfpgas_per_node", vfpgas_per_node},
         {"policy", std::string(orch::to_string(policy))},
         {"speedup", speedup},
         {"mem_cap_mib", mem_cap_mib},
         {"failures", failures == FailureModel::Uniform ? "uniform" : "none"},
         {"seed", seed},
         {"anti_thrash_s", to_seconds(anti_thrash)}};
  j["checkpoint_interval_s"] = checkpoint_interval ? json(to_seconds(*checkpoint_interval)) : json("none");
  if (accel_override) j["accel_rate"] = *accel_override;
  return j;
}

JobCosts job_costs(const SimConfig& cfg, double fpga_mem_mib) {
  JobCosts c;
  auto mem = static_cast<Bytes>(std::llround(fpga_mem_mib * static_cast<double>(MiB)));
  c.boot = cfg.state.sandbox_boot;
  c.teardown = cfg.state.sandbox_teardown;
  c.evict = monitor::eviction_time(cfg.cost, mem);
  c.resume = monitor::resume_time(cfg.cost, mem) + cfg.cost.reconfig_latency;
  c.snapshot_bytes = monitor::snapshot_bytes(cfg.state, mem, mem);
  auto load = monitor::load_time(cfg.state, c.snapshot_bytes);
  c.migrate = monitor::network_time(cfg.state, c.snapshot_bytes) + load + c.resume;
  c.checkpoint = c.evict + monitor::persist_time(cfg.state, c.snapshot_bytes) + c.resume;
  c.restore = load + c.resume;
  return c;
}

double failure_fraction(std::uint64_t seed, const std::string& job_id) {
  std::mt19937_64 rng(hash_combine(seed, fnv1a(job_id)));
  return std::uniform_real_distribution<double>(0.01, 0.99)(rng);
}

json SimMetrics::summary() const {
  json by_prio = json::object();
  for (const auto& [p, v] : mean_completion_by_priority) by_prio[std::to_string(p)] = v;
  return {{"submitted", submitted},
          {"completed", completed},
          {"failed", failed},
          {"makespan_s", to_seconds(makespan)},
          {"throughput_per_min", throughput_per_min},
          {"mean_completion_s", mean_completion_s},
          {"mean_completion_by_priority_s", by_prio},
          {"checkpoints", checkpoints},
          {"checkpoint_overhead_s", to_seconds(checkpoint_overhead)},
          {"recoveries", recoveries},
          {"recovery_time_s", to_seconds(recovery_time)},
          {"evictions", evictions},
          {"resumes", resumes},
          {"migrations", migrations},
          {"event_digest", hex64(event_digest)}};
}

namespace {

enum class Phase { Idle, Startup, Work, Checkpoint, Teardown, Done };

struct Job {
  FpgaJob f;
  TaskId id;
  Duration work{0};
  JobCosts costs;
  Phase phase = Phase::Idle;
  SimTime phase_start{0};
  Duration progress{0};
  std::optional<Duration> snapshot;
  std::optional<Duration> fail_mark;
  std::uint64_t epoch = 0;
  JobOutcome out;
};

struct Event {
  SimTime at;
  std::uint64_t seq;
  bool submit;
  std::size_t job;
  std::uint64_t epoch;
  bool operator>(const Event& o) const { return std::tie(at, seq) > std::tie(o.at, o.seq); }
};

class Simulation {
 public:
  Simulation(const std::vector<TraceJob>& trace, const SimConfig& cfg) : cfg_(cfg) {
    if (cfg.n_vfpgas == 0 || cfg.vfpgas_per_node == 0) fail(Errc::InvalidConfig, "need at least one vFPGA");
    state_.policy = cfg.policy;
    state_.anti_thrash = cfg.anti_thrash;
    auto nodes = (cfg.n_vfpgas + cfg.vfpgas_per_node - 1) / cfg.vfpgas_per_node;
    auto left = cfg.n_vfpgas;
    for (std::size_t i = 0; i < nodes; ++i) {
      auto slots = std::min(left, cfg.vfpgas_per_node);
      left -= slots;
      char name[32];
      std::snprintf(name, sizeof name, "n%03zu", i);
      state_.add_node(NodeId(name), static_cast<std::uint32_t>(slots));
    }
    jobs_.reserve(trace.size());
    for (const auto& t : trace) {
      auto src = t;
      if (cfg.accel_override) src.accel_rate = *cfg.accel_override;
      Job j;
      j.f = fpgaize(src, cfg.speedup, cfg.mem_cap_mib);
      j.id = TaskId(t.job_id);
      j.work = ceil_seconds(j.f.fpga_duration_s);
      j.costs = job_costs(cfg, j.f.fpga_mem_mib);
      j.out.job_id = t.job_id;
      j.out.priority = t.priority;
      j.out.work = j.work;
      j.out.submit = ceil_seconds(t.submit_s);
      if (cfg.failures == FailureModel::Uniform && j.work.count() > 1) {
        auto mark = std::llround(failure_fraction(cfg.seed, t.job_id) * static_cast<double>(j.work.count()));
        j.fail_mark = Duration(std::clamp<long long>(mark, 1, j.work.count() - 1));
      }
      jobs_.push_back(std::move(j));
    }
    for (std::size_t i = 0; i < jobs_.size(); ++i) {
      if (index_.contains(jobs_[i].id)) fail(Errc::TaskExists, "duplicate job_id " + jobs_[i].id.str());
      index_[jobs_[i].id] = i;
      push(jobs_[i].out.submit, true, i, 0);
    }
  }

  SimMetrics run() {
    while (!events_.empty()) {
      auto e = events_.top();
      events_.pop();
      state_.now = e.at;
      auto& j = jobs_[e.job];
      if (e.submit) {
        orch::TaskRecord r;
        r.task_id = j.id;
        r.priority = j.out.priority;
        r.submit_time = e.at;
        state_.submit(r);
        ++waiting_;
        log("submit", j);
      } else {
        if (e.epoch != j.epoch) continue;
        phase_end(j);
      }
      schedule();
    }
    return metrics();
  }

 private:
  void push(SimTime at, bool submit, std::size_t job, std::uint64_t epoch) {
    events_.push(Event{at, seq_++, submit, job, epoch});
  }

  void log(const std::string& what, const Job& j, const std::string& extra = {}) {
    std::string line = std::to_string(state_.now.count()) + " " + what + " " + j.id.str();
    if (!extra.empty()) line += " " + extra;
    digest_ = fnv1a(line + "\n", digest_);
    if (cfg_.keep_log) log_.push_back(std::move(line));
  }

  void enter(Job& j, Phase p, Duration d) {
    j.phase = p;
    j.phase_start = state_.now;
    push(state_.now + d, false, index_.at(j.id), j.epoch);
  }

  void begin_work(Job& j) {
    auto next = j.work;
    if (cfg_.checkpoint_interval) {
      auto c = *cfg_.checkpoint_interval;
      auto mark = (j.progress / c + 1) * c;
      if (mark < next) next = mark;
    }
    if (j.fail_mark && j.out.failures == 0 && *j.fail_mark > j.progress && *j.fail_mark <= next) next = *j.fail_mark;
    enter(j, Phase::Work, next - j.progress);
  }

  void phase_end(Job& j) {
    switch (j.phase) {
      case Phase::Startup:
      case Phase::Checkpoint:
        begin_work(j);
        return;
      case Phase::Work: {
        j.progress += state_.now - j.phase_start;
        if (j.fail_mark && j.out.failures == 0 && j.progress == *j.fail_mark) {
          failure(j);
        } else if (j.progress >= j.work) {
          state_.tasks.at(j.id).preemptible = false;
          log("teardown", j);
          enter(j, Phase::Teardown, j.costs.teardown);
        } else {
          j.snapshot = j.progress;
          ++j.out.checkpoints;
          ++checkpoints_;
          checkpoint_overhead_ += j.costs.checkpoint;
          log("checkpoint", j, std::to_string(j.progress.count()));
          enter(j, Phase::Checkpoint, j.costs.checkpoint);
        }
        return;
      }
      case Phase::Teardown:
        orch::finish(state_, j.id, TaskState::Completed);
        j.phase = Phase::Done;
        j.out.finish = state_.now;
        log("complete", j);
        return;
      case Phase::Idle:
      case Phase::Done:
        fail(Errc::InvalidState, "stray event for " + j.id.str());
    }
  }

  void failure(Job& j) {
    ++j.out.failures;
    ++recoveries_;
    Duration overhead;
    if (j.snapshot) {
      j.out.lost_work = j.progress - *j.snapshot;
      j.progress = *j.snapshot;
      overhead = j.costs.restore;
      log("fail", j, "restore " + std::to_string(j.progress.count()));
    } else {
      j.out.lost_work = j.progress;
      j.progress = Duration{0};
      overhead = j.costs.boot;
      log("fail", j, "restart");
    }
    j.out.restored_from = j.progress;
    j.out.recovery = overhead + j.out.lost_work;
    recovery_time_ += j.out.recovery;
    enter(j, Phase::Startup, overhead);
  }

  // Quick reject: nothing can be placed without a free slot unless some
  // waiting task outranks a preemptible running one.
  bool worth_scheduling() const {
    if (waiting_ == 0) return false;
    for (const auto& [id, n] : state_.cluster)
      if (n.free_slots() > 0) return true;
    if (!orch::permits_eviction(state_.policy)) return false;
    std::optional<std::int64_t> top, low;
    for (const auto& [id, t] : state_.tasks) {
      if (t.state == TaskState::Waiting || t.state == TaskState::Evicted) {
        if (!top || t.priority > *top) top = t.priority;
      } else if (t.state == TaskState::Running && t.preemptible) {
        if (!low || t.priority < *low) low = t.priority;
      }
    }
    return top && low && *top > *low;
  }

  void schedule() {
    while (worth_scheduling()) {
      auto step = orch::schedule_step(state_);
      if (step.empty()) return;
      std::map<NodeId, Duration> pending;  // eviction still clearing the slot
      for (const auto& d : step) {
        orch::apply(state_, d);
        std::visit([&](const auto& x) { act(x, pending); }, d);
      }
    }
  }

  void start(Job& j, const NodeId& node, Duration overhead, const char* what, std::map<NodeId, Duration>& pending) {
    if (auto it = pending.find(node); it != pending.end()) overhead += it->second;
    --waiting_;
    if (!j.out.first_start) j.out.first_start = state_.now;
    log(what, j, node.str());
    enter(j, Phase::Startup, overhead);
  }

  void act(const orch::decision::Deploy& d, std::map<NodeId, Duration>& pending) {
    auto& j = jobs_[index_.at(d.task)];
    start(j, d.node, j.costs.boot, "deploy", pending);
  }
  void act(const orch::decision::Resume& d, std::map<NodeId, Duration>& pending) {
    auto& j = jobs_[index_.at(d.task)];
    ++resumes_;
    start(j, d.node, j.costs.resume, "resume", pending);
  }
  void act(const orch::decision::Migrate& d, std::map<NodeId, Duration>& pending) {
    auto& j = jobs_[index_.at(d.task)];
    ++migrations_;
    ++j.out.migrations;
    start(j, d.to, j.costs.migrate, "migrate", pending);
  }
  void act(const orch::decision::Evict& d, std::map<NodeId, Duration>& pending) {
    auto& j = jobs_[index_.at(d.task)];
    if (j.phase == Phase::Work) j.progress += state_.now - j.phase_start;
    ++j.epoch;
    j.phase = Phase::Idle;
    ++j.out.evictions;
    ++evictions_;
    ++waiting_;
    pending[d.node] += j.costs.evict;
    log("evict", j, d.node.str());
  }

  SimMetrics metrics() {
    SimMetrics m;
    m.submitted = jobs_.size();
    std::optional<SimTime> first, last;
    double sum = 0;
    std::map<std::int64_t, std::pair<double, std::size_t>> by_prio;
    for (auto& j : jobs_) {
      if (!first || j.out.submit < *first) first = j.out.submit;
      if (j.out.finish) {
        ++m.completed;
        if (!last || *j.out.finish > *last) last = j.out.finish;
        auto c = to_seconds(j.out.completion());
        sum += c;
        by_prio[j.out.priority].first += c;
        ++by_prio[j.out.priority].second;
      } else {
        ++m.failed;
      }
      m.jobs.push_back(j.out);
    }
    if (first && last) m.makespan = *last - *first;
    if (m.completed > 0) {
      m.mean_completion_s = sum / static_cast<double>(m.completed);
      if (m.makespan.count() > 0) m.throughput_per_min = static_cast<double>(m.completed) / (to_seconds(m.makespan) / 60.0);
    }
    for (const auto& [p, v] : by_prio) m.mean_completion_by_priority[p] = v.first / static_cast<double>(v.second);
    m.checkpoints = checkpoints_;
    m.checkpoint_overhead = checkpoint_overhead_;
    m.recoveries = recoveries_;
    m.recovery_time = recovery_time_;
    m.evictions = evictions_;
    m.resumes = resumes_;
    m.migrations = migrations_;
    m.event_log = std::move(log_);
    m.event_digest = digest_;
    return m;
  }

  const SimConfig& cfg_;
  orch::SchedulerState state_;
  std::vector<Job> jobs_;
  std::map<TaskId, std::size_t> index_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  std::size_t waiting_ = 0;
  std::vector<std::string> log_;
  std::uint64_t digest_ = 0xcbf29ce484222325ull;
  std::size_t checkpoints_ = 0, recoveries_ = 0, evictions_ = 0, resumes_ = 0, migrations_ = 0;
  Duration checkpoint_overhead_{0}, recovery_time_{0};
};

}  // namespace

SimMetrics run_sim(const std::vector<TraceJob>& jobs, const SimConfig& cfg) { return Simulation(jobs, cfg).run(); }

void write_metrics(const std::filesystem::path& dir, const SimMetrics& m, const SimConfig& cfg) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "jobs.csv");
    if (!out) fail(Errc::StoreUnavailable, "cannot write " + (dir / "jobs.csv").string());
    out << "job_id,priority,submit_s,start_s,finish_s,completion_s,work_s,evictions,migrations,checkpoints,failures,"
           "lost_work_s\n";
    for (const auto& j : m.jobs) {
      out << j.job_id << ',' << j.priority << ',' << to_seconds(j.submit) << ','
          << (j.first_start ? std::to_string(to_seconds(*j.first_start)) : "") << ','
          << (j.finish ? std::to_string(to_seconds(*j.finish)) : "") << ',' << to_seconds(j.completion()) << ','
          << to_seconds(j.work) << ',' << j.evictions << ',' << j.migrations << ',' << j.checkpoints << ','
          << j.failures << ',' << to_seconds(j.lost_work) << '\n';
    }
  }
  {
    std::ofstream out(dir / "summary.json");
    if (!out) fail(Errc::StoreUnavailable, "cannot write " + (dir / "summary.json").string());
    json s = m.summary();
    s["config"] = cfg.to_json();
    out << s.dump(2) << '\n';
  }
  if (!m.event_log.empty()) {
    std::ofstream out(dir / "events.log");
    for (const auto& l : m.event_log) out << l << '\n';
  }
}

}  // namespace funky::sim
