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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "funky/monitor/monitor.hpp"
#include "funky/orchestrator/orchestrator.hpp"
#include "funky/protocol/request.hpp"
#include "funky/runtime/node.hpp"
#include "funky/sim/experiments.hpp"
#include "support/random_program.hpp"
#include "support/random_request.hpp"
#include "support/scheduler_oracle.hpp"
#include "support/scheduler_states.hpp"

namespace {

using namespace funky;
using guest::TaskProgram;
using monitor::MonitorInstance;
using nlohmann::json;

const std::filesystem::path kData = FUNKY_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed checks; the first few are kept for the report.
struct Checks {
  bool ok = true;
  std::vector<std::string> notes;
  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (notes.size() < 4) notes.push_back(what);
  }
  Outcome outcome(const std::string& summary) const {
    std::string d = summary;
    for (const auto& n : notes) d += "; " + n;
    return {ok, d};
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("funky-acceptance-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

// ---- 1: sync-split ----

struct SplitRun {
  Duration sync_wait{0};
  SimTime total{0};
  std::uint64_t digest = 0;
};

SplitRun split_run(const TaskProgram& base, std::uint32_t n) {
  auto p = guest::split_chunks(base, n);
  SplitRun out;
  {
    fpga::FpgaDevice dev("d");
    MonitorInstance m(TaskId("t"), dev);
    m.boot(p);
    m.run();
    out.total = m.now();
    out.digest = m.guest().output_digest();
  }
  // Sync request right after the first kernel starts.
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(p);
  m.run(SimTime{0});
  for (const auto& s : m.schedule())
    if (s.kind == "EXECUTE") {
      m.run(s.start);
      break;
    }
  out.sync_wait = m.sync_fpga();
  return out;
}

Outcome ac1() {
  auto p = TaskProgram::load(kData / "programs" / "stream.json");
  auto r1 = split_run(p, 1), r32 = split_run(p, 32), r256 = split_run(p, 256);
  const double cut = 1.0 - to_seconds(r32.sync_wait) / to_seconds(r1.sync_wait);
  const double inc32 = to_seconds(r32.total) / to_seconds(r1.total) - 1.0;
  const double inc256 = to_seconds(r256.total) / to_seconds(r1.total) - 1.0;
  Checks c;
  c.expect(cut >= 0.96, "sync wait reduction below 96%");
  c.expect(inc32 < 0.005, "n=32 total increase not below 0.5%");
  c.expect(inc256 >= 0.04 && inc256 <= 0.07, "n=256 total increase outside 4-7%");
  c.expect(r1.digest == r32.digest && r1.digest == r256.digest, "chunking changed the output");
  return c.outcome(fmt("wait %.1f ms -> %.1f ms (cut %.2f%%), total +%.3f%% at n=32, +%.2f%% at n=256",
                       to_millis(r1.sync_wait), to_millis(r32.sync_wait), 100 * cut, 100 * inc32, 100 * inc256));
}

// ---- 2: eviction/resume calibration ----

TaskProgram stream_program(Bytes size) {
  auto p = TaskProgram::load(kData / "programs" / "stream.json");
  for (auto& b : p.buffers) b.size = size;
  for (auto& s : p.steps)
    if (auto* k = std::get_if<guest::call::EnqueueKernel>(&s.v)) k->bytes = size;
  return p;
}

// Evicts as the kernel finishes, with `in` sync and `out` dirty.
std::pair<monitor::EvictReport, monitor::ResumeReport> evict_after_kernel(Bytes size) {
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(stream_program(size));
  m.run(SimTime{0});
  for (const auto& s : m.schedule())
    if (s.kind == "EXECUTE") {
      m.run(s.end - Duration{1});  // before the read of `out` is dispatched
      break;
    }
  auto e = m.evict();
  auto r = m.resume();
  return {e, r};
}

Outcome ac2() {
  auto [e1000, r1000] = evict_after_kernel(1000 * MiB);
  auto [e1, r1] = evict_after_kernel(1 * MiB);
  const double ev = to_millis(e1000.transfer), rs = to_millis(r1000.resume), small = to_millis(e1.transfer);
  Checks c;
  c.expect(e1000.context.payload_bytes() == 1000 * MiB, "dirty payload is not 1000 MiB");
  c.expect(e1000.context.restore_bytes() == 2000 * MiB, "resume does not move 1000 MiB in + 1000 MiB out");
  c.expect(std::abs(ev / 177.2 - 1) <= 0.02, "evict outside 177.2 ms +-2%");
  c.expect(std::abs(rs / 340.8 - 1) <= 0.05, "resume outside 340.8 ms +-5%");
  c.expect(small <= 1.0, "evict(1 MiB) above 1 ms");
  return c.outcome(fmt("evict(1000 MiB) %.2f ms, resume %.2f ms (+%.0f ms reconfiguration), evict(1 MiB) %.3f ms", ev,
                       rs, to_millis(r1000.reconfig), small));
}

// ---- 3: checkpoint/restore round trip ----

Outcome ac3() {
  auto dir = temp_dir("ac3");
  monitor::SnapshotStore store(dir);
  std::mt19937_64 rng(3);
  std::size_t trials = 0, failures = 0, mid_kernel = 0;
  while (trials < 200) {
    auto p = testing::random_program(rng, {}, "p" + std::to_string(trials));
    std::uint64_t want;
    {
      fpga::FpgaDevice dev("d");
      MonitorInstance m(TaskId("t"), dev);
      m.boot(p);
      m.run();
      want = m.guest().output_digest();
    }
    fpga::FpgaDevice dev("d");
    MonitorInstance m(TaskId("t"), dev);
    m.boot(p);
    // Random point inside the first batch of device work, or a random number
    // of guest steps.
    if (rng() % 2) {
      m.run(SimTime{0});
      if (!m.schedule().empty()) {
        const auto lo = m.schedule().front().prep_start.count(), hi = m.schedule().back().end.count();
        m.run(SimTime{lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1))});
      }
    } else {
      m.run_steps(rng() % 40);
    }
    if (m.phase() != monitor::Phase::Running || m.completed()) continue;
    ++trials;
    if (!m.in_flight().empty()) ++mid_kernel;
    auto name = "s" + std::to_string(trials) + ".snap";
    m.checkpoint(store, name);
    m.kill();
    fpga::FpgaDevice fresh("f");
    auto r = MonitorInstance::restore(store.read(name), fresh);
    r.run();
    if (!r.completed() || r.guest().output_digest() != want) ++failures;
  }
  std::filesystem::remove_all(dir);
  Checks c;
  c.expect(failures == 0, std::to_string(failures) + " digest mismatches");
  return c.outcome(fmt("%zu restored runs, %zu mismatches, %zu snapshots taken with requests in flight", trials,
                       failures, mid_kernel));
}

// ---- 4: dirty-only minimality ----

struct FullImage {
  fpga::BufferId id;
  Bytes size;
  GuestAddr addr;
  fpga::BufferState state;
  fpga::Content content;
  bool operator==(const FullImage&) const = default;
};

// Everything the task owns on the device.
std::vector<FullImage> full_image(const fpga::FpgaDevice& dev, const TaskId& t) {
  std::vector<FullImage> out;
  for (auto id : dev.buffers_of(t)) {
    const auto* b = dev.find(id);
    out.push_back({id, b->size, b->guest_addr, b->state, dev.read(id)});
  }
  return out;
}

Outcome ac4() {
  std::mt19937_64 rng(4);
  testing::RandomProgramOptions opt;
  opt.max_size = 512 * KiB;
  std::size_t sequences = 0, size_mismatch = 0, state_mismatch = 0, with_fpga = 0;
  while (sequences < 10000) {
    auto p = testing::random_program(rng, opt);
    fpga::FpgaDevice dev("d");
    MonitorInstance m(TaskId("t"), dev);
    m.boot(p);
    m.run_steps(rng() % 30);
    if (m.phase() != monitor::Phase::Running || m.completed()) continue;
    ++sequences;
    m.sync_fpga();
    auto before = full_image(dev, TaskId("t"));
    Bytes dirty = 0;
    for (const auto& b : before)
      if (b.state == fpga::BufferState::Dirty) dirty += b.size;
    auto slot_state = [&]() -> std::optional<std::pair<fpga::RegisterFile, std::optional<fpga::Bitstream>>> {
      auto i = dev.slot_of(TaskId("t"));
      if (!i) return std::nullopt;
      return std::pair{dev.slot(*i).csr, dev.slot(*i).bitstream};
    };
    auto slot_before = slot_state();
    auto e = m.evict();
    if (e.context.has_fpga()) ++with_fpga;
    if (e.context.payload_bytes() != dirty) ++size_mismatch;
    m.resume();
    auto after = full_image(dev, TaskId("t"));
    const bool same = after == before && slot_state() == slot_before;
    if (!same) ++state_mismatch;
  }
  Checks c;
  c.expect(size_mismatch == 0, std::to_string(size_mismatch) + " context sizes differ from the dirty sum");
  c.expect(state_mismatch == 0, std::to_string(state_mismatch) + " post-resume states differ from the full image");
  return c.outcome(fmt("%zu sequences (%zu holding a vFPGA), %zu size mismatches, %zu state mismatches", sequences,
                       with_fpga, size_mismatch, state_mismatch));
}

// ---- 5: scheduler correctness ----

Outcome ac5() {
  Checks c;
  std::size_t states = 0, mismatches = 0;
  testing::SmallStateSpace space;
  for (auto p : orchestrator::kAllPolicies) {
    std::size_t bad = 0;
    states += testing::for_each_small_state(space, p, [&](const orchestrator::SchedulerState& s) {
      if (orchestrator::schedule_step(s) != testing::oracle_schedule_step(s)) ++bad;
    });
    if (bad) c.expect(false, std::string(orchestrator::to_string(p)) + " disagrees with the oracle");
    mismatches += bad;
  }

  // Random walk: submissions, completions and scheduling rounds.
  std::mt19937_64 rng(5);
  std::size_t steps = 0, double_booked = 0, invariant_errors = 0, decisions = 0;
  while (steps < 100000) {
    orchestrator::SchedulerState s;
    s.policy = orchestrator::kAllPolicies[rng() % 4];
    s.anti_thrash = Duration{static_cast<std::int64_t>(rng() % 3) * 4};
    const auto n_nodes = 1 + rng() % 4;
    for (std::size_t i = 0; i < n_nodes; ++i)
      s.add_node(NodeId("n" + std::to_string(i)), 1 + static_cast<std::uint32_t>(rng() % 3));
    int next_task = 0;
    for (int k = 0; k < 200 && steps < 100000; ++k, ++steps) {
      s.now += Duration{static_cast<std::int64_t>(rng() % 3)};
      if (rng() % 3 == 0) {
        orchestrator::TaskRecord t;
        t.task_id = TaskId("t" + std::to_string(next_task++));
        t.priority = static_cast<std::int64_t>(rng() % 4);
        t.preemptible = rng() % 5 != 0;
        t.submit_time = s.now;
        if (rng() % 8 == 0) t.pinned = NodeId("n" + std::to_string(rng() % n_nodes));
        s.submit(t);
      }
      if (rng() % 4 == 0) {
        std::vector<TaskId> running;
        for (const auto& [id, t] : s.tasks)
          if (t.state == orchestrator::TaskState::Running) running.push_back(id);
        if (!running.empty()) orchestrator::finish(s, running[rng() % running.size()], orchestrator::TaskState::Completed);
      }
      auto ds = orchestrator::schedule_step(s);
      decisions += ds.size();
      try {
        for (const auto& d : ds) orchestrator::apply(s, d);
        orchestrator::check_invariants(s);
      } catch (const Error&) {
        ++invariant_errors;
        break;
      }
      // Independent slot count.
      std::map<NodeId, std::uint32_t> used;
      for (const auto& [id, t] : s.tasks)
        if (t.state == orchestrator::TaskState::Running) ++used[*t.node];
      for (const auto& [id, n] : s.cluster)
        if (used[id] > n.slots) ++double_booked;
    }
  }
  c.expect(double_booked == 0, std::to_string(double_booked) + " double-booked slots");
  c.expect(invariant_errors == 0, std::to_string(invariant_errors) + " invariant violations");
  return c.outcome(fmt("%zu exhaustive states over 4 policies, %zu mismatches; %zu random steps, %zu decisions, "
                       "%zu double-booked",
                       states, mismatches, steps, decisions, double_booked));
}

// ---- 6: preemption benefit ----

std::map<orchestrator::Policy, double> high_priority_means(const std::string& batch, std::int64_t high) {
  sim::SchedulingWorkload w;
  w.jobs = sim::ingest_trace(kData / "traces" / batch);
  w.permutations = 20;
  w.seed = 7;
  sim::SimConfig cfg;
  cfg.n_vfpgas = 3;
  std::map<orchestrator::Policy, double> out;
  for (const auto& r : sim::experiment_scheduling(w, cfg))
    if (r.priority == high) out[r.policy] = r.mean_completion_s;
  return out;
}

Outcome ac6() {
  using orchestrator::Policy;
  auto m = high_priority_means("short_hp.csv", 10);
  Checks c;
  c.expect(m.size() == 4, "missing policy rows");
  c.expect(m[Policy::PRE_MG] < m[Policy::NO_PRE], "PRE_MG not below NO_PRE");
  c.expect(m[Policy::NO_PRE] < m[Policy::FCFS], "NO_PRE not below FCFS");
  c.expect(m[Policy::PRE_EV] <= m[Policy::NO_PRE], "PRE_EV above NO_PRE");
  auto l = high_priority_means("long_hp.csv", 10);
  return c.outcome(fmt("Short-HP high-priority means: FCFS %.1f s, NO_PRE %.1f s, PRE_EV %.1f s, PRE_MG %.1f s "
                       "(PRE_MG %.1f%% below NO_PRE); Long-HP PRE_EV %.1f s vs NO_PRE %.1f s",
                       m[Policy::FCFS], m[Policy::NO_PRE], m[Policy::PRE_EV], m[Policy::PRE_MG],
                       100 * (1 - m[Policy::PRE_MG] / m[Policy::NO_PRE]), l[Policy::PRE_EV], l[Policy::NO_PRE]));
}

// ---- 7: determinism and monotonicity ----

std::string joined_log(const sim::SimMetrics& m) {
  std::string s;
  for (const auto& l : m.event_log) s += l + "\n";
  return s;
}

Outcome ac7() {
  auto trace = sim::ingest_trace(kData / "traces" / "synthetic.csv");
  sim::SimConfig cfg;
  cfg.seed = 7;
  Checks c;
  auto a = sim::run_sim(trace, cfg), b = sim::run_sim(trace, cfg);
  c.expect(!a.event_log.empty() && joined_log(a) == joined_log(b), "event logs differ between identical runs");
  auto rows = sim::experiment_scalability(trace, cfg);
  const auto& counts = sim::kDefaultVfpgaCounts;
  const auto& rates = sim::kDefaultAccelRates;
  auto thr = [&](std::size_t ci, std::size_t ri) { return rows[ci * rates.size() + ri].throughput_per_min; };
  for (std::size_t ri = 0; ri < rates.size(); ++ri)
    for (std::size_t ci = 1; ci < counts.size(); ++ci)
      c.expect(thr(ci, ri) >= thr(ci - 1, ri), fmt("throughput drops from %zu to %zu vFPGAs at rate %.2f",
                                                   counts[ci - 1], counts[ci], rates[ri]));
  for (std::size_t ci = 0; ci < counts.size(); ++ci)
    for (std::size_t ri = 1; ri < rates.size(); ++ri)
      c.expect(thr(ci, ri) >= thr(ci, ri - 1), fmt("throughput drops from rate %.2f to %.2f at %zu vFPGAs",
                                                   rates[ri - 1], rates[ri], counts[ci]));
  const auto i32 = static_cast<std::size_t>(std::find(counts.begin(), counts.end(), 32) - counts.begin());
  const double ratio = thr(i32, 1) / thr(i32, 0);
  c.expect(ratio >= 1.05, "accel 25% vs 0% ratio below 1.05 at 32 vFPGAs");
  return c.outcome(fmt("%zu jobs, identical logs (%zu lines); throughput %.3f -> %.3f jobs/min over 1 -> 128 vFPGAs "
                       "at rate 0; ratio 25%%/0%% at 32 vFPGAs %.3f",
                       trace.size(), a.event_log.size(), thr(0, 0), thr(counts.size() - 1, 0), ratio));
}

// ---- 8: fault-tolerance curve ----

// Expected completion of one job with failure point uniform over 1-99% of
// its work, by midpoint quadrature of the recovery arithmetic.
double expected_completion(const sim::JobCosts& k, double work_s, std::optional<double> interval_s) {
  const int n = 4000;
  double acc = 0;
  const double ck = to_seconds(k.checkpoint), boot = to_seconds(k.boot), restore = to_seconds(k.restore);
  double marks = 0;
  if (interval_s) marks = std::ceil(work_s / *interval_s) - 1;
  for (int i = 0; i < n; ++i) {
    const double f = 0.01 + 0.98 * (i + 0.5) / n;
    const double t = f * work_s;
    double snap = interval_s ? std::floor(t / *interval_s) * *interval_s : 0;
    acc += (t - snap) + (snap > 0 ? restore : boot);
  }
  return boot + work_s + to_seconds(k.teardown) + marks * ck + acc / n;
}

Outcome ac8() {
  auto trace = sim::ingest_trace(kData / "traces" / "synthetic.csv");
  sim::SimConfig cfg;
  cfg.n_vfpgas = trace.size();
  cfg.seed = 7;
  auto rows = sim::experiment_fault_tolerance(trace, cfg);
  const auto& none = rows.back();
  Checks c;
  std::string curve;
  double worst = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.interval) {
      c.expect(r.restore_mean_s < none.restore_mean_s, "interval does not beat no checkpointing");
      if (i > 0) c.expect(r.success_overhead_s < rows[i - 1].success_overhead_s, "Success overhead not decreasing");
    }
    std::optional<double> iv;
    if (r.interval) iv = to_seconds(*r.interval);
    double oracle = 0;
    for (const auto& j : trace) {
      auto f = sim::fpgaize(j, cfg.speedup, cfg.mem_cap_mib);
      oracle += expected_completion(sim::job_costs(cfg, f.fpga_mem_mib), to_seconds(ceil_seconds(f.fpga_duration_s)), iv);
    }
    oracle /= static_cast<double>(trace.size());
    const double err = std::abs(r.restore_mean_s / oracle - 1);
    worst = std::max(worst, err);
    c.expect(err <= 0.05, "mean completion more than 5% from the analytic value");
    curve += fmt(" %s:%.0f/%.0f", r.interval ? std::to_string(static_cast<long long>(to_seconds(*r.interval))).c_str()
                                             : "none",
                 r.restore_mean_s, r.success_overhead_s);
  }
  return c.outcome("interval:mean/overhead s" + curve + fmt("; worst oracle error %.2f%%", 100 * worst));
}

// ---- 9: protocol robustness ----

// 3 nodes with one slot each; commands go to the orchestrator.
std::vector<json> scenario() {
  std::vector<json> s;
  int id = 0;
  auto add = [&](const std::string& command, json args = json::object()) {
    s.push_back(json{{"id", ++id}, {"command", command}, {"args", args}});
  };
  auto t = [](const std::string& id, json extra = json::object()) {
    extra["task_id"] = id;
    return extra;
  };
  add("deploy", t("a", {{"priority", 0}, {"program_ref", "vadd.json"}}));
  add("deploy", t("b", {{"priority", 1}, {"program_ref", "mmult.json"}}));
  add("deploy", t("c", {{"priority", 2}, {"program_ref", "vadd.json"}, {"split", 4}}));
  add("status");
  add("step", t("a", {{"steps", 6}}));
  add("deploy", t("d", {{"priority", 5}, {"program_ref", "vadd.json"}}));  // evicts a
  add("status", t("a"));
  add("run", t("d"));
  add("poll");  // d completes, a resumes
  add("status");
  add("checkpoint", t("b", {{"path", "b1.snap"}}));
  add("periodic_checkpoint", t("c", {{"interval_s", 60}}));
  add("tick", {{"now_s", 61}});
  add("tick", {{"now_s", 130}});
  add("step", t("c", {{"steps", 3}}));
  add("evict", t("b"));
  add("status", t("b"));
  add("schedule");  // b is held
  add("resume", t("b"));
  add("run", t("a"));
  add("poll");
  add("migrate", t("b", {{"node", "node-0"}}));
  add("status", t("b"));
  add("scale", t("b", {{"vfpga_num", 2}}));
  add("run", t("c", {{"until_ms", 2}}));
  add("fail", t("c", {{"now_s", 125}}));  // back to the 120 s snapshot
  add("status", t("c"));
  add("run", t("c"));
  add("deploy", t("e", {{"priority", 0}, {"program_ref", "vadd.json"}, {"annotations", {{"funky.preemptible", "false"}}}}));
  add("evict", t("e"));  // refused
  add("deploy", t("f", {{"priority", 3}, {"program_ref", "mmult.json"}}));
  add("poll");
  add("run", t("e"));
  add("poll");  // frees node-1
  add("replicate", t("f", {{"node", "node-1"}}));
  add("evict", t("nobody"));
  add("launch");
  add("status", t("f-replica"));
  add("run", t("f"));
  add("run", t("f-replica"));
  add("poll");
  add("checkpoint", t("b", {{"path", "b2.snap"}}));
  add("kill", t("b"));  // not an orchestrator verb
  add("evict", t("b"));
  add("restore", t("b", {{"path", "b2.snap"}, {"node", "node-2"}}));
  add("status", t("b"));
  add("run", t("b"));
  add("poll");
  add("step", {{"steps", 1}});
  add("status");
  return s;
}

struct Deployment {
  explicit Deployment(const std::filesystem::path& dir) {
    for (int i = 0; i < 3; ++i) {
      runtime::NodeConfig c;
      c.node_id = "node-" + std::to_string(i);
      c.snapshot_dir = dir;
      c.program_dirs = {kData / "programs"};
      configs.push_back(c);
    }
  }
  std::vector<runtime::NodeConfig> configs;
};

std::vector<json> run_in_process(const std::filesystem::path& dir, std::vector<json>& node_status) {
  Deployment d(dir);
  std::vector<std::unique_ptr<runtime::NodeRuntime>> nodes;
  runtime::InProcessPeers peers;
  for (auto& c : d.configs) nodes.push_back(std::make_unique<runtime::NodeRuntime>(c));
  for (auto& n : nodes) {
    peers.add(*n);
    n->set_peers(&peers);
  }
  orchestrator::Orchestrator orch(peers, orchestrator::Policy::PRE_MG);
  for (auto& n : nodes) orch.add_node(NodeId(n->node_id()), 1);
  std::vector<json> out;
  for (const auto& req : scenario()) out.push_back(orch.handle(req));
  for (auto& n : nodes) node_status.push_back(n->handle(json{{"id", 0}, {"command", "status"}, {"args", json::object()}}));
  return out;
}

std::vector<json> run_live(const std::filesystem::path& dir, std::vector<json>& node_status) {
  Deployment d(dir);
  std::vector<std::unique_ptr<runtime::NodeDaemon>> nodes;
  for (auto& c : d.configs) {
    c.listen = runtime::Endpoint{"127.0.0.1", 0};
    nodes.push_back(std::make_unique<runtime::NodeDaemon>(c));
    nodes.back()->start();
  }
  for (auto& n : nodes)
    for (auto& peer : nodes) n->add_peer(peer->runtime().node_id(), peer->endpoint());
  orchestrator::OrchestratorConfig oc;
  oc.listen = runtime::Endpoint{"127.0.0.1", 0};
  oc.tick = Duration{24ll * 3600 * 1'000'000};
  for (auto& n : nodes) {
    oc.nodes[n->runtime().node_id()] = n->endpoint();
    oc.slots[n->runtime().node_id()] = 1;
  }
  orchestrator::OrchestratorDaemon daemon(oc);
  daemon.start();
  std::vector<json> out;
  for (const auto& req : scenario()) out.push_back(runtime::call(daemon.endpoint(), req));
  for (auto& n : nodes)
    node_status.push_back(runtime::call(n->endpoint(), json{{"id", 0}, {"command", "status"}, {"args", json::object()}}));
  daemon.stop();
  for (auto& n : nodes) n->stop();
  return out;
}

Outcome ac9() {
  Checks c;
  // Fuzzed bytes: random strings and mutated valid encodings.
  std::mt19937_64 rng(9);
  std::size_t decoded = 0, rejected = 0, crashes = 0, roundtrip_bad = 0;
  for (int i = 0; i < 100000; ++i) {
    std::vector<std::uint8_t> bytes;
    if (i % 2 == 0) {
      bytes.resize(rng() % 96);
      for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    } else {
      bytes = protocol::encode(testing::random_request(rng));
      const auto flips = 1 + rng() % 4;
      for (std::size_t k = 0; k < flips && !bytes.empty(); ++k) bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      if (rng() % 4 == 0) bytes.resize(rng() % (bytes.size() + 1));
    }
    try {
      auto r = protocol::decode(bytes);
      ++decoded;
      if (protocol::decode(protocol::encode(r)) != r) ++roundtrip_bad;
    } catch (const Error&) {
      ++rejected;
    } catch (...) {
      ++crashes;
    }
  }
  std::size_t valid_bad = 0;
  for (int i = 0; i < 20000; ++i) {
    auto r = testing::random_request(rng);
    if (protocol::decode(protocol::encode(r)) != r) ++valid_bad;
  }
  c.expect(crashes == 0, std::to_string(crashes) + " decodes escaped with a non-protocol error");
  c.expect(roundtrip_bad == 0 && valid_bad == 0, "encodings that do not round-trip");

  // Live path against in-process.
  auto dir = temp_dir("ac9");
  std::vector<json> status_a, status_b;
  auto in_proc = run_in_process(dir, status_a);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto live = run_live(dir, status_b);
  std::filesystem::remove_all(dir);
  std::size_t differ = 0, ok = 0;
  std::string refused;
  for (std::size_t i = 0; i < in_proc.size(); ++i) {
    if (in_proc[i] != live[i]) {
      ++differ;
      c.expect(false, "command " + std::to_string(i + 1) + " differs: " + in_proc[i].dump() + " vs " + live[i].dump());
    }
    if (in_proc[i].value("ok", false)) ++ok;
    else refused += (refused.empty() ? "" : ",") + std::to_string(i + 1);
  }
  c.expect(status_a == status_b, "final node states differ");
  c.expect(in_proc.size() == 50, "scenario is not 50 commands");
  return c.outcome(fmt("%zu fuzz inputs decoded, %zu rejected, %zu crashes; %zu-command scenario, %zu ok "
                       "(errors at %s), %zu differences in-process vs 3 node daemons + orchestrator over TCP",
                       decoded, rejected, crashes, in_proc.size(), ok, refused.c_str(), differ));
}

struct Criterion {
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only(argv + 1, argv + argc);
  const std::vector<Criterion> criteria{
      {"AC1 sync-split", 5, ac1},          {"AC2 evict/resume calibration", 1, ac2},
      {"AC3 checkpoint round trip", 60, ac3}, {"AC4 dirty-only minimality", 60, ac4},
      {"AC5 scheduler correctness", 120, ac5}, {"AC6 preemption benefit", 60, ac6},
      {"AC7 sim determinism/monotonicity", 600, ac7}, {"AC8 fault-tolerance curve", 300, ac8},
      {"AC9 protocol robustness", 300, ac9}};
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(std::string(c.name).substr(0, 3))) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) {
      o.pass = false;
      o.detail += fmt("; took longer than %.0f s", c.limit_s);
    }
    std::printf("%s %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed;
}
