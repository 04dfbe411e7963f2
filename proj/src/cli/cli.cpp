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

#include "funky/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "funky/orchestrator/orchestrator.hpp"
#include "funky/runtime/node.hpp"
#include "funky/sim/experiments.hpp"

namespace funky::cli {

using runtime::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;

  KvConfig load() const {
    KvConfig cfg;
    std::string path = config;
    if (path.empty())
      if (const char* env = std::getenv("FUNKY_CONFIG"); env && *env) path = env;
    if (!path.empty()) cfg = KvConfig::load(path);
    cfg.apply_overrides(overrides);
    return cfg;
  }
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--config", c.config, "Config file (default: $FUNKY_CONFIG)");
  app.add_option("--set", c.overrides, "Override a config key, key=value (repeatable)");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

double to_double(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(Errc::ParseError, "not a number: '" + s + "'");
  }
}

std::optional<Duration> interval_arg(const std::string& s) {
  if (s == "none") return std::nullopt;
  auto v = to_double(s);
  if (v <= 0) fail(Errc::ParseError, "interval must be positive or 'none'");
  return ceil_seconds(v);
}

runtime::Endpoint orchestrator_endpoint(const std::string& flag, const KvConfig& cfg) {
  if (!flag.empty()) return runtime::Endpoint::parse(flag);
  if (auto v = cfg.get("client.orchestrator")) return runtime::Endpoint::parse(*v);
  if (auto v = cfg.get("orchestrator.listen")) return runtime::Endpoint::parse(*v);
  fail(Errc::InvalidConfig, "no orchestrator endpoint (--orchestrator or client.orchestrator)");
}

json send(const runtime::Endpoint& ep, const std::string& verb, const json& args) {
  json req{{"id", 1}, {"command", verb}, {"args", args}};
  return runtime::unwrap(runtime::call(ep, req));
}

struct SimFlags {
  std::string policy;
  std::size_t vfpgas = 0;
  std::size_t per_node = 0;
  std::uint64_t seed = 0;
  std::string interval;
  std::string failures;
  std::string accel;
  double speedup = 0;
  double mem_cap = 0;
  std::string out;
  unsigned threads = 0;
};

void add_sim_flags(CLI::App& app, SimFlags& f, bool with_interval) {
  app.add_option("--seed", f.seed, "RNG seed")->required();
  app.add_option("--policy", f.policy, "fcfs | no_pre | pre_ev | pre_mg");
  app.add_option("--vfpgas", f.vfpgas, "Cluster size in vFPGAs");
  app.add_option("--per-node", f.per_node, "vFPGAs per node");
  app.add_option("--speedup", f.speedup, "FPGA speedup factor");
  app.add_option("--mem-cap", f.mem_cap, "FPGA memory cap, MiB");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--threads", f.threads, "Worker threads for experiment grids (0 = all cores)");
  if (with_interval) {
    app.add_option("--interval", f.interval, "Checkpoint interval in seconds, or none");
    app.add_option("--failures", f.failures, "none | uniform");
    app.add_option("--accel", f.accel, "Force every job's acceleration rate");
  }
}

sim::SimConfig sim_config(const KvConfig& cfg, const SimFlags& f) {
  auto c = sim::SimConfig::from_config(cfg);
  c.seed = f.seed;
  if (!f.policy.empty()) c.policy = orchestrator::policy_from_string(f.policy);
  if (f.vfpgas) c.n_vfpgas = f.vfpgas;
  if (f.per_node) c.vfpgas_per_node = f.per_node;
  if (f.speedup > 0) c.speedup = f.speedup;
  if (f.mem_cap > 0) c.mem_cap_mib = f.mem_cap;
  if (!f.interval.empty()) c.checkpoint_interval = interval_arg(f.interval);
  if (f.failures == "uniform") c.failures = sim::FailureModel::Uniform;
  else if (f.failures == "none") c.failures = sim::FailureModel::None;
  else if (!f.failures.empty()) fail(Errc::ParseError, "--failures must be none or uniform");
  if (!f.accel.empty()) c.accel_override = to_double(f.accel);
  return c;
}

std::string out_dir(const SimFlags& f, const KvConfig& cfg, const std::string& leaf) {
  if (!f.out.empty()) return f.out;
  return cfg.get_or("sim.out_dir", "out") + "/" + leaf;
}

void print_summary(std::ostream& out, const sim::SimMetrics& m) {
  out << std::fixed << std::setprecision(3);
  out << "completed           " << m.completed << "/" << m.submitted << "\n"
      << "makespan_s          " << to_seconds(m.makespan) << "\n"
      << "throughput_per_min  " << m.throughput_per_min << "\n"
      << "mean_completion_s   " << m.mean_completion_s << "\n";
  for (const auto& [p, v] : m.mean_completion_by_priority) out << "  priority " << std::setw(4) << p << "      " << v << "\n";
  out << "evictions           " << m.evictions << "\n"
      << "migrations          " << m.migrations << "\n"
      << "checkpoints         " << m.checkpoints << "\n"
      << "recoveries          " << m.recoveries << "\n"
      << "event_digest        " << hex64(m.event_digest) << "\n";
}

// ---- subcommand wiring ----

struct TaskFlags {
  std::string orchestrator;
  std::string task;
  std::string program;
  std::int64_t priority = 0;
  bool no_preempt = false;
  std::string node;
  std::uint32_t vfpga_num = 0;
  std::uint32_t split = 0;
  std::string path;
  double every = 0;
  std::string replica;
  double until_ms = -1;
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"funky: FPGA-aware orchestration over an emulated device model"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  add_common(app, common);

  std::function<void()> action;

  // node serve
  auto* node = app.add_subcommand("node", "Node runtime service")->require_subcommand(1);
  auto* node_serve = node->add_subcommand("serve", "Serve the node runtime until interrupted");
  std::string listen;
  node_serve->add_option("--listen", listen, "host:port (default node.listen)");
  node_serve->callback([&] {
    action = [&] {
      auto cfg = common.load();
      if (!listen.empty()) cfg.set("node.listen", listen);
      runtime::NodeDaemon d(runtime::NodeConfig::from_config(cfg));
      d.start();
      out << "node " << d.runtime().node_id() << " listening on " << d.endpoint().str() << std::endl;
      wait_for_signal();
      d.stop();
    };
  });

  // orchestrator serve
  auto* orch = app.add_subcommand("orchestrator", "Orchestrator service")->require_subcommand(1);
  auto* orch_serve = orch->add_subcommand("serve", "Serve the orchestrator until interrupted");
  std::string orch_listen;
  orch_serve->add_option("--listen", orch_listen, "host:port (default orchestrator.listen)");
  orch_serve->callback([&] {
    action = [&] {
      auto cfg = common.load();
      if (!orch_listen.empty()) cfg.set("orchestrator.listen", orch_listen);
      orchestrator::OrchestratorDaemon d(orchestrator::OrchestratorConfig::from_config(cfg));
      d.start();
      out << "orchestrator listening on " << d.endpoint().str() << std::endl;
      wait_for_signal();
      d.stop();
    };
  });

  // task <verb>
  auto* task = app.add_subcommand("task", "Orchestration services on a live deployment")->require_subcommand(1);
  TaskFlags tf;
  task->add_option("--orchestrator", tf.orchestrator, "host:port (default client.orchestrator)");
  auto verb = [&](const std::string& name, const std::string& help, bool needs_task) {
    auto* s = task->add_subcommand(name, help);
    auto* opt = s->add_option("task_id", tf.task, "Task id");
    if (needs_task) opt->required();
    return s;
  };
  auto* t_deploy = verb("deploy", "Submit a task for scheduling", true);
  t_deploy->add_option("--program", tf.program, "Program file (resolved on the node)")->required();
  t_deploy->add_option("--priority", tf.priority, "Priority, higher wins");
  t_deploy->add_flag("--no-preempt", tf.no_preempt, "Annotate funky.preemptible=false");
  t_deploy->add_option("--node", tf.node, "Pin to a node (funky.node_id)");
  t_deploy->add_option("--vfpga-num", tf.vfpga_num, "funky.vfpga_num");
  t_deploy->add_option("--split", tf.split, "Split transfers and kernels into this many chunks");
  verb("evict", "Evict a running task", true);
  verb("resume", "Resume an evicted task on its node", true);
  verb("migrate", "Move a task to another node", true)->add_option("--node", tf.node, "Destination")->required();
  auto* t_ck = verb("checkpoint", "Checkpoint a task (once, or periodically with --every)", true);
  t_ck->add_option("--path", tf.path, "Snapshot path in the node store");
  t_ck->add_option("--every", tf.every, "Register a periodic checkpoint, seconds");
  auto* t_restore = verb("restore", "Restore a task from a snapshot", true);
  t_restore->add_option("--path", tf.path, "Snapshot path")->required();
  t_restore->add_option("--node", tf.node, "Target node");
  auto* t_rep = verb("replicate", "Fork a running task onto another node", true);
  t_rep->add_option("--node", tf.node, "Destination")->required();
  t_rep->add_option("--replica", tf.replica, "Replica task id");
  verb("scale", "Change a task's vFPGA cap", true)->add_option("--vfpga-num", tf.vfpga_num, "New cap")->required();
  auto* t_run = verb("run", "Drive a task's emulated guest", true);
  t_run->add_option("--until-ms", tf.until_ms, "Stop at this task time");
  verb("status", "Cluster or task status", false);
  for (auto* s : task->get_subcommands({})) {
    s->callback([&, s] {
      action = [&, s] {
        auto cfg = common.load();
        auto ep = orchestrator_endpoint(tf.orchestrator, cfg);
        const auto name = s->get_name();
        json args = json::object();
        if (!tf.task.empty()) args["task_id"] = tf.task;
        std::string command = name;
        if (name == "deploy") {
          args["program_ref"] = tf.program;
          args["priority"] = tf.priority;
          json ann = json::object();
          if (tf.no_preempt) ann["funky.preemptible"] = "false";
          if (!tf.node.empty()) ann["funky.node_id"] = tf.node;
          if (tf.vfpga_num) ann["funky.vfpga_num"] = std::to_string(tf.vfpga_num);
          args["annotations"] = ann;
          if (tf.split) args["split"] = tf.split;
        } else if (name == "migrate" || name == "replicate" || (name == "restore" && !tf.node.empty())) {
          args["node"] = tf.node;
          if (!tf.replica.empty()) args["replica_id"] = tf.replica;
        } else if (name == "scale") {
          args["vfpga_num"] = tf.vfpga_num;
        } else if (name == "checkpoint") {
          if (tf.every > 0) {
            command = "periodic_checkpoint";
            args["interval_s"] = tf.every;
          } else if (tf.path.empty()) {
            throw CLI::RequiredError("--path or --every");
          }
        } else if (name == "run" && tf.until_ms >= 0) {
          args["until_ms"] = tf.until_ms;
        }
        if (!tf.path.empty()) args["path"] = tf.path;
        out << send(ep, command, args).dump(2) << "\n";
      };
    });
  }

  // sim
  auto* simc = app.add_subcommand("sim", "Trace-driven cluster simulation")->require_subcommand(1);
  SimFlags sf;
  std::string trace, counts, rates, intervals, batch, policies;
  std::size_t permutations = 20;
  double gap = 5;
  auto* s_run = simc->add_subcommand("run", "One simulation; writes jobs.csv, summary.json, events.log");
  s_run->add_option("--trace", trace, "Trace file")->required();
  add_sim_flags(*s_run, sf, true);
  s_run->callback([&] {
    action = [&] {
      auto kv = common.load();
      auto cfg = sim_config(kv, sf);
      auto m = sim::run_sim(sim::ingest_trace(trace), cfg);
      auto dir = out_dir(sf, kv, "run");
      sim::write_metrics(dir, m, cfg);
      out << "wrote " << dir << "\n";
      print_summary(out, m);
    };
  });
  auto* s_scal = simc->add_subcommand("scalability", "Throughput over cluster size and acceleration rate");
  s_scal->add_option("--trace", trace, "Trace file")->required();
  s_scal->add_option("--counts", counts, "vFPGA counts, comma separated");
  s_scal->add_option("--rates", rates, "Acceleration rates, comma separated");
  add_sim_flags(*s_scal, sf, false);
  s_scal->callback([&] {
    action = [&] {
      auto kv = common.load();
      auto cfg = sim_config(kv, sf);
      auto cs = sim::kDefaultVfpgaCounts;
      auto rs = sim::kDefaultAccelRates;
      if (!counts.empty()) {
        cs.clear();
        for (const auto& c : split_list(counts)) cs.push_back(static_cast<std::size_t>(to_double(c)));
      }
      if (!rates.empty()) {
        rs.clear();
        for (const auto& r : split_list(rates)) rs.push_back(to_double(r));
      }
      auto rows = sim::experiment_scalability(sim::ingest_trace(trace), cfg, cs, rs, sf.threads);
      auto dir = out_dir(sf, kv, "scalability");
      sim::write_scalability(dir, rows);
      out << "wrote " << dir << "\n" << std::fixed << std::setprecision(4) << "vfpgas";
      for (double r : rs) out << "  rate=" << std::setprecision(2) << r << std::setprecision(4);
      out << "\n";
      for (std::size_t i = 0; i < cs.size(); ++i) {
        out << std::setw(6) << cs[i];
        for (std::size_t k = 0; k < rs.size(); ++k) out << std::setw(11) << rows[i * rs.size() + k].throughput_per_min;
        out << "\n";
      }
    };
  });
  auto* s_faults = simc->add_subcommand("faults", "Mean completion under failures per checkpoint interval");
  s_faults->add_option("--trace", trace, "Trace file")->required();
  s_faults->add_option("--intervals", intervals, "Intervals in seconds, comma separated; none = no checkpoints");
  add_sim_flags(*s_faults, sf, false);
  s_faults->callback([&] {
    action = [&] {
      auto kv = common.load();
      auto jobs = sim::ingest_trace(trace);
      if (!sf.vfpgas && !kv.has("sim.vfpgas")) sf.vfpgas = std::max<std::size_t>(1, jobs.size());
      auto cfg = sim_config(kv, sf);
      auto iv = sim::kDefaultIntervals;
      if (!intervals.empty()) {
        iv.clear();
        for (const auto& s : split_list(intervals)) iv.push_back(interval_arg(s));
      }
      auto rows = sim::experiment_fault_tolerance(jobs, cfg, iv, sf.threads);
      auto dir = out_dir(sf, kv, "faults");
      sim::write_faults(dir, rows);
      out << "wrote " << dir << "\n"
          << "interval_s  success_s  restore_s  restart_s  overhead_s\n"
          << std::fixed << std::setprecision(1);
      for (const auto& r : rows)
        out << std::setw(10) << (r.interval ? std::to_string(static_cast<long long>(to_seconds(*r.interval))) : "none")
            << std::setw(11) << r.success_mean_s << std::setw(11) << r.restore_mean_s << std::setw(11)
            << r.restart_mean_s << std::setw(12) << r.success_overhead_s << "\n";
    };
  });
  auto* s_sched = simc->add_subcommand("scheduling", "Per-policy, per-priority mean completion over arrival orders");
  s_sched->add_option("--batch", batch, "Batch file in trace format")->required();
  s_sched->add_option("--permutations", permutations, "Arrival orders");
  s_sched->add_option("--gap", gap, "Seconds between arrivals");
  s_sched->add_option("--policies", policies, "Comma separated policies");
  add_sim_flags(*s_sched, sf, false);
  s_sched->callback([&] {
    action = [&] {
      auto kv = common.load();
      if (!sf.vfpgas && !kv.has("sim.vfpgas")) sf.vfpgas = 3;
      auto cfg = sim_config(kv, sf);
      sim::SchedulingWorkload w{sim::ingest_trace(batch), gap, permutations, sf.seed};
      std::vector<orchestrator::Policy> ps{std::begin(orchestrator::kAllPolicies), std::end(orchestrator::kAllPolicies)};
      if (!policies.empty()) {
        ps.clear();
        for (const auto& p : split_list(policies)) ps.push_back(orchestrator::policy_from_string(p));
      }
      auto rows = sim::experiment_scheduling(w, cfg, ps, sf.threads);
      auto dir = out_dir(sf, kv, "scheduling");
      sim::write_scheduling(dir, rows);
      out << "wrote " << dir << "\n" << "policy  priority  mean_completion_s  samples\n" << std::fixed << std::setprecision(1);
      for (const auto& r : rows)
        out << std::left << std::setw(8) << orchestrator::to_string(r.policy) << std::right << std::setw(8) << r.priority
            << std::setw(19) << r.mean_completion_s << std::setw(9) << r.samples << "\n";
    };
  });

  // trace generate
  auto* tr = app.add_subcommand("trace", "Trace utilities")->require_subcommand(1);
  auto* gen = tr->add_subcommand("generate", "Write a synthetic Borg-like trace");
  sim::GeneratorConfig g;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Trace file to write")->required();
  gen->add_option("--seed", g.seed, "RNG seed")->required();
  gen->add_option("--jobs", g.jobs, "Number of jobs");
  gen->add_option("--interarrival", g.mean_interarrival_s, "Mean seconds between submissions");
  gen->add_option("--dur-min", g.duration_min_s, "Shortest duration, s");
  gen->add_option("--dur-max", g.duration_max_s, "Longest duration, s");
  gen->add_option("--alpha", g.pareto_alpha, "Pareto shape");
  gen->add_option("--classes", g.priority_classes, "Priority classes");
  gen->add_option("--mem-min", g.mem_min_mib, "Smallest memory, MiB");
  gen->add_option("--mem-max", g.mem_max_mib, "Largest memory, MiB");
  gen->callback([&] {
    action = [&] {
      auto jobs = sim::generate_trace(g);
      sim::write_trace(gen_out, jobs);
      out << "wrote " << jobs.size() << " jobs to " << gen_out << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  try {
    if (action) action();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

int run_node(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"funky-node: node runtime for emulated FPGA tasks"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  add_common(app, common);
  std::function<void()> action;

  auto* serve = app.add_subcommand("serve", "Serve the runtime until interrupted");
  std::string listen;
  serve->add_option("--listen", listen, "host:port (default node.listen)");
  serve->callback([&] {
    action = [&] {
      auto cfg = common.load();
      if (!listen.empty()) cfg.set("node.listen", listen);
      runtime::NodeDaemon d(runtime::NodeConfig::from_config(cfg));
      d.start();
      out << "node " << d.runtime().node_id() << " listening on " << d.endpoint().str() << std::endl;
      wait_for_signal();
      d.stop();
    };
  });

  auto* call = app.add_subcommand("call", "Send one runtime command to a node and print the result");
  std::string ep, verb, task_id, args_text = "{}";
  call->add_option("--node", ep, "host:port")->required();
  call->add_option("command", verb, "Runtime command")->required();
  call->add_option("task_id", task_id, "Task id");
  call->add_option("--args", args_text, "Command arguments as a JSON object");
  call->callback([&] {
    action = [&] {
      json args = json::parse(args_text);
      if (!args.is_object()) fail(Errc::MalformedRequest, "--args must be a JSON object");
      if (!task_id.empty()) args["task_id"] = task_id;
      json req{{"id", 1}, {"command", verb}, {"args", args}};
      out << runtime::unwrap(runtime::call(runtime::Endpoint::parse(ep), req)).dump(2) << "\n";
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace funky::cli
