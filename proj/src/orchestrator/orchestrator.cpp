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

#include "funky/orchestrator/orchestrator.hpp"

#include <algorithm>

namespace funky::orchestrator {

using runtime::RuntimeCommand;
using runtime::unwrap;

namespace {

const std::string& need_str(const json& args, const char* key, std::string_view verb) {
  if (!args.contains(key) || !args.at(key).is_string())
    fail(Errc::MalformedRequest, std::string(verb) + " needs a string '" + key + "'");
  return args.at(key).get_ref<const std::string&>();
}

SimTime seconds_arg(const json& args, const char* key, std::string_view verb) {
  if (!args.contains(key) || !args.at(key).is_number())
    fail(Errc::MalformedRequest, std::string(verb) + " needs a number '" + key + "'");
  return ceil_seconds(args.at(key).get<double>());
}

}  // namespace

DeployRequest DeployRequest::from_json(const json& args) {
  DeployRequest r;
  r.task = TaskId(need_str(args, "task_id", "deploy"));
  r.priority = args.value("priority", std::int64_t{0});
  r.annotations = runtime::Annotations::parse(args.value("annotations", json::object()));
  for (const char* k : {"program_ref", "program", "split"})
    if (args.contains(k)) r.program[k] = args.at(k);
  if (!r.program.contains("program_ref") && !r.program.contains("program"))
    fail(Errc::MalformedRequest, "deploy needs program_ref or program");
  return r;
}

OrchestratorConfig OrchestratorConfig::from_config(const KvConfig& cfg) {
  OrchestratorConfig c;
  c.policy = policy_from_string(cfg.get_or("scheduler.policy", "pre_mg"));
  c.anti_thrash = ceil_seconds(cfg.number("scheduler.anti_thrash_s", 0));
  if (auto l = cfg.get("orchestrator.listen")) c.listen = runtime::Endpoint::parse(*l);
  if (cfg.has("orchestrator.tick_ms")) c.tick = ceil_millis(cfg.number("orchestrator.tick_ms", 1000));
  for (const auto& [k, v] : cfg.with_prefix("cluster.")) {
    if (k.ends_with(".slots")) continue;
    c.nodes[k] = runtime::Endpoint::parse(v);
    c.slots[k] = static_cast<std::uint32_t>(cfg.integer("cluster." + k + ".slots", 1));
  }
  return c;
}

Orchestrator::Orchestrator(runtime::PeerDirectory& nodes, Policy policy, Duration anti_thrash) : nodes_(nodes) {
  state_.policy = policy;
  state_.anti_thrash = anti_thrash;
}

void Orchestrator::add_node(const NodeId& node, std::uint32_t slots) {
  std::lock_guard lk(mu_);
  state_.add_node(node, slots);
}

SchedulerState Orchestrator::state() const {
  std::lock_guard lk(mu_);
  return state_;
}

std::vector<std::string> Orchestrator::decision_log() const {
  std::lock_guard lk(mu_);
  return log_;
}

json Orchestrator::node_call(const NodeId& node, const std::string& verb, const TaskId* task, json args) {
  RuntimeCommand cmd{verb, task ? std::optional<TaskId>(*task) : std::nullopt, std::move(args)};
  return unwrap(nodes_.call(node.str(), cmd.to_json(++seq_)));
}

TaskRecord& Orchestrator::record(const TaskId& t) {
  auto it = state_.tasks.find(t);
  if (it == state_.tasks.end()) fail(Errc::UnknownTask, "unknown task " + t.str());
  return it->second;
}

void Orchestrator::need_preemptible(const TaskRecord& r, std::string_view verb) const {
  if (!r.preemptible)
    fail(Errc::NotPreemptible, std::string(verb) + " refused: " + r.task_id.str() + " is not preemptible");
}

json Orchestrator::deploy(const DeployRequest& req) {
  std::lock_guard lk(mu_);
  TaskRecord r;
  r.task_id = req.task;
  r.priority = req.priority;
  r.preemptible = req.annotations.preemptible;
  r.vfpga_num = req.annotations.vfpga_num;
  r.submit_time = state_.now;
  if (req.annotations.node_id) {
    NodeId pin(*req.annotations.node_id);
    if (!state_.cluster.contains(pin)) fail(Errc::InvalidConfig, "funky.node_id names unknown node " + pin.str());
    r.pinned = pin;
  }
  state_.submit(r);
  specs_[req.task] = req;
  log_.push_back("submit " + req.task.str() + " prio " + std::to_string(req.priority));
  schedule();
  return record_json(record(req.task));
}

void Orchestrator::execute(const SchedulingDecision& d) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, decision::Deploy>) {
          const auto& spec = specs_.at(x.task);
          json args = spec.program;
          args["priority"] = spec.priority;
          args["annotations"] = spec.annotations.to_json();
          node_call(x.node, "create", &x.task, args);
          node_call(x.node, "start", &x.task);
        } else if constexpr (std::is_same_v<T, decision::Resume>) {
          node_call(x.node, "resume", &x.task);
        } else if constexpr (std::is_same_v<T, decision::Migrate>) {
          json args{{"from_node", x.from.str()}};
          if (auto it = specs_.find(x.task); it != specs_.end()) args["annotations"] = it->second.annotations.to_json();
          node_call(x.to, "restore", &x.task, args);
        } else {
          node_call(x.node, "evict", &x.task);
        }
      },
      d);
  apply(state_, d);
  log_.push_back(describe(d));
}

std::vector<SchedulingDecision> Orchestrator::schedule() {
  std::lock_guard lk(mu_);
  std::vector<SchedulingDecision> done;
  for (;;) {
    auto step = schedule_step(state_);
    if (step.empty()) break;
    for (const auto& d : step) {
      try {
        execute(d);
      } catch (const Error& e) {
        log_.push_back("failed " + describe(d) + ": " + e.what());
        if (auto* dep = std::get_if<decision::Deploy>(&d)) {
          // The node could not host it; drop the task rather than retrying forever.
          finish(state_, dep->task, TaskState::Failed);
          break;
        }
        throw;
      }
      done.push_back(d);
    }
  }
  return done;
}

json Orchestrator::evict(const TaskId& t) {
  std::lock_guard lk(mu_);
  auto& r = record(t);
  need_preemptible(r, "evict");
  if (r.state != TaskState::Running) fail(Errc::AlreadyEvicted, t.str() + " is " + std::string(to_string(r.state)));
  auto res = node_call(*r.node, "evict", &t);
  apply(state_, decision::Evict{t, *r.node});
  r.held = true;
  log_.push_back("evict " + t.str() + " on " + r.context_node->str() + " (requested)");
  schedule();
  return res;
}

json Orchestrator::resume(const TaskId& t) {
  std::lock_guard lk(mu_);
  auto& r = record(t);
  need_preemptible(r, "resume");
  if (r.state != TaskState::Evicted) fail(Errc::AlreadyRunning, t.str() + " is " + std::string(to_string(r.state)));
  auto node = *r.context_node;
  if (state_.cluster.at(node).free_slots() == 0) fail(Errc::NoFreeSlot, "no free slot on " + node.str());
  auto res = node_call(node, "resume", &t);
  apply(state_, decision::Resume{t, node});
  log_.push_back("resume " + t.str() + " on " + node.str() + " (requested)");
  return res;
}

json Orchestrator::migrate(const TaskId& t, const NodeId& dest) {
  std::lock_guard lk(mu_);
  auto& r = record(t);
  need_preemptible(r, "migrate");
  if (!state_.cluster.contains(dest)) fail(Errc::InvalidState, "unknown node " + dest.str());
  if (r.state != TaskState::Running && r.state != TaskState::Evicted)
    fail(Errc::InvalidState, t.str() + " is " + std::string(to_string(r.state)));
  auto source = r.state == TaskState::Running ? *r.node : *r.context_node;
  if (source == dest) fail(Errc::InvalidState, t.str() + " is already on " + dest.str());
  if (state_.cluster.at(dest).free_slots() == 0) fail(Errc::NoFreeSlot, "no free slot on " + dest.str());
  json evicted;
  if (r.state == TaskState::Running) {
    evicted = node_call(source, "evict", &t);
    apply(state_, decision::Evict{t, source});
  }
  json args{{"from_node", source.str()}};
  if (auto it = specs_.find(t); it != specs_.end()) args["annotations"] = it->second.annotations.to_json();
  auto res = node_call(dest, "restore", &t, args);
  apply(state_, decision::Migrate{t, source, dest});
  log_.push_back("migrate " + t.str() + " " + source.str() + "->" + dest.str() + " (requested)");
  if (!evicted.is_null()) res["evict"] = evicted;
  schedule();
  return res;
}

json Orchestrator::checkpoint(const TaskId& t, const std::string& path) {
  std::lock_guard lk(mu_);
  auto& r = record(t);
  need_preemptible(r, "checkpoint");
  if (r.state != TaskState::Running && r.state != TaskState::Evicted)
    fail(Errc::InvalidState, t.str() + " is " + std::string(to_string(r.state)));
  auto node = r.state == TaskState::Running ? *r.node : *r.context_node;
  auto res = node_call(node, "checkpoint", &t, {{"path", path}});
  log_.push_back("checkpoint " + t.str() + " -> " + path);
  return res;
}

json Orchestrator::restore(const TaskId& t, const std::string& path, std::optional<NodeId> node) {
  std::lock_guard lk(mu_);
  auto it = state_.tasks.find(t);
  if (it != state_.tasks.end()) {
    need_preemptible(it->second, "restore");
    if (it->second.state == TaskState::Running)
      fail(Errc::AlreadyRunning, t.str() + " is running on " + it->second.node->str());
  }
  if (!node) {
    TaskRecord probe;
    probe.task_id = t;
    if (it != state_.tasks.end()) probe = it->second;
    probe.state = TaskState::Waiting;
    node = select_node(probe, state_);
    if (!node || state_.cluster.at(*node).free_slots() == 0) fail(Errc::NoFreeSlot, "no free slot for " + t.str());
  }
  if (!state_.cluster.contains(*node)) fail(Errc::InvalidState, "unknown node " + node->str());
  if (state_.cluster.at(*node).free_slots() == 0) fail(Errc::NoFreeSlot, "no free slot on " + node->str());
  if (it != state_.tasks.end() && it->second.state == TaskState::Evicted) {
    // Superseded context: drop it before the file copy takes over.
    try {
      node_call(*it->second.context_node, "drop_context", &t);
    } catch (const Error&) {
    }
  }
  json args{{"path", path}};
  if (auto s = specs_.find(t); s != specs_.end()) args["annotations"] = s->second.annotations.to_json();
  auto res = node_call(*node, "restore", &t, args);
  if (it == state_.tasks.end()) {
    TaskRecord r;
    r.task_id = t;
    r.priority = res.value("priority", std::int64_t{0});
    r.submit_time = state_.now;
    state_.submit(r);
    it = state_.tasks.find(t);
  } else {
    it->second.state = TaskState::Waiting;
    it->second.context_node.reset();
    it->second.node.reset();
  }
  apply(state_, decision::Deploy{t, *node});
  log_.push_back("restore " + t.str() + " on " + node->str() + " <- " + path);
  return res;
}

json Orchestrator::replicate(const TaskId& t, const NodeId& dest, std::optional<TaskId> replica) {
  std::lock_guard lk(mu_);
  auto& r = record(t);
  need_preemptible(r, "replicate");
  if (r.state != TaskState::Running && r.state != TaskState::Evicted)
    fail(Errc::InvalidState, t.str() + " is " + std::string(to_string(r.state)));
  TaskId rid = replica.value_or(TaskId(t.str() + "-replica"));
  if (state_.tasks.contains(rid)) fail(Errc::TaskExists, rid.str() + " already exists");
  if (!state_.cluster.contains(dest)) fail(Errc::InvalidState, "unknown node " + dest.str());
  if (state_.cluster.at(dest).free_slots() == 0) fail(Errc::NoFreeSlot, "no free slot on " + dest.str());
  auto source = r.state == TaskState::Running ? *r.node : *r.context_node;
  auto forked = node_call(source, "replicate", &t, {{"replica_id", rid.str()}});
  json args{{"from_node", source.str()}};
  auto spec = specs_.contains(t) ? specs_.at(t) : DeployRequest{};
  args["annotations"] = spec.annotations.to_json();
  auto res = node_call(dest, "restore", &rid, args);
  TaskRecord copy;
  copy.task_id = rid;
  copy.priority = r.priority;
  copy.preemptible = r.preemptible;
  copy.vfpga_num = r.vfpga_num;
  copy.submit_time = state_.now;
  state_.submit(copy);
  spec.task = rid;
  specs_[rid] = spec;
  apply(state_, decision::Deploy{rid, dest});
  log_.push_back("replicate " + t.str() + " -> " + rid.str() + " on " + dest.str());
  res["source"] = forked;
  return res;
}

json Orchestrator::scale(const TaskId& t, std::uint32_t vfpga_num) {
  std::lock_guard lk(mu_);
  auto& r = record(t);
  need_preemptible(r, "scale");
  if (vfpga_num == 0) fail(Errc::MalformedRequest, "vfpga_num must be at least 1");
  if (r.state != TaskState::Running && r.state != TaskState::Evicted)
    fail(Errc::InvalidState, t.str() + " is " + std::string(to_string(r.state)));
  auto node = r.state == TaskState::Running ? *r.node : *r.context_node;
  auto res = node_call(node, "update", &t, {{"vfpga_num", vfpga_num}});
  r.vfpga_num = vfpga_num;
  if (auto it = specs_.find(t); it != specs_.end()) it->second.annotations.vfpga_num = vfpga_num;
  log_.push_back("scale " + t.str() + " to " + std::to_string(vfpga_num));
  return res;
}

void Orchestrator::periodic_checkpoint(const TaskId& t, Duration interval) {
  std::lock_guard lk(mu_);
  need_preemptible(record(t), "periodic checkpoint");
  if (interval.count() <= 0) fail(Errc::MalformedRequest, "checkpoint interval must be positive");
  auto& timer = timers_[t];
  timer.interval = interval;
  timer.next_due = state_.now + interval;
}

const CheckpointTimer* Orchestrator::timer(const TaskId& t) const {
  std::lock_guard lk(mu_);
  auto it = timers_.find(t);
  return it == timers_.end() ? nullptr : &it->second;
}

json Orchestrator::run(const TaskId& t, std::optional<double> until_ms) {
  std::lock_guard lk(mu_);
  auto& r = record(t);
  if (r.state != TaskState::Running) fail(Errc::InvalidState, t.str() + " is " + std::string(to_string(r.state)));
  json args = json::object();
  if (until_ms) args["until_ms"] = *until_ms;
  return node_call(*r.node, "run", &t, args);
}

json Orchestrator::step(const TaskId& t, std::size_t steps) {
  std::lock_guard lk(mu_);
  auto& r = record(t);
  if (r.state != TaskState::Running) fail(Errc::InvalidState, t.str() + " is " + std::string(to_string(r.state)));
  return node_call(*r.node, "step", &t, {{"steps", steps}});
}

std::vector<json> Orchestrator::tick(SimTime now) {
  std::lock_guard lk(mu_);
  if (now > state_.now) state_.now = now;
  std::vector<json> taken;
  for (auto& [id, timer] : timers_) {
    while (timer.next_due <= state_.now) {
      const auto& r = state_.tasks.at(id);
      auto due = timer.next_due;
      timer.next_due += timer.interval;
      if (r.state != TaskState::Running && r.state != TaskState::Evicted) continue;
      auto node = r.state == TaskState::Running ? *r.node : *r.context_node;
      auto path = id.str() + "-" + std::to_string(due.count()) + ".snap";
      auto res = node_call(node, "checkpoint", &id, {{"path", path}});
      timer.history.push_back({due, path, node});
      log_.push_back("periodic checkpoint " + id.str() + " @" + std::to_string(due.count()) + "us");
      res["due_us"] = due.count();
      taken.push_back(res);
    }
  }
  return taken;
}

json Orchestrator::on_failure(const TaskId& t, SimTime now) {
  std::lock_guard lk(mu_);
  auto& r = record(t);
  if (r.state != TaskState::Running) fail(Errc::InvalidState, t.str() + " is " + std::string(to_string(r.state)));
  auto node = *r.node;
  try {
    node_call(node, "kill", &t);
  } catch (const Error&) {
    // Already gone on the node.
  }
  log_.push_back("failure " + t.str() + " on " + node.str() + " @" + std::to_string(now.count()) + "us");
  const SnapshotRecord* latest = nullptr;
  if (auto it = timers_.find(t); it != timers_.end())
    for (const auto& s : it->second.history)
      if (s.at <= now && (!latest || s.at > latest->at)) latest = &s;
  if (!latest) {
    finish(state_, t, TaskState::Failed);
    schedule();
    return {{"task_id", t.str()}, {"recovered", false}};
  }
  auto path = latest->path;
  auto at = latest->at;
  auto snapshot_node = latest->node;
  r.state = TaskState::Waiting;
  auto& n = state_.cluster.at(node);
  n.running.erase(std::remove(n.running.begin(), n.running.end(), t), n.running.end());
  r.node.reset();
  json args{{"path", path}};
  if (auto s = specs_.find(t); s != specs_.end()) args["annotations"] = s->second.annotations.to_json();
  auto res = node_call(snapshot_node, "restore", &t, args);
  apply(state_, decision::Deploy{t, snapshot_node});
  log_.push_back("auto-restore " + t.str() + " from " + path);
  res["recovered"] = true;
  res["snapshot_path"] = path;
  res["snapshot_at_us"] = at.count();
  return res;
}

json Orchestrator::poll() {
  std::lock_guard lk(mu_);
  json finished = json::array(), failed = json::array();
  for (const auto& [nid, n] : std::map<NodeId, NodeInfo>(state_.cluster)) {
    if (n.running.empty()) continue;
    json st;
    try {
      st = node_call(nid, "status", nullptr);
    } catch (const Error&) {
      continue;  // unreachable this round
    }
    std::map<std::string, json> by_id;
    for (const auto& tj : st.at("tasks")) by_id[tj.at("task_id").get<std::string>()] = tj;
    for (const auto& id : n.running) {
      auto it = by_id.find(id.str());
      if (it != by_id.end() && it->second.value("completed", false)) {
        node_call(nid, "kill", &id);
        finish(state_, id, TaskState::Completed);
        log_.push_back("complete " + id.str());
        finished.push_back(id.str());
      } else if (it == by_id.end() || it->second.contains("fault")) {
        failed.push_back(on_failure(id, state_.now));
      }
    }
  }
  schedule();
  return {{"completed", finished}, {"failures", failed}};
}

json Orchestrator::record_json(const TaskRecord& r) const {
  json j{{"task_id", r.task_id.str()},
         {"state", std::string(to_string(r.state))},
         {"priority", r.priority},
         {"preemptible", r.preemptible},
         {"vfpga_num", r.vfpga_num}};
  if (r.node) j["node"] = r.node->str();
  if (r.context_node) j["context_node"] = r.context_node->str();
  if (r.pinned) j["pinned"] = r.pinned->str();
  if (r.held) j["held"] = true;
  return j;
}

json Orchestrator::task_status(const TaskId& t) const {
  std::lock_guard lk(mu_);
  auto it = state_.tasks.find(t);
  if (it == state_.tasks.end()) fail(Errc::UnknownTask, "unknown task " + t.str());
  return record_json(it->second);
}

json Orchestrator::status() const {
  std::lock_guard lk(mu_);
  json tasks = json::array(), nodes = json::array(), queue = json::array();
  for (const auto& [id, r] : state_.tasks) tasks.push_back(record_json(r));
  for (const auto& [id, n] : state_.cluster) {
    json running = json::array();
    for (const auto& t : n.running) running.push_back(t.str());
    nodes.push_back({{"node_id", id.str()}, {"slots", n.slots}, {"free_slots", n.free_slots()}, {"running", running}});
  }
  for (const auto& id : wait_queue(state_)) queue.push_back(id.str());
  return {{"policy", std::string(to_string(state_.policy))},
          {"now_us", state_.now.count()},
          {"nodes", nodes},
          {"tasks", tasks},
          {"wait_queue", queue}};
}

json Orchestrator::dispatch(const std::string& verb, const json& args) {
  auto task = [&] { return TaskId(need_str(args, "task_id", verb)); };
  if (verb == "deploy") return deploy(DeployRequest::from_json(args));
  if (verb == "status") return args.contains("task_id") ? task_status(task()) : status();
  if (verb == "evict") return evict(task());
  if (verb == "resume") return resume(task());
  if (verb == "migrate") return migrate(task(), NodeId(need_str(args, "node", verb)));
  if (verb == "checkpoint") return checkpoint(task(), need_str(args, "path", verb));
  if (verb == "restore") {
    std::optional<NodeId> node;
    if (args.contains("node")) node = NodeId(need_str(args, "node", verb));
    return restore(task(), need_str(args, "path", verb), node);
  }
  if (verb == "replicate") {
    std::optional<TaskId> rid;
    if (args.contains("replica_id")) rid = TaskId(need_str(args, "replica_id", verb));
    return replicate(task(), NodeId(need_str(args, "node", verb)), rid);
  }
  if (verb == "scale") {
    const auto& v = args.value("vfpga_num", json());
    if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > 0xffffffffll)
      fail(Errc::MalformedRequest, "scale needs vfpga_num");
    return scale(task(), args.at("vfpga_num").get<std::uint32_t>());
  }
  if (verb == "periodic_checkpoint") {
    auto t = task();
    periodic_checkpoint(t, seconds_arg(args, "interval_s", verb));
    return {{"task_id", t.str()}, {"next_due_us", timer(t)->next_due.count()}};
  }
  if (verb == "run") {
    std::optional<double> until;
    if (args.contains("until_ms")) until = args.at("until_ms").get<double>();
    return run(task(), until);
  }
  if (verb == "step") return step(task(), args.value("steps", std::size_t{1}));
  if (verb == "tick") return tick(seconds_arg(args, "now_s", verb));
  if (verb == "fail") return on_failure(task(), args.contains("now_s") ? seconds_arg(args, "now_s", verb) : state().now);
  if (verb == "poll") return poll();
  if (verb == "schedule") {
    json out = json::array();
    for (const auto& d : schedule()) out.push_back(describe(d));
    return out;
  }
  if (verb == "heartbeat") {
    std::lock_guard lk(mu_);
    NodeId node(need_str(args, "node_id", verb));
    bool joined = false;
    if (!state_.cluster.contains(node)) {
      auto slots = args.value("slots", std::uint32_t{1});
      state_.add_node(node, slots);
      if (on_join && args.contains("endpoint"))
        on_join(node.str(), runtime::Endpoint::parse(args.at("endpoint").get<std::string>()));
      log_.push_back("join " + node.str());
      joined = true;
      schedule();
    }
    return {{"node_id", node.str()}, {"joined", joined}};
  }
  fail(Errc::MalformedRequest, "unknown orchestrator command '" + verb + "'");
}

json Orchestrator::handle(const json& request) {
  json id = request.is_object() && request.contains("id") ? request.at("id") : json(nullptr);
  try {
    if (!request.is_object() || !request.contains("command") || !request.at("command").is_string())
      fail(Errc::MalformedRequest, "missing command");
    json args = request.value("args", json::object());
    if (!args.is_object()) fail(Errc::MalformedRequest, "args must be an object");
    return json{{"id", id}, {"ok", true}, {"result", dispatch(request.at("command").get<std::string>(), args)}};
  } catch (const Error& e) {
    return runtime::error_response(id, std::string(to_string(e.code())), e.what());
  } catch (const json::exception& e) {
    return runtime::error_response(id, "MalformedRequest", e.what());
  }
}

// ---- OrchestratorDaemon ----

OrchestratorDaemon::OrchestratorDaemon(OrchestratorConfig cfg)
    : cfg_(std::move(cfg)), peers_(cfg_.nodes), orch_(peers_, cfg_.policy, cfg_.anti_thrash) {
  for (const auto& [node, ep] : cfg_.nodes) {
    auto it = cfg_.slots.find(node);
    orch_.add_node(NodeId(node), it == cfg_.slots.end() ? 1 : it->second);
  }
  orch_.on_join = [this](const std::string& node, const runtime::Endpoint& ep) { peers_.add(node, ep); };
  server_ = std::make_unique<runtime::JsonServer>(cfg_.listen.value_or(runtime::Endpoint{"127.0.0.1", 0}),
                                                  [this](const json& req) {
                                                    if (req.is_object() && req.value("command", "") == "heartbeat")
                                                      ++heartbeats_;
                                                    return orch_.handle(req);
                                                  });
}

OrchestratorDaemon::~OrchestratorDaemon() { stop(); }

void OrchestratorDaemon::start() {
  server_->start();
  started_ = std::chrono::steady_clock::now();
  running_ = true;
  timer_ = std::thread([this] { timer_loop(); });
}

void OrchestratorDaemon::stop() {
  if (!running_.exchange(false)) return;
  timer_cv_.notify_all();
  if (timer_.joinable()) timer_.join();
  server_->stop();
}

void OrchestratorDaemon::timer_loop() {
  while (running_) {
    {
      std::unique_lock lk(timer_mu_);
      timer_cv_.wait_for(lk, cfg_.tick, [this] { return !running_; });
    }
    if (!running_) break;
    auto elapsed = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - started_);
    try {
      orch_.tick(elapsed);
      orch_.poll();
    } catch (const Error&) {
      // A node refused; the next round retries.
    }
  }
}

}  // namespace funky::orchestrator
