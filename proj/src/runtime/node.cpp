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

#include "funky/runtime/node.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace funky::runtime {

using monitor::MonitorInstance;
using monitor::Phase;

namespace {

double ms(Duration d) { return to_millis(d); }

std::vector<std::filesystem::path> split_paths(const std::string& s) {
  std::vector<std::filesystem::path> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.emplace_back(item);
  return out;
}

const std::string& need_string(const json& args, const char* key, const std::string& verb) {
  if (!args.contains(key) || !args.at(key).is_string())
    fail(Errc::MalformedRequest, verb + " needs a string '" + key + "'");
  return args.at(key).get_ref<const std::string&>();
}

}  // namespace

NodeConfig NodeConfig::from_config(const KvConfig& cfg) {
  NodeConfig c;
  c.node_id = cfg.get_or("node.id", c.node_id);
  if (const char* env = std::getenv("FUNKY_NODE_ID"); env && *env) c.node_id = env;
  c.devices = static_cast<std::size_t>(cfg.integer("node.devices", 1));
  c.slots_per_device = static_cast<std::size_t>(cfg.integer("node.slots_per_device", 1));
  if (c.devices == 0 || c.slots_per_device == 0) fail(Errc::InvalidConfig, "a node needs at least one slot");
  c.cost = fpga::CostModel::from_config(cfg, "fpga.");
  c.state = monitor::StateCosts::from_config(cfg, "state.");
  c.snapshot_dir = cfg.get_or("node.snapshot_dir", c.snapshot_dir.string());
  c.program_dirs = split_paths(cfg.get_or("node.program_dir", ""));
  if (auto l = cfg.get("node.listen")) c.listen = Endpoint::parse(*l);
  if (auto o = cfg.get("node.orchestrator")) c.orchestrator = Endpoint::parse(*o);
  if (cfg.has("node.heartbeat_ms")) c.heartbeat = ceil_millis(cfg.number("node.heartbeat_ms", 1000));
  for (const auto& [k, v] : cfg.with_prefix("peer.")) c.peers[k] = Endpoint::parse(v);
  return c;
}

json RuntimeCommand::to_json(std::uint64_t id) const {
  json a = args;
  if (task) a["task_id"] = task->str();
  return json{{"id", id}, {"command", verb}, {"args", a}};
}

RuntimeCommand RuntimeCommand::from_json(const json& j) {
  if (!j.is_object()) fail(Errc::MalformedRequest, "request must be an object");
  if (!j.contains("command") || !j.at("command").is_string()) fail(Errc::MalformedRequest, "missing command");
  RuntimeCommand c;
  c.verb = j.at("command").get<std::string>();
  if (std::find(std::begin(kCommandVerbs), std::end(kCommandVerbs), c.verb) == std::end(kCommandVerbs))
    fail(Errc::MalformedRequest, "unknown command '" + c.verb + "'");
  if (j.contains("args")) {
    if (!j.at("args").is_object()) fail(Errc::MalformedRequest, "args must be an object");
    c.args = j.at("args");
  }
  if (c.args.contains("task_id")) {
    if (!c.args.at("task_id").is_string() || c.args.at("task_id").get<std::string>().empty())
      fail(Errc::MalformedRequest, "task_id must be a non-empty string");
    c.task = TaskId(c.args.at("task_id").get<std::string>());
    c.args.erase("task_id");
  }
  if (c.verb != "status" && !c.task) fail(Errc::MalformedRequest, c.verb + " needs a task_id");
  return c;
}

Annotations Annotations::parse(const json& kv) {
  Annotations a;
  if (!kv.is_object()) return a;
  auto text = [&](const char* key) -> std::optional<std::string> {
    if (!kv.contains(key)) return std::nullopt;
    const auto& v = kv.at(key);
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  };
  if (auto p = text("funky.preemptible")) a.preemptible = *p == "true" || *p == "1";
  if (auto n = text("funky.node_id")) a.node_id = *n;
  if (auto v = text("funky.vfpga_num")) {
    try {
      a.vfpga_num = static_cast<std::uint32_t>(std::stoul(*v));
    } catch (const std::exception&) {
      fail(Errc::MalformedRequest, "funky.vfpga_num must be an integer");
    }
  }
  return a;
}

json Annotations::to_json() const {
  json j{{"funky.preemptible", preemptible ? "true" : "false"}, {"funky.vfpga_num", std::to_string(vfpga_num)}};
  if (node_id) j["funky.node_id"] = *node_id;
  return j;
}

Errc errc_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Errc::TaskExists); ++i)
    if (to_string(static_cast<Errc>(i)) == name) return static_cast<Errc>(i);
  return Errc::InvalidState;
}

json unwrap(const json& response) {
  if (!response.is_object() || !response.contains("ok")) fail(Errc::MalformedRequest, "response lacks 'ok'");
  if (response.at("ok").get<bool>()) return response.value("result", json::object());
  const auto& e = response.at("error");
  auto code = e.value("code", std::string("InvalidState"));
  auto msg = e.value("message", std::string{});
  // Messages built from Error::what() already carry the code.
  if (msg.starts_with(code + ": ")) msg.erase(0, code.size() + 2);
  fail(errc_from_string(code), msg);
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

std::vector<std::uint8_t> from_hex(std::string_view text) {
  if (text.size() % 2) fail(Errc::SnapshotCorrupt, "odd hex length");
  auto val = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    fail(Errc::SnapshotCorrupt, "bad hex digit");
  };
  std::vector<std::uint8_t> out(text.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(val(text[2 * i]) << 4 | val(text[2 * i + 1]));
  return out;
}

// ---- NodeRuntime ----

NodeRuntime::NodeRuntime(NodeConfig cfg) : cfg_(std::move(cfg)), store_(cfg_.snapshot_dir) {
  for (std::size_t i = 0; i < cfg_.devices; ++i)
    devices_.push_back(std::make_unique<fpga::FpgaDevice>(cfg_.node_id + "/fpga" + std::to_string(i), cfg_.cost,
                                                          cfg_.slots_per_device));
}

std::size_t NodeRuntime::free_slots() const {
  std::lock_guard lk(mu_);
  std::size_t n = 0;
  for (const auto& d : devices_)
    for (std::size_t i = 0; i < d->slot_count(); ++i) n += d->slot(i).free() ? 1 : 0;
  return n;
}

std::size_t NodeRuntime::total_slots() const { return cfg_.devices * cfg_.slots_per_device; }

bool NodeRuntime::has_task(const TaskId& t) const {
  std::lock_guard lk(mu_);
  return tasks_.contains(t);
}

const MonitorInstance* NodeRuntime::task(const TaskId& t) const {
  std::lock_guard lk(mu_);
  auto it = tasks_.find(t);
  return it == tasks_.end() ? nullptr : it->second.monitor.get();
}

NodeRuntime::TaskEntry& NodeRuntime::entry(const TaskId& t) {
  auto it = tasks_.find(t);
  if (it == tasks_.end()) fail(Errc::UnknownTask, "no task " + t.str() + " on " + cfg_.node_id);
  return it->second;
}

void NodeRuntime::need_preemptible(const TaskId& t, const TaskEntry& e, std::string_view verb) const {
  if (!e.annotations.preemptible) fail(Errc::NotPreemptible, std::string(verb) + " on non-preemptible task " + t.str());
}

fpga::FpgaDevice* NodeRuntime::device_with_free_slot(fpga::FpgaDevice* preferred) {
  if (preferred && preferred->free_slot()) return preferred;
  for (auto& d : devices_)
    if (d->free_slot()) return d.get();
  return nullptr;
}

guest::TaskProgram NodeRuntime::load_program(const json& args, std::string& ref) const {
  guest::TaskProgram p;
  if (args.contains("program")) {
    const auto& v = args.at("program");
    p = guest::TaskProgram::from_json(v.is_string() ? v.get<std::string>() : v.dump());
    ref = "inline:" + p.program_id;
  } else {
    ref = need_string(args, "program_ref", "create");
    std::filesystem::path path(ref);
    if (path.is_relative()) {
      for (const auto& d : cfg_.program_dirs)
        if (std::filesystem::exists(d / path)) {
          path = d / path;
          break;
        }
    }
    if (!std::filesystem::exists(path)) fail(Errc::ParseError, "program '" + ref + "' not found");
    p = guest::TaskProgram::load(path);
  }
  if (args.contains("split")) {
    auto n = args.at("split").get<std::uint32_t>();
    if (n > 1) p = guest::split_chunks(p, n);
  }
  return p;
}

json NodeRuntime::task_json(const TaskId& id, const TaskEntry& e) {
  const auto& m = *e.monitor;
  json j{{"task_id", id.str()},
         {"phase", std::string(monitor::to_string(m.phase()))},
         {"now_us", m.now().count()},
         {"priority", m.priority},
         {"preemptible", e.annotations.preemptible},
         {"vfpga_num", e.annotations.vfpga_num},
         {"program", e.program_ref},
         {"pc", m.guest().pc},
         {"completed", m.completed()},
         {"output_digest", hex64(m.guest().output_digest())},
         {"device_digest", hex64(m.device_state_digest())}};
  if (m.handle()) j["slot"] = m.handle()->device_id + "#" + std::to_string(m.handle()->slot_id);
  if (m.fault())
    j["fault"] = std::string(protocol::to_string(m.fault()->kind)) + " on request " + std::to_string(m.fault()->req_id);
  if (m.retained_context()) j["context_bytes"] = m.retained_context()->byte_size();
  return j;
}

json NodeRuntime::do_status() const {
  json devs = json::array();
  for (const auto& d : devices_) {
    std::size_t free = 0;
    for (std::size_t i = 0; i < d->slot_count(); ++i) free += d->slot(i).free() ? 1 : 0;
    devs.push_back({{"device_id", d->device_id()},
                    {"slots", d->slot_count()},
                    {"free_slots", free},
                    {"memory_used", d->memory_usage()}});
  }
  json tasks = json::array();
  for (const auto& [id, e] : tasks_) tasks.push_back(task_json(id, e));
  json retained = json::array();
  for (const auto& [id, s] : retained_) retained.push_back(id.str());
  return json{{"node_id", cfg_.node_id}, {"devices", devs}, {"tasks", tasks}, {"retained", retained}};
}

json NodeRuntime::do_create(const RuntimeCommand& c) {
  if (tasks_.contains(*c.task) || retained_.contains(*c.task))
    fail(Errc::TaskExists, c.task->str() + " already exists on " + cfg_.node_id);
  TaskEntry e;
  auto program = load_program(c.args, e.program_ref);
  e.annotations = Annotations::parse(c.args.value("annotations", json::object()));
  e.monitor = std::make_unique<MonitorInstance>(*c.task, *devices_.front(), cfg_.state);
  e.monitor->node_id = cfg_.node_id;
  e.monitor->priority = c.args.value("priority", std::int64_t{0});
  e.monitor->boot(program);
  auto& placed = tasks_.emplace(*c.task, std::move(e)).first->second;
  return task_json(*c.task, placed);
}

json NodeRuntime::do_start(TaskEntry& e) {
  auto& m = *e.monitor;
  if (m.phase() != Phase::Running) fail(Errc::InvalidState, m.task_id().str() + " is " + std::string(monitor::to_string(m.phase())));
  if (!m.handle() && !m.guest().done()) {
    auto* dev = device_with_free_slot(&m.device());
    if (!dev) fail(Errc::NoFreeSlot, "no free slot on " + cfg_.node_id);
    m.rebind(*dev);
  }
  std::size_t steps = 0;
  while (!m.handle() && m.phase() == Phase::Running && !m.guest().done()) steps += m.run_steps(1).steps;
  auto j = task_json(m.task_id(), e);
  j["steps"] = steps;
  return j;
}

json NodeRuntime::do_restore(const RuntimeCommand& c) {
  if (tasks_.contains(*c.task)) fail(Errc::TaskExists, c.task->str() + " already exists on " + cfg_.node_id);
  monitor::Snapshot snap;
  Duration network{0};
  std::optional<std::string> source;
  if (c.args.contains("path")) {
    snap = store_.read(need_string(c.args, "path", "restore"));
  } else {
    source = need_string(c.args, "from_node", "restore");
    if (!peers_) fail(Errc::PeerUnreachable, "no peer directory on " + cfg_.node_id);
    RuntimeCommand fetch{"fetch_context", *c.task, json::object()};
    auto r = unwrap(peers_->call(*source, fetch.to_json()));
    snap = monitor::Snapshot::decode(from_hex(r.at("snapshot").get<std::string>()));
    network = monitor::network_time(cfg_.state, snap.meta.logical_bytes);
  }
  if (snap.task_id != *c.task) fail(Errc::SnapshotCorrupt, "snapshot belongs to " + snap.task_id.str());
  auto* dev = device_with_free_slot(nullptr);
  if (!dev && !snap.fpga_context.has_fpga()) dev = devices_.front().get();
  if (!dev) fail(Errc::NoFreeSlot, "no free slot on " + cfg_.node_id);
  TaskEntry e;
  e.annotations = Annotations::parse(c.args.value("annotations", json::object()));
  e.program_ref = "snapshot:" + snap.snapshot_id;
  monitor::ResumeReport rep;
  auto start = snap.created_at + network;
  e.monitor = std::make_unique<MonitorInstance>(MonitorInstance::restore(snap, *dev, cfg_.state, start, &rep));
  e.monitor->node_id = cfg_.node_id;
  auto load = monitor::load_time(cfg_.state, snap.meta.logical_bytes);
  auto& placed = tasks_.emplace(*c.task, std::move(e)).first->second;
  if (source) {
    // The source keeps the context until the restore has succeeded here.
    RuntimeCommand drop{"drop_context", *c.task, json::object()};
    try {
      peers_->call(*source, drop.to_json());
    } catch (const Error&) {
    }
  }
  auto j = task_json(*c.task, placed);
  j["load_ms"] = ms(load);
  j["network_ms"] = ms(network);
  j["resume_ms"] = ms(rep.resume);
  j["reconfig_ms"] = ms(rep.reconfig);
  return j;
}

json NodeRuntime::execute(const RuntimeCommand& c) {
  std::lock_guard lk(mu_);
  const auto& v = c.verb;
  if (v == "status") return do_status();
  if (v == "create") return do_create(c);
  if (v == "restore") return do_restore(c);
  if (v == "fetch_context") {
    if (auto it = retained_.find(*c.task); it != retained_.end())
      return {{"snapshot", to_hex(it->second.encode())}, {"logical_bytes", it->second.meta.logical_bytes}};
    auto it = tasks_.find(*c.task);
    if (it == tasks_.end() || it->second.monitor->phase() != Phase::Evicted)
      fail(Errc::ContextMissing, "no context for " + c.task->str() + " on " + cfg_.node_id);
    auto snap = it->second.monitor->make_snapshot();
    return {{"snapshot", to_hex(snap.encode())}, {"logical_bytes", snap.meta.logical_bytes}};
  }
  if (v == "drop_context") {
    if (retained_.erase(*c.task)) return {{"dropped", c.task->str()}};
    auto it = tasks_.find(*c.task);
    if (it == tasks_.end() || it->second.monitor->phase() != Phase::Evicted)
      fail(Errc::ContextMissing, "no context for " + c.task->str() + " on " + cfg_.node_id);
    it->second.monitor->kill();
    tasks_.erase(it);
    return {{"dropped", c.task->str()}};
  }

  auto& e = entry(*c.task);
  auto& m = *e.monitor;
  if (v == "start") return do_start(e);
  if (v == "kill") {
    m.kill();
    tasks_.erase(*c.task);
    return {{"killed", c.task->str()}};
  }
  if (v == "step" || v == "run") {
    if (m.phase() != Phase::Running) fail(Errc::InvalidState, c.task->str() + " is " + std::string(monitor::to_string(m.phase())));
    monitor::RunResult r;
    if (v == "step") {
      r = m.run_steps(c.args.value("steps", std::size_t{1}));
    } else if (c.args.contains("until_ms")) {
      r = m.run(ceil_millis(c.args.at("until_ms").get<double>()));
    } else {
      r = m.run();
    }
    auto j = task_json(*c.task, e);
    j["steps"] = r.steps;
    return j;
  }
  if (v == "update") {
    need_preemptible(*c.task, e, v);
    auto n = c.args.value("vfpga_num", std::uint32_t{0});
    if (n == 0) fail(Errc::MalformedRequest, "update needs vfpga_num >= 1");
    e.annotations.vfpga_num = n;
    return task_json(*c.task, e);
  }
  need_preemptible(*c.task, e, v);
  if (v == "evict") {
    auto r = m.evict();
    return {{"task_id", c.task->str()},
            {"sync_wait_ms", ms(r.sync_wait)},
            {"transfer_ms", ms(r.transfer)},
            {"context_bytes", r.context.byte_size()},
            {"dirty_bytes", r.context.payload_bytes()},
            {"dirty_buffers", r.context.dirty_buffers.size()}};
  }
  if (v == "resume") {
    auto* dev = device_with_free_slot(&m.device());
    if (!dev) fail(Errc::NoFreeSlot, "no free slot on " + cfg_.node_id);
    auto r = m.resume(*dev);
    auto j = task_json(*c.task, e);
    j["resume_ms"] = ms(r.resume);
    j["reconfig_ms"] = ms(r.reconfig);
    return j;
  }
  if (v == "checkpoint") {
    auto r = m.checkpoint(store_, need_string(c.args, "path", "checkpoint"));
    json j{{"task_id", c.task->str()},
           {"path", r.path.string()},
           {"snapshot_id", r.snapshot.snapshot_id},
           {"logical_bytes", r.snapshot.meta.logical_bytes},
           {"evict_ms", ms(r.evict)},
           {"persist_ms", ms(r.persist)},
           {"duration_ms", ms(r.duration())},
           {"fpga_context_digest", hex64(r.snapshot.fpga_context.digest())}};
    if (r.resumed) j["resume_ms"] = ms(r.resumed->total());
    return j;
  }
  if (v == "replicate") {
    TaskId replica(c.args.value("replica_id", c.task->str() + "-replica"));
    if (tasks_.contains(replica) || retained_.contains(replica))
      fail(Errc::TaskExists, replica.str() + " already exists on " + cfg_.node_id);
    const bool was_running = m.phase() == Phase::Running;
    Duration evict{0};
    if (was_running) {
      auto r = m.evict();
      evict = r.sync_wait + r.transfer;
    }
    auto snap = m.make_snapshot();
    snap.task_id = replica;
    snap.snapshot_id = replica.str() + "@" + std::to_string(m.now().count());
    std::optional<monitor::ResumeReport> resumed;
    if (was_running) resumed = m.resume();
    retained_[replica] = snap;
    json j{{"task_id", c.task->str()},
           {"replica_id", replica.str()},
           {"logical_bytes", snap.meta.logical_bytes},
           {"evict_ms", ms(evict)},
           {"output_digest", hex64(m.guest().output_digest())}};
    if (resumed) j["resume_ms"] = ms(resumed->total());
    return j;
  }
  fail(Errc::MalformedRequest, "unhandled command " + v);
}

json NodeRuntime::handle(const json& request) {
  json id = request.is_object() && request.contains("id") ? request.at("id") : json(nullptr);
  try {
    auto cmd = RuntimeCommand::from_json(request);
    return json{{"id", id}, {"ok", true}, {"result", execute(cmd)}};
  } catch (const Error& e) {
    return error_response(id, std::string(to_string(e.code())), e.what());
  } catch (const json::exception& e) {
    return error_response(id, "MalformedRequest", e.what());
  } catch (const std::exception& e) {
    return error_response(id, "InvalidState", e.what());
  }
}

json InProcessPeers::call(const std::string& node, const json& request) {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) fail(Errc::PeerUnreachable, "unknown node " + node);
  // Round-trip through text so both paths see identical documents.
  return json::parse(it->second->handle(json::parse(request.dump())).dump());
}

json TcpPeers::call(const std::string& node, const json& request) {
  auto it = eps_.find(node);
  if (it == eps_.end()) fail(Errc::PeerUnreachable, "unknown node " + node);
  return runtime::call(it->second, request);
}

// ---- NodeDaemon ----

NodeDaemon::NodeDaemon(NodeConfig cfg) : runtime_(cfg), peers_(cfg.peers) {
  runtime_.set_peers(&peers_);
  server_ = std::make_unique<JsonServer>(cfg.listen.value_or(Endpoint{"127.0.0.1", 0}),
                                         [this](const json& req) { return runtime_.handle(req); });
}

NodeDaemon::~NodeDaemon() { stop(); }

void NodeDaemon::start() {
  server_->start();
  running_ = true;
  if (runtime_.config().orchestrator) beat_ = std::thread([this] { heartbeat_loop(); });
}

void NodeDaemon::stop() {
  if (!running_.exchange(false)) return;
  beat_cv_.notify_all();
  if (beat_.joinable()) beat_.join();
  server_->stop();
}

void NodeDaemon::heartbeat_loop() {
  const auto& cfg = runtime_.config();
  std::uint64_t seq = 0;
  while (running_) {
    json beat{{"id", ++seq},
              {"command", "heartbeat"},
              {"args",
               {{"node_id", cfg.node_id},
                {"endpoint", endpoint().str()},
                {"free_slots", runtime_.free_slots()},
                {"slots", runtime_.total_slots()}}}};
    try {
      runtime::call(*cfg.orchestrator, beat, 2000);
      ++heartbeats_;
    } catch (const Error&) {
      // Orchestrator down; try again next interval.
    }
    std::unique_lock lk(beat_mu_);
    beat_cv_.wait_for(lk, cfg.heartbeat, [this] { return !running_; });
  }
}

}  // namespace funky::runtime
