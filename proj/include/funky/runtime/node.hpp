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

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "funky/config.hpp"
#include "funky/fpga/device.hpp"
#include "funky/monitor/monitor.hpp"
#include "funky/runtime/wire.hpp"

namespace funky::runtime {

struct NodeConfig {
  std::string node_id = "node-0";
  std::size_t devices = 1;
  std::size_t slots_per_device = 1;
  fpga::CostModel cost = fpga::CostModel::defaults();
  monitor::StateCosts state;
  std::filesystem::path snapshot_dir = "snapshots";
  std::vector<std::filesystem::path> program_dirs;
  std::optional<Endpoint> listen;
  std::optional<Endpoint> orchestrator;
  std::map<std::string, Endpoint> peers;
  Duration heartbeat{1'000'000};

  // Keys: node.id, node.devices, node.slots_per_device, node.snapshot_dir,
  // node.program_dir (comma separated), node.listen, node.orchestrator,
  // node.heartbeat_ms, peer.<node_id> = host:port, fpga.* (cost model) and
  // state.* (state costs). FUNKY_NODE_ID overrides node.id.
  static NodeConfig from_config(const KvConfig& cfg);
};

// Runtime command verbs. The first nine follow the OCI lifecycle plus the
// Funky extensions; step, run, restore, drop_context and status drive
// emulated guests and inspect the node.
inline constexpr std::string_view kCommandVerbs[] = {
    "create", "start", "kill", "evict", "resume", "checkpoint", "replicate", "update", "fetch_context",
    "step",   "run",   "restore", "drop_context", "status"};

struct RuntimeCommand {
  std::string verb;
  std::optional<TaskId> task;
  json args = json::object();

  json to_json(std::uint64_t id = 0) const;
  // Accepts {id, command, args}. Throws MalformedRequest.
  static RuntimeCommand from_json(const json& j);
};

// Keys read from create/deploy annotations; unknown keys are ignored.
struct Annotations {
  bool preemptible = true;
  std::optional<std::string> node_id;
  std::uint32_t vfpga_num = 1;
  static Annotations parse(const json& kv);
  json to_json() const;
};

class PeerDirectory {
 public:
  virtual ~PeerDirectory() = default;
  // Sends a request document to `node` and returns its response document.
  // Throws PeerUnreachable.
  virtual json call(const std::string& node, const json& request) = 0;
};

// Throws the error carried by a failed response; returns its result otherwise.
json unwrap(const json& response);
Errc errc_from_string(std::string_view name);

class NodeRuntime {
 public:
  explicit NodeRuntime(NodeConfig cfg);

  const NodeConfig& config() const { return cfg_; }
  const std::string& node_id() const { return cfg_.node_id; }
  void set_peers(PeerDirectory* peers) { peers_ = peers; }

  // Throws UnknownTask, NotPreemptible, TaskExists, ContextMissing and errors
  // from the monitor.
  json execute(const RuntimeCommand& cmd);
  // Wire entry point; never throws.
  json handle(const json& request);

  std::size_t free_slots() const;
  std::size_t total_slots() const;
  bool has_task(const TaskId& t) const;
  const monitor::MonitorInstance* task(const TaskId& t) const;
  fpga::FpgaDevice& device(std::size_t i) { return *devices_.at(i); }

 private:
  struct TaskEntry {
    std::unique_ptr<monitor::MonitorInstance> monitor;
    Annotations annotations;
    std::string program_ref;
  };

  json do_create(const RuntimeCommand& c);
  json do_start(TaskEntry& e);
  json do_restore(const RuntimeCommand& c);
  json do_status() const;
  TaskEntry& entry(const TaskId& t);
  void need_preemptible(const TaskId& t, const TaskEntry& e, std::string_view verb) const;
  fpga::FpgaDevice* device_with_free_slot(fpga::FpgaDevice* preferred);
  guest::TaskProgram load_program(const json& args, std::string& ref) const;
  static json task_json(const TaskId& id, const TaskEntry& e);

  NodeConfig cfg_;
  std::vector<std::unique_ptr<fpga::FpgaDevice>> devices_;
  std::map<TaskId, TaskEntry> tasks_;
  std::map<TaskId, monitor::Snapshot> retained_;  // replicas waiting to be pulled
  monitor::SnapshotStore store_;
  PeerDirectory* peers_ = nullptr;
  mutable std::mutex mu_;
};

class InProcessPeers : public PeerDirectory {
 public:
  void add(NodeRuntime& node) { nodes_[node.node_id()] = &node; }
  json call(const std::string& node, const json& request) override;

 private:
  std::map<std::string, NodeRuntime*> nodes_;
};

class TcpPeers : public PeerDirectory {
 public:
  TcpPeers() = default;
  explicit TcpPeers(std::map<std::string, Endpoint> eps) : eps_(std::move(eps)) {}
  void add(const std::string& node, Endpoint ep) { eps_[node] = std::move(ep); }
  json call(const std::string& node, const json& request) override;

 private:
  std::map<std::string, Endpoint> eps_;
};

// Live-mode node service: the runtime behind a JsonServer, plus heartbeats
// to the orchestrator when one is configured.
class NodeDaemon {
 public:
  explicit NodeDaemon(NodeConfig cfg);
  ~NodeDaemon();

  void start();
  void stop();
  const Endpoint& endpoint() const { return server_->endpoint(); }
  NodeRuntime& runtime() { return runtime_; }
  // Peers must be added before the daemon serves requests that use them.
  void add_peer(const std::string& node, Endpoint ep) { peers_.add(node, std::move(ep)); }
  std::uint64_t heartbeats_sent() const { return heartbeats_; }

 private:
  void heartbeat_loop();

  NodeRuntime runtime_;
  TcpPeers peers_;
  std::unique_ptr<JsonServer> server_;
  std::thread beat_;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> heartbeats_{0};
  std::mutex beat_mu_;
  std::condition_variable beat_cv_;
};

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view text);

}  // namespace funky::runtime
