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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "funky/monitor/monitor.hpp"
#include "support/random_program.hpp"

namespace funky::monitor {
namespace {

namespace c = guest::call;
using guest::ArgDir;
using guest::TaskProgram;

TaskProgram vadd_program(Bytes size) {
  TaskProgram p;
  p.program_id = "v";
  p.bitstream_id = "vadd";
  p.kernels = {{"vadd", true}};
  p.buffers = {{"a", size, 5}, {"b", size, 6}, {"c", size, 0}};
  p.steps = {c::CreateProgram{},
             c::CreateBuffer{"a"},
             c::CreateBuffer{"b"},
             c::CreateBuffer{"c"},
             c::EnqueueWrite{"a", 0, 0},
             c::EnqueueWrite{"b", 0, 0},
             c::SetArg{0, std::nullopt, "a", ArgDir::In},
             c::SetArg{1, std::nullopt, "b", ArgDir::In},
             c::SetArg{2, std::nullopt, "c", ArgDir::Out},
             c::EnqueueKernel{"vadd", size, 0},
             c::EnqueueRead{"c", 0, 0},
             c::Finish{},
             c::ReleaseProgram{}};
  return p;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("funky-monitor-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::uint64_t uninterrupted_digest(const TaskProgram& p) {
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(p);
  auto r = m.run();
  EXPECT_TRUE(r.done);
  return m.guest().output_digest();
}

// Runs until just before the first kernel finishes: inputs are on the
// device, the kernel is in flight and nothing later has been dispatched.
void run_into_kernel(MonitorInstance& m) {
  m.run(SimTime{0});
  for (const auto& s : m.schedule())
    if (s.kind == "EXECUTE") {
      m.run(s.end - Duration{1});
      return;
    }
  FAIL() << "no kernel scheduled";
}

std::int64_t ceil_us(double s) { return static_cast<std::int64_t>(std::ceil(s * 1e6 - 1e-6)); }

TEST(Costs, EvictionAndResumeFormulas) {
  auto m = fpga::CostModel::defaults();
  // 200 us fixed latency plus bytes over the d2h/h2d bandwidth.
  EXPECT_EQ(eviction_time(m, 1000 * MiB).count(), 200 + ceil_us(1000.0 * MiB / (5.5 * GiB)));
  EXPECT_EQ(resume_time(m, 2000 * MiB).count(),
            (97'600 + 158'000) / 2 + 200 + ceil_us(2000.0 * MiB / (9.2 * GiB)));
  // Register readback rides on the fixed latency.
  EXPECT_EQ(eviction_time(m, 0).count(), 200);
  EXPECT_LE(eviction_time(m, MiB).count(), 1000);
  StateCosts sc;
  EXPECT_EQ(snapshot_bytes(sc, 10, 20), sc.vm_base_bytes + 30);
  EXPECT_EQ(persist_time(sc, GiB).count(), 4'000'000);
  EXPECT_EQ(load_time(sc, GiB).count(), 1'000'000);
  EXPECT_EQ(network_time(sc, 12'500'000'000ull).count(), 1'000'000);
}

TEST(Costs, StateCostsFromConfig) {
  auto cfg = KvConfig::parse("state.boot_ms = 50\nstate.network_gbps = 10\nstate.checkpoint_slowdown = 2\n");
  auto sc = StateCosts::from_config(cfg);
  EXPECT_EQ(sc.sandbox_boot.count(), 50'000);
  EXPECT_DOUBLE_EQ(sc.network_bw, 10e9 / 8);
  EXPECT_DOUBLE_EQ(sc.checkpoint_slowdown, 2);
  EXPECT_EQ(sc.sandbox_teardown.count(), 100'000);
}

TEST(Monitor, RunsToCompletionAndFreesDevice) {
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(vadd_program(4 * MiB));
  auto r = m.run();
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(m.completed());
  EXPECT_EQ(m.phase(), Phase::Terminated);
  EXPECT_TRUE(dev.slot(0).free());
  EXPECT_EQ(dev.memory_usage(), 0u);
  EXPECT_FALSE(m.guest().region_contents("c").is_zero());
  // The run pays at least reconfiguration and the worker spawn.
  EXPECT_GE(m.now(), dev.cost().reconfig_latency + dev.cost().worker_spawn());
}

TEST(Monitor, ChunkingPreservesOutput) {
  auto p = vadd_program(8 * MiB);
  auto d1 = uninterrupted_digest(p);
  for (std::uint32_t n : {2u, 4u, 8u}) EXPECT_EQ(uninterrupted_digest(guest::split_chunks(p, n)), d1);
}

TEST(Monitor, SplitReducesSyncWait) {
  auto p = TaskProgram::load(std::filesystem::path(FUNKY_DATA_DIR) / "programs" / "stream.json");
  auto wait_at_kernel_start = [&](std::uint32_t n) {
    fpga::FpgaDevice dev("d");
    MonitorInstance m(TaskId("t"), dev);
    m.boot(guest::split_chunks(p, n));
    m.run(SimTime{0});
    SimTime ks{0};
    for (const auto& s : m.schedule())
      if (s.kind == "EXECUTE") {
        ks = s.start;
        break;
      }
    m.run(ks);
    return m.sync_fpga();
  };
  auto w1 = wait_at_kernel_start(1), w32 = wait_at_kernel_start(32);
  // Unsplit: the whole 1000 MiB kernel at 1000 MiB/s is in flight.
  EXPECT_EQ(w1.count(), 1'000'000);
  EXPECT_LE(to_seconds(w32) / to_seconds(w1), 0.04);
}

TEST(Monitor, EvictResumeRestoresDeviceState) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 40; ++i) {
    auto p = testing::random_program(rng);
    auto want = uninterrupted_digest(p);
    fpga::FpgaDevice dev("d");
    MonitorInstance m(TaskId("t"), dev);
    m.boot(p);
    m.run_steps(rng() % 12);
    if (m.phase() != Phase::Running) continue;
    m.sync_fpga();
    auto before = m.device_state_digest();
    auto rep = m.evict();
    EXPECT_EQ(m.phase(), Phase::Evicted);
    EXPECT_TRUE(dev.physical().is_zero());
    Bytes dirty = 0;
    for (const auto& e : rep.context.buffer_table)
      if (e.state == fpga::BufferState::Dirty) dirty += e.size;
    EXPECT_EQ(rep.context.payload_bytes(), dirty);
    EXPECT_EQ(rep.transfer, rep.context.has_fpga() ? eviction_time(dev.cost(), dirty) : Duration{0});
    m.resume();
    EXPECT_EQ(m.device_state_digest(), before);
    m.run();
    EXPECT_TRUE(m.completed());
    EXPECT_EQ(m.guest().output_digest(), want);
  }
}

TEST(Monitor, EvictMidKernelWaitsOnlyForDispatched) {
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(vadd_program(100 * MiB));
  m.run(SimTime{0});
  SimTime ks{0}, ke{0};
  for (const auto& s : m.schedule())
    if (s.kind == "EXECUTE") {
      ks = s.start;
      ke = s.end;
    }
  m.run(ks + Duration{10});
  auto rep = m.evict();
  EXPECT_EQ(rep.sync_wait, ke - (ks + Duration{10}));
  // The read-back was never dispatched, so c is still dirty.
  EXPECT_EQ(rep.context.payload_bytes(), 100 * MiB);
  EXPECT_THROW(m.evict(), Error);
}

TEST(Monitor, EvictBeforeCreateProgramHasNoFpgaState) {
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(vadd_program(MiB));
  auto rep = m.evict();
  EXPECT_FALSE(rep.context.has_fpga());
  EXPECT_EQ(rep.transfer.count(), 0);
  m.resume();
  m.run();
  EXPECT_TRUE(m.completed());
}

TEST(Monitor, ResumeErrors) {
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(vadd_program(MiB));
  m.run_steps(3);
  try {
    m.resume();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AlreadyRunning);
  }
  m.evict();
  MonitorInstance other(TaskId("o"), dev);
  other.boot(vadd_program(MiB));
  other.run_steps(1);
  try {
    m.resume();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoFreeSlot);
  }
  fpga::FpgaDevice second("d2");
  m.resume(second);
  EXPECT_EQ(&m.device(), &second);
  EXPECT_EQ(m.handle()->device_id, "d2");
  m.run();
  EXPECT_TRUE(m.completed());
}

TEST(Monitor, CheckpointRestoreOnFreshDevice) {
  auto dir = temp_dir("ckpt");
  SnapshotStore store(dir);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 30; ++i) {
    auto p = testing::random_program(rng);
    auto want = uninterrupted_digest(p);
    fpga::FpgaDevice dev("d");
    MonitorInstance m(TaskId("t"), dev);
    m.boot(p);
    m.run_steps(rng() % 15);
    if (m.phase() != Phase::Running) continue;
    auto rep = m.checkpoint(store, "s.snap");
    EXPECT_TRUE(rep.resumed.has_value());
    EXPECT_EQ(m.phase(), Phase::Running);
    EXPECT_EQ(rep.persist, persist_time(m.costs(), rep.snapshot.meta.logical_bytes));
    auto snap = store.read("s.snap");
    EXPECT_EQ(snap, rep.snapshot);
    m.kill();
    fpga::FpgaDevice fresh("f");
    ResumeReport rr;
    auto r = MonitorInstance::restore(snap, fresh, {}, SimTime{0}, &rr);
    r.run();
    EXPECT_TRUE(r.completed());
    EXPECT_EQ(r.guest().output_digest(), want);
  }
  std::filesystem::remove_all(dir);
}

TEST(Monitor, CheckpointToMissingStoreRestoresPhase) {
  SnapshotStore store("/proc/funky-no-such-dir");
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(vadd_program(MiB));
  m.run_steps(5);
  try {
    m.checkpoint(store, "x.snap");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StoreUnavailable);
  }
  EXPECT_EQ(m.phase(), Phase::Running);
  m.run();
  EXPECT_TRUE(m.completed());
}

TEST(Snapshot, CorruptionIsDetected) {
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(vadd_program(MiB));
  m.run_steps(8);
  m.evict();
  auto bytes = m.make_snapshot().encode();
  EXPECT_EQ(Snapshot::decode(bytes), m.make_snapshot());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    auto bad = bytes;
    bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    try {
      Snapshot::decode(bad);
      ADD_FAILURE() << "flip accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::SnapshotCorrupt);
    }
  }
  auto cut = bytes;
  cut.resize(cut.size() - 1);
  EXPECT_THROW(Snapshot::decode(cut), Error);
}

TEST(Snapshot, StoreReadErrors) {
  auto dir = temp_dir("store");
  SnapshotStore store(dir);
  try {
    store.read("absent.snap");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::StoreUnavailable);
  }
  std::ofstream(dir / "junk.snap") << "garbage";
  try {
    store.read("junk.snap");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SnapshotCorrupt);
  }
  std::filesystem::remove_all(dir);
}

TEST(Context, EncodeRoundTripAndSizes) {
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(vadd_program(MiB));
  run_into_kernel(m);
  auto ctx = m.evict().context;
  EXPECT_EQ(FpgaContext::decode(ctx.encode()), ctx);
  EXPECT_EQ(ctx.byte_size(), ctx.payload_bytes() + FpgaContext::kHeaderBytes);
  EXPECT_EQ(ctx.payload_bytes(), MiB);
  EXPECT_EQ(ctx.restore_bytes(), 3 * MiB);
}

TEST(Isolation, ForeignBufferTerminatesOnlyTheOffender) {
  fpga::FpgaDevice dev("d", fpga::CostModel::defaults(), 2);
  MonitorInstance victim(TaskId("victim"), dev);
  victim.boot(vadd_program(MiB));
  run_into_kernel(victim);
  auto victim_digest = victim.device_state_digest();

  // An attacker whose guest addresses a buffer id it does not own.
  auto p = vadd_program(MiB);
  MonitorInstance attacker(TaskId("attacker"), dev);
  attacker.boot(p);
  attacker.run_steps(4);
  auto& g = const_cast<guest::GuestState&>(attacker.guest());
  g.buffer_ids["a"] = victim.guest().buffer_ids.at("a");
  attacker.run();
  ASSERT_TRUE(attacker.fault().has_value());
  EXPECT_EQ(attacker.fault()->kind, protocol::ViolationKind::ForeignBuffer);
  EXPECT_EQ(attacker.phase(), Phase::Terminated);
  EXPECT_FALSE(attacker.completed());
  EXPECT_FALSE(dev.slot_of(TaskId("attacker")));
  EXPECT_EQ(victim.device_state_digest(), victim_digest);
  victim.run();
  EXPECT_TRUE(victim.completed());
}

TEST(Isolation, KillZeroesDeviceMemory) {
  fpga::FpgaDevice dev("d");
  MonitorInstance m(TaskId("t"), dev);
  m.boot(vadd_program(MiB));
  run_into_kernel(m);
  EXPECT_FALSE(dev.physical().is_zero());
  m.kill();
  EXPECT_TRUE(dev.physical().is_zero());
  EXPECT_TRUE(dev.slot(0).free());
  EXPECT_EQ(m.phase(), Phase::Terminated);
}

TEST(Monitor, ColocatedTasksShareDeviceWithoutInterference) {
  fpga::FpgaDevice dev("d", fpga::CostModel::defaults(), 2);
  auto p = vadd_program(2 * MiB);
  auto want = uninterrupted_digest(p);
  MonitorInstance a(TaskId("a"), dev), b(TaskId("b"), dev);
  a.boot(p);
  b.boot(p);
  for (int i = 0; i < 20; ++i) {
    a.run_steps(1);
    b.run_steps(1);
  }
  a.run();
  b.run();
  EXPECT_EQ(a.guest().output_digest(), want);
  EXPECT_EQ(b.guest().output_digest(), want);
}

}  // namespace
}  // namespace funky::monitor
