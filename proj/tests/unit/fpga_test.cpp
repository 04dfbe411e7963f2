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
#include <sstream>

#include "funky/config.hpp"
#include "funky/fpga/buffer.hpp"
#include "funky/fpga/cost_model.hpp"
#include "funky/fpga/device.hpp"
#include "funky/fpga/kernel.hpp"

namespace funky::fpga {
namespace {

// Closed-form transfer time in whole microseconds, rounded up.
std::int64_t expected_transfer_us(double bytes, double bw, std::int64_t fixed_us) {
  return fixed_us + static_cast<std::int64_t>(std::ceil(bytes / bw * 1e6 - 1e-6));
}

TEST(CostModel, DefaultsMatchCalibration) {
  auto m = CostModel::defaults();
  EXPECT_DOUBLE_EQ(m.bw_h2d, 9.2 * 1024 * 1024 * 1024);
  EXPECT_DOUBLE_EQ(m.bw_d2h, 5.5 * 1024 * 1024 * 1024);
  EXPECT_EQ(m.dma_fixed_latency.count(), 200);
  EXPECT_EQ(m.reconfig_latency.count(), 3'500'000);
  EXPECT_EQ(m.worker_spawn().count(), (97'600 + 158'000) / 2);
  EXPECT_EQ(m.request_overhead.count(), 1084);
  EXPECT_DOUBLE_EQ(m.kernel_throughput.at("vadd"), 1000.0 * MiB);
  EXPECT_DOUBLE_EQ(m.kernel_throughput.at("mmult"), 500.0 * MiB);
  EXPECT_NO_THROW(m.validate());
}

TEST(CostModel, TransferIsFixedPlusBandwidth) {
  auto m = CostModel::defaults();
  for (Bytes b : {Bytes{0}, Bytes{1}, 4 * KiB, 1 * MiB, 256 * MiB, 1 * GiB}) {
    EXPECT_EQ(transfer_cost(m, b, Direction::H2D).count(),
              expected_transfer_us(static_cast<double>(b), 9.2 * GiB, 200));
    EXPECT_EQ(transfer_cost(m, b, Direction::D2H).count(),
              expected_transfer_us(static_cast<double>(b), 5.5 * GiB, 200));
  }
  EXPECT_GT(transfer_cost(m, GiB, Direction::D2H), transfer_cost(m, GiB, Direction::H2D));
}

TEST(CostModel, ExecuteScalesWithInput) {
  auto m = CostModel::defaults();
  EXPECT_EQ(execute_cost(m, "vadd", 1000 * MiB).count(), 1'000'000);
  EXPECT_EQ(execute_cost(m, "mmult", 1000 * MiB).count(), 2'000'000);
  try {
    execute_cost(m, "nope", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownKernel);
  }
}

TEST(CostModel, ConfigRoundTrip) {
  auto cfg = KvConfig::parse(
      "fpga.bw_h2d_bytes_per_s = 1000\nfpga.reconfig_latency_ms = 10\nfpga.worker_spawn_ms = 50-70\n"
      "fpga.kernel_throughput.foo_bytes_per_s = 123\n");
  auto m = CostModel::from_config(cfg, "fpga.");
  EXPECT_DOUBLE_EQ(m.bw_h2d, 1000);
  EXPECT_DOUBLE_EQ(m.bw_d2h, 5.5 * GiB);
  EXPECT_EQ(m.reconfig_latency.count(), 10'000);
  EXPECT_EQ(m.worker_spawn().count(), 60'000);
  EXPECT_DOUBLE_EQ(m.kernel_throughput.at("foo"), 123);
  std::ostringstream os;
  m.write_config(os, "fpga.");
  auto again = CostModel::from_config(KvConfig::parse(os.str()), "fpga.");
  EXPECT_DOUBLE_EQ(again.bw_h2d, m.bw_h2d);
  EXPECT_EQ(again.reconfig_latency, m.reconfig_latency);
  EXPECT_EQ(again.worker_spawn_min, m.worker_spawn_min);
  EXPECT_EQ(again.kernel_throughput, m.kernel_throughput);
}

TEST(CostModel, RejectsNonPositiveRates) {
  EXPECT_THROW(CostModel::from_config(KvConfig::parse("bw_h2d_bytes_per_s = 0\n")), Error);
  EXPECT_THROW(CostModel::from_config(KvConfig::parse("dma_fixed_latency_ms = -1\n")), Error);
}

TEST(BufferStateMachine, WholeBufferTable) {
  using S = BufferState;
  using E = BufferEvent;
  for (S s : {S::Init, S::Sync, S::Dirty}) {
    EXPECT_EQ(apply_buffer_event(s, E::Allocated), S::Init);
    EXPECT_EQ(apply_buffer_event(s, E::TransferH2DComplete), S::Sync);
    EXPECT_EQ(apply_buffer_event(s, E::TransferD2HComplete), S::Sync);
    EXPECT_EQ(apply_buffer_event(s, E::ExecuteWroteBuffer), S::Dirty);
    EXPECT_EQ(apply_buffer_event(s, E::ExecuteReadBuffer), s);
  }
}

TEST(BufferStateMachine, RangeEventsAgreeWithTableOnWholeBuffer) {
  MemBuffer b;
  b.size = 100;
  b.on_event(BufferEvent::Allocated);
  EXPECT_EQ(b.state, BufferState::Init);
  b.on_event(BufferEvent::ExecuteReadBuffer);
  EXPECT_EQ(b.state, BufferState::Init);
  b.on_event(BufferEvent::TransferH2DComplete);
  EXPECT_EQ(b.state, BufferState::Sync);
  b.on_event(BufferEvent::ExecuteWroteBuffer);
  EXPECT_EQ(b.state, BufferState::Dirty);
  b.on_event(BufferEvent::TransferD2HComplete);
  EXPECT_EQ(b.state, BufferState::Sync);
}

TEST(BufferStateMachine, PartialReadBackLeavesRestDirty) {
  MemBuffer b;
  b.size = 100;
  b.on_event(BufferEvent::Allocated);
  b.on_event(BufferEvent::ExecuteWroteBuffer, 0, 100);
  b.on_event(BufferEvent::TransferD2HComplete, 0, 40);
  EXPECT_EQ(b.state, BufferState::Dirty);
  EXPECT_EQ(b.divergence.total(), 60u);
  b.on_event(BufferEvent::TransferD2HComplete, 40, 100);
  EXPECT_EQ(b.state, BufferState::Sync);
}

TEST(BufferStateMachine, HostWriteDivergesOnlyWrittenRanges) {
  MemBuffer b;
  b.size = 100;
  b.on_event(BufferEvent::Allocated);
  b.on_event(BufferEvent::TransferH2DComplete, 0, 50);
  b.on_host_write(0, 100);
  EXPECT_EQ(b.state, BufferState::Dirty);
  EXPECT_EQ(b.divergence.total(), 50u);
  EXPECT_EQ(b.untouched.total(), 50u);
}

Bitstream vadd_bitstream() { return Bitstream{"vadd", {{"vadd", true}}}; }

TEST(Bitstream, EncodeDecodeAndRejectGarbage) {
  auto b = vadd_bitstream();
  EXPECT_EQ(Bitstream::decode(b.encode()), b);
  EXPECT_NE(b.find("vadd"), nullptr);
  EXPECT_EQ(b.find("x"), nullptr);
  std::vector<std::uint8_t> junk{1, 2, 3};
  EXPECT_THROW(Bitstream::decode(junk), Error);
  EXPECT_THROW(Bitstream::decode({}), Error);
}

TEST(Device, SlotOwnershipAndReconfigure) {
  FpgaDevice d("dev", CostModel::defaults(), 2);
  EXPECT_EQ(d.free_slot(), 0u);
  EXPECT_EQ(d.reconfigure(0, TaskId("a"), vadd_bitstream()).count(), 3'500'000);
  EXPECT_EQ(d.free_slot(), 1u);
  EXPECT_EQ(d.slot_of(TaskId("a")), 0u);
  try {
    d.reconfigure(0, TaskId("b"), vadd_bitstream());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SlotOccupiedByOther);
  }
  // Reprogramming one's own slot has no cache discount.
  EXPECT_EQ(d.reconfigure(0, TaskId("a"), vadd_bitstream()).count(), 3'500'000);
  d.mark_busy(0, 7);
  EXPECT_TRUE(std::holds_alternative<SlotBusy>(d.slot(0).status));
  d.mark_idle(0);
  EXPECT_TRUE(std::holds_alternative<SlotConfigured>(d.slot(0).status));
  EXPECT_THROW(d.mark_busy(1, 1), Error);
}

TEST(Device, AllocationIsFirstFitAndBounded) {
  auto m = CostModel::defaults();
  m.mem_capacity = 1000;
  FpgaDevice d("dev", m, 1);
  auto& a = d.allocate(TaskId("t"), 1, 400, 0);
  auto& b = d.allocate(TaskId("t"), 2, 400, 400);
  EXPECT_EQ(a.phys, 0u);
  EXPECT_EQ(b.phys, 400u);
  EXPECT_EQ(a.state, BufferState::Init);
  EXPECT_EQ(d.memory_usage(), 800u);
  try {
    d.allocate(TaskId("t"), 3, 300, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::OutOfMemory);
  }
  EXPECT_THROW(d.allocate(TaskId("t"), 1, 10, 0), Error);
  EXPECT_EQ(d.buffers_of(TaskId("t")).size(), 2u);
}

TEST(Device, RetainedResidueIsVisibleScrubbedIsNot) {
  auto m = CostModel::defaults();
  m.mem_capacity = 1000;
  FpgaDevice d("dev", m, 1);
  d.allocate(TaskId("a"), 1, 500, 0);
  d.write(1, 0, Content::filled(500, 42), 0, 500);
  d.release_buffers(TaskId("a"), ReleaseMode::Retain);
  d.allocate(TaskId("b"), 2, 500, 0);
  EXPECT_EQ(d.read(2), Content::filled(500, 42));
  d.release_buffers(TaskId("b"), ReleaseMode::Scrub);
  EXPECT_EQ(d.memory_usage(), 0u);
  d.allocate(TaskId("c"), 3, 500, 0);
  EXPECT_TRUE(d.read(3).is_zero());
}

TEST(Device, ZeroAndReleaseClearsSlotAndMemory) {
  FpgaDevice d("dev");
  d.reconfigure(0, TaskId("a"), vadd_bitstream());
  d.slot(0).csr.write("scalar0", 5);
  d.allocate(TaskId("a"), 1, 4096, 0);
  d.write(1, 0, Content::filled(4096, 9), 0, 4096);
  d.zero_and_release(TaskId("a"));
  EXPECT_TRUE(d.slot(0).free());
  EXPECT_FALSE(d.slot(0).owner);
  EXPECT_TRUE(d.slot(0).csr.registers.empty());
  EXPECT_TRUE(d.physical().is_zero());
  EXPECT_EQ(d.find(1), nullptr);
  EXPECT_THROW(d.zero_and_release(TaskId("a")), Error);
}

TEST(Device, WriteAtOffsetIsBufferRelative) {
  FpgaDevice d("dev");
  d.allocate(TaskId("a"), 1, 100, 0);
  d.allocate(TaskId("a"), 2, 100, 100);
  d.write(2, 10, Content::filled(20, 5), 0, 20);
  auto c = d.read(2);
  EXPECT_EQ(c.token_at(9), 0u);
  EXPECT_EQ(c.token_at(10), 5u);
  EXPECT_EQ(c.token_at(29), 5u);
  EXPECT_EQ(c.token_at(30), 0u);
  EXPECT_TRUE(d.read(1).is_zero());
}

TEST(Kernels, DeterministicAndInputSensitive) {
  std::vector<std::uint64_t> in1{1, 2}, in2{1, 3}, sc{};
  EXPECT_EQ(streaming_token("vadd", 0, in1, sc), streaming_token("vadd", 0, in1, sc));
  EXPECT_NE(streaming_token("vadd", 0, in1, sc), streaming_token("vadd", 0, in2, sc));
  EXPECT_NE(batch_token("mmult", 0, in1, sc, 1), batch_token("mmult", 0, in1, sc, 2));
}

}  // namespace
}  // namespace funky::fpga
