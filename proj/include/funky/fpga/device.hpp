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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "funky/common.hpp"
#include "funky/fpga/buffer.hpp"
#include "funky/fpga/content.hpp"
#include "funky/fpga/cost_model.hpp"

namespace funky::fpga {

struct KernelInfo {
  std::string id;
  bool streaming = false;
  friend bool operator==(const KernelInfo&, const KernelInfo&) = default;
};

// Stand-in for a compiled FPGA image: the bytes carry the kernel catalog.
struct Bitstream {
  std::string id;
  std::vector<KernelInfo> kernels;

  std::vector<std::uint8_t> encode() const;
  // Throws InvalidBitstream on empty or unreadable bytes.
  static Bitstream decode(std::span<const std::uint8_t> bytes);
  const KernelInfo* find(const std::string& kernel_id) const;
  friend bool operator==(const Bitstream&, const Bitstream&) = default;
};

struct RegisterFile {
  std::map<std::string, std::uint32_t> registers;

  void clear() { registers.clear(); }
  std::uint32_t read(const std::string& name) const;
  void write(const std::string& name, std::uint32_t v) { registers[name] = v; }
  std::uint64_t digest() const;
  void encode(ByteWriter& w) const;
  static RegisterFile decode(ByteReader& r);
  friend bool operator==(const RegisterFile&, const RegisterFile&) = default;
};

struct SlotFree {};
struct SlotConfigured {
  std::string bitstream_id;
};
struct SlotBusy {
  std::string bitstream_id;
  std::uint64_t request_id = 0;
};
using SlotStatus = std::variant<SlotFree, SlotConfigured, SlotBusy>;

struct VFpga {
  std::uint32_t slot_id = 0;
  SlotStatus status = SlotFree{};
  std::optional<TaskId> owner;
  std::optional<Bitstream> bitstream;
  RegisterFile csr;

  bool free() const { return std::holds_alternative<SlotFree>(status); }
  std::string bitstream_id() const { return bitstream ? bitstream->id : std::string{}; }
};

enum class ReleaseMode { Scrub, Retain };

// One FPGA card: a Shell with reconfigurable slots sharing off-chip memory.
// Memory contents are tracked over the physical address space so residue left
// by a released buffer is visible to whoever allocates that range next.
class FpgaDevice {
 public:
  explicit FpgaDevice(std::string device_id, CostModel cost = CostModel::defaults(),
                      std::size_t n_slots = 1);

  const std::string& device_id() const { return device_id_; }
  const CostModel& cost() const { return cost_; }
  Bytes mem_capacity() const { return cost_.mem_capacity; }

  std::size_t slot_count() const { return slots_.size(); }
  const VFpga& slot(std::size_t i) const { return slots_.at(i); }
  VFpga& slot(std::size_t i) { return slots_.at(i); }
  std::optional<std::size_t> free_slot() const;
  std::optional<std::size_t> slot_of(const TaskId& task) const;

  // Program a slot. Pays the full latency every time (no bitstream caching).
  // Throws SlotOccupiedByOther.
  Duration reconfigure(std::size_t slot_id, const TaskId& requester, const Bitstream& bitstream);
  void mark_busy(std::size_t slot_id, std::uint64_t request_id);
  void mark_idle(std::size_t slot_id);

  // First-fit allocation. The buffer starts Init over whatever the memory holds.
  // Throws OutOfMemory or InvalidState on a duplicate id.
  MemBuffer& allocate(const TaskId& owner, BufferId id, Bytes size, GuestAddr guest_addr);
  const MemBuffer* find(BufferId id) const;
  MemBuffer* find(BufferId id);
  std::vector<BufferId> buffers_of(const TaskId& task) const;
  const std::map<BufferId, MemBuffer>& buffers() const { return buffers_; }

  // Buffer-relative view of the buffer's contents.
  Content read(BufferId id) const;
  // Write src[begin, end) at buffer offset `at`.
  void write(BufferId id, Bytes at, const Content& src, Bytes begin, Bytes end);
  void write_pieces(BufferId id, Bytes begin, Bytes end, const std::vector<Content::Segment>& pieces);

  void release_buffers(const TaskId& task, ReleaseMode mode);
  // Free every buffer of the task with its memory overwritten by zeros, free
  // the slot and clear its registers. Throws NotOwner if the task holds no slot.
  void zero_and_release(const TaskId& task);

  Bytes memory_usage() const { return used_; }
  Bytes memory_free() const { return cost_.mem_capacity - used_; }
  const Content& physical() const { return phys_; }

 private:
  std::string device_id_;
  CostModel cost_;
  std::vector<VFpga> slots_;
  std::map<BufferId, MemBuffer> buffers_;
  std::map<Bytes, BufferId> by_phys_;
  Content phys_;
  Bytes used_ = 0;
};

}  // namespace funky::fpga
