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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "funky/common.hpp"
#include "funky/fpga/buffer.hpp"
#include "funky/fpga/content.hpp"
#include "funky/fpga/device.hpp"

namespace funky::monitor {

struct DirtyBuffer {
  fpga::BufferId buff_id = 0;
  Bytes size = 0;
  GuestAddr guest_addr = 0;
  std::uint64_t content_digest = 0;
  fpga::Content data;
  friend bool operator==(const DirtyBuffer&, const DirtyBuffer&) = default;
};

struct BufferEntry {
  fpga::BufferId buff_id = 0;
  Bytes size = 0;
  GuestAddr guest_addr = 0;
  fpga::BufferState state = fpga::BufferState::Init;
  fpga::IntervalSet divergence;
  fpga::IntervalSet untouched;
  friend bool operator==(const BufferEntry&, const BufferEntry&) = default;
};

// FPGA state of an evicted task: registers, dirty buffer contents and the
// table of every buffer it owned.
struct FpgaContext {
  std::optional<fpga::Bitstream> bitstream;  // empty when the task held no vFPGA
  fpga::RegisterFile registers;
  std::vector<DirtyBuffer> dirty_buffers;
  std::vector<BufferEntry> buffer_table;

  static constexpr Bytes kHeaderBytes = 4096;

  bool has_fpga() const { return bitstream.has_value(); }
  std::string bitstream_id() const { return bitstream ? bitstream->id : std::string{}; }
  // Σ dirty buffer sizes.
  Bytes payload_bytes() const;
  Bytes byte_size() const { return payload_bytes() + kHeaderBytes; }
  // Bytes that resume copies back: dirty buffers whole, the written part of sync ones.
  Bytes restore_bytes() const;
  std::uint64_t digest() const;

  std::vector<std::uint8_t> encode() const;
  static FpgaContext decode(std::span<const std::uint8_t> bytes);
  friend bool operator==(const FpgaContext&, const FpgaContext&) = default;
};

struct SnapshotMeta {
  std::string node_id;
  std::int64_t priority = 0;
  Bytes logical_bytes = 0;
  friend bool operator==(const SnapshotMeta&, const SnapshotMeta&) = default;
};

// Self-contained task image. File layout: "FNKY", u16 version, task_id,
// created_at, snapshot_id and a 64-bit digest of those header bytes, then
// sections GUEST, FPGACTX and META, each a name, a u64 length, the payload
// and a 64-bit digest of the payload.
struct Snapshot {
  std::string snapshot_id;
  TaskId task_id;
  SimTime created_at{0};
  std::vector<std::uint8_t> guest_state;
  FpgaContext fpga_context;
  SnapshotMeta meta;

  static constexpr std::uint16_t kVersion = 1;

  std::vector<std::uint8_t> encode() const;
  // Throws SnapshotCorrupt on any framing, digest or payload error.
  static Snapshot decode(std::span<const std::uint8_t> bytes);
  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

// Snapshot files under a directory.
class SnapshotStore {
 public:
  explicit SnapshotStore(std::filesystem::path root) : root_(std::move(root)) {}
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path resolve(const std::string& name) const;
  // Throws StoreUnavailable.
  std::filesystem::path write(const std::string& name, const Snapshot& snap) const;
  // Throws StoreUnavailable when missing, SnapshotCorrupt when unreadable.
  Snapshot read(const std::string& name) const;
  bool exists(const std::string& name) const;

 private:
  std::filesystem::path root_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& p, Errc missing);
void write_file(const std::filesystem::path& p, std::span<const std::uint8_t> data, Errc failure);

}  // namespace funky::monitor
