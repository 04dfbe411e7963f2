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
#include <deque>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "funky/bytes.hpp"
#include "funky/common.hpp"
#include "funky/fpga/buffer.hpp"
#include "funky/fpga/cost_model.hpp"

namespace funky::protocol {

using fpga::BufferId;
using fpga::Direction;
using QueueId = std::uint32_t;
using ReqId = std::uint64_t;

enum class ArgDir : std::uint8_t { In = 0, Out = 1, InOut = 2 };

std::string_view to_string(ArgDir d);
ArgDir arg_dir_from_string(std::string_view s);
inline bool reads(ArgDir d) { return d != ArgDir::Out; }
inline bool writes(ArgDir d) { return d != ArgDir::In; }

struct ScalarArg {
  std::uint64_t value = 0;
  friend bool operator==(const ScalarArg&, const ScalarArg&) = default;
};
struct BufferArg {
  BufferId buff_id = 0;
  ArgDir dir = ArgDir::In;
  friend bool operator==(const BufferArg&, const BufferArg&) = default;
};
using KernelArg = std::variant<ScalarArg, BufferArg>;

// Allocates a buffer on FPGA memory, twinned with guest memory at `src`.
struct MemoryReq {
  BufferId buff_id = 0;
  GuestAddr src = 0;
  Bytes size = 0;
  friend bool operator==(const MemoryReq&, const MemoryReq&) = default;
};

// DMA between guest memory at `src` and the matching offset of the buffer.
struct TransferReq {
  QueueId queue_id = 0;
  BufferId buff_id = 0;
  GuestAddr src = 0;
  Bytes size = 0;
  Direction dir = Direction::H2D;
  friend bool operator==(const TransferReq&, const TransferReq&) = default;
};

// Launches a kernel over the work range [offset, offset + bytes) of its
// buffer arguments.
struct ExecuteReq {
  QueueId queue_id = 0;
  std::string kernel_id;
  std::vector<KernelArg> args;
  Bytes offset = 0;
  Bytes bytes = 0;
  friend bool operator==(const ExecuteReq&, const ExecuteReq&) = default;
};

// Completes once every earlier request on the queue has completed.
struct SyncReq {
  QueueId queue_id = 0;
  ReqId req_id = 0;
  friend bool operator==(const SyncReq&, const SyncReq&) = default;
};

using FunkyRequest = std::variant<MemoryReq, TransferReq, ExecuteReq, SyncReq>;

std::string_view kind_name(const FunkyRequest& r);
std::string describe(const FunkyRequest& r);

// Wire form: u8 tag (1..4), then little-endian fields. Strings carry a u16
// length; the argument list a u16 count, each argument tagged.
void encode(ByteWriter& w, const FunkyRequest& r);
std::vector<std::uint8_t> encode(const FunkyRequest& r);
// Throws MalformedRequest on truncation, unknown tags, zero sizes or trailing bytes.
FunkyRequest decode(std::span<const std::uint8_t> bytes);
FunkyRequest decode(ByteReader& r);

inline constexpr std::size_t kMaxKernelIdLen = 256;

// Single-producer / single-consumer request channel in shared guest memory.
// Ids start at 1 and complete strictly in submission order.
class RequestQueue {
 public:
  struct Entry {
    ReqId id = 0;
    FunkyRequest request;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  RequestQueue() = default;
  explicit RequestQueue(QueueId id) : id_(id) {}

  QueueId id() const { return id_; }
  bool closed() const { return closed_; }
  void close() { closed_ = true; }
  void reopen() { closed_ = false; }

  // Throws QueueClosed.
  ReqId submit(FunkyRequest r);
  // Throws ProtocolViolation unless `id` is the oldest pending request.
  void complete(ReqId id);

  bool empty() const { return pending_.empty(); }
  std::size_t size() const { return pending_.size(); }
  const Entry& at(std::size_t i) const { return pending_.at(i); }
  const std::deque<Entry>& pending() const { return pending_; }
  ReqId last_submitted() const { return next_id_ - 1; }
  ReqId last_completed() const { return completed_upto_; }
  bool is_completed(ReqId id) const { return id >= 1 && id <= completed_upto_; }

  void encode(ByteWriter& w) const;
  static RequestQueue decode(ByteReader& r);
  friend bool operator==(const RequestQueue&, const RequestQueue&) = default;

 private:
  QueueId id_ = 0;
  bool closed_ = false;
  ReqId next_id_ = 1;
  ReqId completed_upto_ = 0;
  std::deque<Entry> pending_;
};

struct VFpgaHandle {
  std::uint64_t handle_id = 0;
  std::string device_id;
  std::uint32_t slot_id = 0;
  std::vector<QueueId> queue_ids;

  void encode(ByteWriter& w) const;
  static VFpgaHandle decode(ByteReader& r);
  friend bool operator==(const VFpgaHandle&, const VFpgaHandle&) = default;
};

}  // namespace funky::protocol
