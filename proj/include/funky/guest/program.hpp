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
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "funky/common.hpp"
#include "funky/fpga/device.hpp"
#include "funky/protocol/request.hpp"

namespace funky::guest {

using protocol::ArgDir;

struct HostBufferDecl {
  std::string name;
  Bytes size = 0;
  std::uint64_t initial_digest = 0;  // generator token of the initial contents; 0 = zeros
  friend bool operator==(const HostBufferDecl&, const HostBufferDecl&) = default;
};

struct ApiCall;

namespace call {
struct CreateProgram {
  std::string bitstream_id;  // empty: the program's bitstream
  friend bool operator==(const CreateProgram&, const CreateProgram&) = default;
};
struct CreateBuffer {
  std::string name;
  friend bool operator==(const CreateBuffer&, const CreateBuffer&) = default;
};
// bytes == 0 means the rest of the buffer from offset.
struct EnqueueWrite {
  std::string name;
  Bytes offset = 0;
  Bytes bytes = 0;
  friend bool operator==(const EnqueueWrite&, const EnqueueWrite&) = default;
};
struct EnqueueRead {
  std::string name;
  Bytes offset = 0;
  Bytes bytes = 0;
  friend bool operator==(const EnqueueRead&, const EnqueueRead&) = default;
};
struct SetArg {
  std::uint32_t index = 0;
  std::optional<std::uint64_t> scalar;
  std::string buffer;
  ArgDir dir = ArgDir::In;
  friend bool operator==(const SetArg&, const SetArg&) = default;
};
struct EnqueueKernel {
  std::string kernel_id;
  Bytes bytes = 0;
  Bytes offset = 0;
  friend bool operator==(const EnqueueKernel&, const EnqueueKernel&) = default;
};
struct Finish {
  friend bool operator==(const Finish&, const Finish&) = default;
};
struct ReleaseProgram {
  friend bool operator==(const ReleaseProgram&, const ReleaseProgram&) = default;
};
// Runs `body` count times. With `partition`, iteration i of n narrows every
// range in the body to its i-th slice [floor(i*B/n), floor((i+1)*B/n)).
struct Repeat {
  std::uint32_t count = 1;
  bool partition = true;
  std::vector<ApiCall> body;
  friend bool operator==(const Repeat&, const Repeat&);
};
}  // namespace call

struct ApiCall {
  using Variant = std::variant<call::CreateProgram, call::CreateBuffer, call::EnqueueWrite, call::EnqueueRead,
                               call::SetArg, call::EnqueueKernel, call::Finish, call::ReleaseProgram, call::Repeat>;
  Variant v;

  template <typename T>
    requires(!std::is_same_v<std::decay_t<T>, ApiCall>)
  ApiCall(T x) : v(std::move(x)) {}
  ApiCall() : v(call::Finish{}) {}
  friend bool operator==(const ApiCall&, const ApiCall&) = default;
};

std::string_view op_name(const ApiCall& c);

struct TaskProgram {
  std::string program_id;
  std::string bitstream_id;
  std::vector<fpga::KernelInfo> kernels;
  std::vector<HostBufferDecl> buffers;
  std::vector<ApiCall> steps;
  Bytes guest_mem_bytes = 0;  // 0: sized to fit the buffers

  const HostBufferDecl* buffer(const std::string& name) const;
  const fpga::KernelInfo* kernel(const std::string& id) const;
  fpga::Bitstream bitstream() const;

  // Structural rules: declared buffers, known kernels, exactly one
  // create_program followed later by one release_program at top level.
  // Throws ProtocolViolation.
  void check() const;

  // Steps with repeats unrolled and every range resolved to concrete bytes.
  std::vector<ApiCall> flatten() const;

  std::string to_json() const;
  static TaskProgram from_json(const std::string& text);
  static TaskProgram load(const std::filesystem::path& path);
  friend bool operator==(const TaskProgram&, const TaskProgram&) = default;
};

inline constexpr Bytes kDefaultMinChunk = 1 * MiB;

// Rewrites the top-level write/kernel/read run around the first kernel into a
// partitioned repeat of n_eff = min(n, max(1, B / min_chunk)) iterations.
// Throws NotStreaming when a kernel in the run is not streaming and
// Unsupported when the run's ranges differ from the kernel range.
TaskProgram split_chunks(const TaskProgram& program, std::uint32_t n_chunks, Bytes min_chunk = kDefaultMinChunk);

// Request count of a program (MEMORY + TRANSFER + EXECUTE + SYNC).
std::size_t request_count(const TaskProgram& program);

Bytes parse_size(const std::string& text);

}  // namespace funky::guest
