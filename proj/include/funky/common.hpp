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

#include <chrono>
#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace funky {

using Bytes = std::uint64_t;
using GuestAddr = std::uint64_t;

inline constexpr Bytes KiB = 1024;
inline constexpr Bytes MiB = 1024 * KiB;
inline constexpr Bytes GiB = 1024 * MiB;

// Simulated time: integer microsecond ticks. Cost-model durations are rounded up.
using Duration = std::chrono::microseconds;
using SimTime = std::chrono::microseconds;

Duration ceil_seconds(double seconds);
Duration ceil_millis(double millis);
double to_millis(Duration d);
double to_seconds(Duration d);

// Opaque string identifier with a distinct type per Tag.
template <typename Tag>
class Id {
 public:
  Id() = default;
  explicit Id(std::string v) : value_(std::move(v)) {}

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend auto operator<=>(const Id&, const Id&) = default;
  friend bool operator==(const Id&, const Id&) = default;

 private:
  std::string value_;
};

struct TaskTag {};
struct NodeTag {};
using TaskId = Id<TaskTag>;
using NodeId = Id<NodeTag>;

enum class Errc {
  SlotOccupiedByOther,
  UnknownKernel,
  NotOwner,
  OutOfMemory,
  NoFreeSlot,
  InvalidBitstream,
  HandleAlreadyHeld,
  StaleHandle,
  QueueClosed,
  MalformedRequest,
  ProtocolViolation,
  NotStreaming,
  Unsupported,
  IsolationFault,
  AlreadyEvicted,
  AlreadyRunning,
  StoreUnavailable,
  SnapshotCorrupt,
  UnknownTask,
  NotPreemptible,
  ContextMissing,
  PeerUnreachable,
  ParseError,
  InvalidConfig,
  InvalidState,
  TaskExists,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

// 64-bit hashing used for content digests and event-log digests.
std::uint64_t fnv1a(std::span<const std::uint8_t> data,
                    std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a(std::string_view text,
                    std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v);

std::string hex64(std::uint64_t v);

}  // namespace funky

template <typename Tag>
struct std::hash<funky::Id<Tag>> {
  std::size_t operator()(const funky::Id<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
