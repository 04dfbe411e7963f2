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

#include "funky/common.hpp"

#include <cmath>
#include <cstdio>

namespace funky {

Duration ceil_seconds(double seconds) {
  return Duration(static_cast<std::int64_t>(std::ceil(seconds * 1e6 - 1e-6)));
}

Duration ceil_millis(double millis) {
  return Duration(static_cast<std::int64_t>(std::ceil(millis * 1e3 - 1e-6)));
}

double to_millis(Duration d) { return static_cast<double>(d.count()) / 1e3; }
double to_seconds(Duration d) { return static_cast<double>(d.count()) / 1e6; }

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::SlotOccupiedByOther: return "SlotOccupiedByOther";
    case Errc::UnknownKernel: return "UnknownKernel";
    case Errc::NotOwner: return "NotOwner";
    case Errc::OutOfMemory: return "OutOfMemory";
    case Errc::NoFreeSlot: return "NoFreeSlot";
    case Errc::InvalidBitstream: return "InvalidBitstream";
    case Errc::HandleAlreadyHeld: return "HandleAlreadyHeld";
    case Errc::StaleHandle: return "StaleHandle";
    case Errc::QueueClosed: return "QueueClosed";
    case Errc::MalformedRequest: return "MalformedRequest";
    case Errc::ProtocolViolation: return "ProtocolViolation";
    case Errc::NotStreaming: return "NotStreaming";
    case Errc::Unsupported: return "Unsupported";
    case Errc::IsolationFault: return "IsolationFault";
    case Errc::AlreadyEvicted: return "AlreadyEvicted";
    case Errc::AlreadyRunning: return "AlreadyRunning";
    case Errc::StoreUnavailable: return "StoreUnavailable";
    case Errc::SnapshotCorrupt: return "SnapshotCorrupt";
    case Errc::UnknownTask: return "UnknownTask";
    case Errc::NotPreemptible: return "NotPreemptible";
    case Errc::ContextMissing: return "ContextMissing";
    case Errc::PeerUnreachable: return "PeerUnreachable";
    case Errc::ParseError: return "ParseError";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidState: return "InvalidState";
    case Errc::TaskExists: return "TaskExists";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

std::uint64_t fnv1a(std::span<const std::uint8_t> data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
  return fnv1a(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), seed);
}

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ (mix64(v) + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2)));
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace funky
