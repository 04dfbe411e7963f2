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
#include <string_view>

#include "funky/common.hpp"
#include "funky/fpga/content.hpp"

namespace funky::fpga {

using BufferId = std::uint64_t;

enum class BufferState : std::uint8_t { Init = 0, Sync = 1, Dirty = 2 };

enum class BufferEvent : std::uint8_t {
  Allocated = 0,
  TransferH2DComplete = 1,
  TransferD2HComplete = 2,
  ExecuteWroteBuffer = 3,
  ExecuteReadBuffer = 4,
};

std::string_view to_string(BufferState s);
std::string_view to_string(BufferEvent e);

// Whole-buffer transition table.
constexpr BufferState apply_buffer_event(BufferState state, BufferEvent event) {
  switch (event) {
    case BufferEvent::Allocated: return BufferState::Init;
    case BufferEvent::TransferH2DComplete:
    case BufferEvent::TransferD2HComplete: return BufferState::Sync;
    case BufferEvent::ExecuteWroteBuffer: return BufferState::Dirty;
    case BufferEvent::ExecuteReadBuffer: return state;
  }
  return state;
}

// A device memory buffer and its host twin relation. `untouched` holds the
// byte ranges no transfer or kernel has written since allocation;
// `divergence` the written ranges whose device contents may differ from the
// host buffer at `guest_addr`. The state is Dirty iff anything diverges, Init
// while the whole buffer is untouched, Sync otherwise. For events covering
// the whole buffer this agrees with apply_buffer_event.
struct MemBuffer {
  BufferId buffer_id = 0;
  TaskId owner;
  Bytes size = 0;
  Bytes phys = 0;  // device address
  GuestAddr guest_addr = 0;
  BufferState state = BufferState::Init;
  IntervalSet divergence;
  IntervalSet untouched;

  void on_event(BufferEvent event, Bytes begin, Bytes end);
  void on_event(BufferEvent event) { on_event(event, 0, size); }
  // The host twin changed in [begin, end) (buffer offsets) behind our back.
  void on_host_write(Bytes begin, Bytes end);
  void refresh_state();
};

}  // namespace funky::fpga
