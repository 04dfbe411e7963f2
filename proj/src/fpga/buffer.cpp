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

#include "funky/fpga/buffer.hpp"

#include <algorithm>

namespace funky::fpga {

std::string_view to_string(BufferState s) {
  switch (s) {
    case BufferState::Init: return "init";
    case BufferState::Sync: return "sync";
    case BufferState::Dirty: return "dirty";
  }
  return "?";
}

std::string_view to_string(BufferEvent e) {
  switch (e) {
    case BufferEvent::Allocated: return "allocated";
    case BufferEvent::TransferH2DComplete: return "h2d_complete";
    case BufferEvent::TransferD2HComplete: return "d2h_complete";
    case BufferEvent::ExecuteWroteBuffer: return "execute_wrote";
    case BufferEvent::ExecuteReadBuffer: return "execute_read";
  }
  return "?";
}

void MemBuffer::refresh_state() {
  if (!divergence.empty())
    state = BufferState::Dirty;
  else if (untouched.covers(0, size))
    state = BufferState::Init;
  else
    state = BufferState::Sync;
}

void MemBuffer::on_event(BufferEvent event, Bytes begin, Bytes end) {
  end = std::min(end, size);
  if (event == BufferEvent::Allocated) {
    divergence.clear();
    untouched.clear();
    untouched.add(0, size);
    state = BufferState::Init;
    return;
  }
  if (event == BufferEvent::ExecuteReadBuffer || begin >= end) return;
  untouched.subtract(begin, end);
  switch (event) {
    case BufferEvent::TransferH2DComplete:
    case BufferEvent::TransferD2HComplete: divergence.subtract(begin, end); break;
    case BufferEvent::ExecuteWroteBuffer: divergence.add(begin, end); break;
    default: break;
  }
  refresh_state();
}

void MemBuffer::on_host_write(Bytes begin, Bytes end) {
  end = std::min(end, size);
  if (begin >= end) return;
  divergence.add(begin, end);
  // Never-written device ranges still hold their allocation contents.
  for (const auto& [lo, hi] : untouched.ranges()) divergence.subtract(lo, hi);
  refresh_state();
}

}  // namespace funky::fpga
