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

#include <random>

#include "funky/protocol/request.hpp"

namespace funky::testing {

inline protocol::FunkyRequest random_request(std::mt19937_64& rng) {
  using namespace protocol;
  auto u64 = [&] { return rng() >> (rng() % 64); };
  auto nz = [&] { return 1 + (rng() >> (1 + rng() % 63)); };
  switch (rng() % 4) {
    case 0: return MemoryReq{u64(), u64(), nz()};
    case 1: return TransferReq{static_cast<QueueId>(rng()), u64(), u64(), nz(), rng() % 2 ? Direction::H2D : Direction::D2H};
    case 2: {
      ExecuteReq e;
      e.queue_id = static_cast<QueueId>(rng());
      std::size_t len = rng() % 20;
      for (std::size_t i = 0; i < len; ++i) e.kernel_id.push_back(static_cast<char>('a' + rng() % 26));
      e.offset = u64();
      e.bytes = u64();
      std::size_t n = rng() % 6;
      for (std::size_t i = 0; i < n; ++i) {
        if (rng() % 3 == 0)
          e.args.push_back(ScalarArg{u64()});
        else
          e.args.push_back(BufferArg{u64(), static_cast<ArgDir>(rng() % 3)});
      }
      return e;
    }
    default: return SyncReq{static_cast<QueueId>(rng()), u64()};
  }
}

}  // namespace funky::testing
