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

#include "funky/fpga/kernel.hpp"

#include "funky/common.hpp"

namespace funky::fpga {

namespace {

std::uint64_t fold(std::uint64_t h, std::span<const std::uint64_t> xs) {
  h = hash_combine(h, xs.size());
  for (auto x : xs) h = hash_combine(h, x);
  return h;
}

}  // namespace

std::uint64_t streaming_token(std::string_view kernel_id, std::size_t out_index,
                              std::span<const std::uint64_t> input_tokens,
                              std::span<const std::uint64_t> scalars) {
  auto h = hash_combine(fnv1a(kernel_id), out_index);
  h = fold(fold(h, input_tokens), scalars);
  return h == 0 ? 1 : h;  // 0 is reserved for zeroed memory
}

std::uint64_t batch_token(std::string_view kernel_id, std::size_t out_index,
                          std::span<const std::uint64_t> input_digests,
                          std::span<const std::uint64_t> scalars, std::uint32_t invocation) {
  auto h = hash_combine(fnv1a(kernel_id) ^ 0xba7c4ull, out_index);
  h = hash_combine(fold(fold(h, input_digests), scalars), invocation);
  return h == 0 ? 1 : h;
}

}  // namespace funky::fpga
