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
#include <span>
#include <string_view>

namespace funky::fpga {

// Simulated kernel semantics. Streaming kernels are elementwise: every output
// byte depends only on the input bytes at the same offset, so the output
// token of a piece is a function of the input tokens there. Batch kernels mix
// whole-range input digests and their invocation counter.
std::uint64_t streaming_token(std::string_view kernel_id, std::size_t out_index,
                              std::span<const std::uint64_t> input_tokens,
                              std::span<const std::uint64_t> scalars);

std::uint64_t batch_token(std::string_view kernel_id, std::size_t out_index,
                          std::span<const std::uint64_t> input_digests,
                          std::span<const std::uint64_t> scalars, std::uint32_t invocation);

}  // namespace funky::fpga
