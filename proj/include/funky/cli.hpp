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

#include <iosfwd>

namespace funky::cli {

// Entry point of the `funky` tool. Exit codes: 0 success, 1 usage error
// (synopsis on `err`), 2 runtime error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Entry point of `funky-node`: serve the node runtime, or send one raw
// runtime command to a node.
int run_node(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace funky::cli
