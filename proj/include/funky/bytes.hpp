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
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "funky/common.hpp"

namespace funky {

// Little-endian fixed-width writer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  // u32 length prefix
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void blob(std::span<const std::uint8_t> b) {
    u64(b.size());
    raw(b);
  }

  std::size_t size() const { return out_.size(); }
  const std::vector<std::uint8_t>& bytes() const& { return out_; }
  std::vector<std::uint8_t> take() && { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

// Bounds-checked little-endian reader. Every short read throws `Error(code_)`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> in, Errc code) : in_(in), code_(code) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  double f64() {
    auto bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string str(std::size_t max_len = 1u << 20) {
    auto n = u32();
    if (n > max_len) fail(code_, "string length " + std::to_string(n) + " exceeds limit");
    auto s = take(n);
    return {s.begin(), s.end()};
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > remaining()) fail(code_, "truncated input");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> blob() {
    auto n = u64();
    if (n > remaining()) fail(code_, "truncated blob");
    return take(static_cast<std::size_t>(n));
  }

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }
  void expect_done() const {
    if (!done()) fail(code_, std::to_string(remaining()) + " trailing bytes");
  }
  Errc code() const { return code_; }

 private:
  std::uint64_t get(int n) {
    if (static_cast<std::size_t>(n) > remaining()) fail(code_, "truncated input");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  Errc code_;
};

}  // namespace funky
