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

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

#include "funky/bytes.hpp"
#include "funky/common.hpp"

namespace funky::fpga {

// Simulated memory contents. A buffer is a sequence of segments, each labelled
// with a token naming the byte generator for that range. Positions are buffer
// offsets, so copies between a host buffer and its device twin keep labels.
// Token 0 is all-zero memory. Adjacent segments with equal tokens are merged,
// which makes the digest independent of how the range was written (one large
// transfer or many chunks).
class Content {
 public:
  struct Segment {
    Bytes begin = 0;
    Bytes end = 0;
    std::uint64_t token = 0;
    friend bool operator==(const Segment&, const Segment&) = default;
  };

  Content() = default;
  static Content filled(Bytes size, std::uint64_t token);
  static Content zeros(Bytes size) { return filled(size, 0); }

  Bytes size() const { return size_; }
  const std::vector<Segment>& segments() const { return segs_; }
  bool is_zero() const;
  std::uint64_t token_at(Bytes pos) const;

  // Segments clipped to [begin, end).
  std::vector<Segment> pieces(Bytes begin, Bytes end) const;

  void fill(Bytes begin, Bytes end, std::uint64_t token);
  // Copy [begin, end) from `src` at the same offsets.
  void copy_from(const Content& src, Bytes begin, Bytes end);
  // Copy src[begin, end) to this at offset `at` (labels shift with the data).
  void write(Bytes at, const Content& src, Bytes begin, Bytes end);
  // [begin, end) rebased to offset 0.
  Content slice(Bytes begin, Bytes end) const;
  // Replace [begin, end) with the given clipped pieces (must tile the range).
  void assign(Bytes begin, Bytes end, const std::vector<Segment>& pieces);

  std::uint64_t digest() const;

  void encode(ByteWriter& w) const;
  static Content decode(ByteReader& r);

  friend bool operator==(const Content&, const Content&) = default;

 private:
  void normalize();

  Bytes size_ = 0;
  std::vector<Segment> segs_;
};

// Elementwise kernel output over [begin, end): for each maximal piece on which
// all inputs have constant tokens, out = fn(input tokens).
template <typename Fn>
std::vector<Content::Segment> map_elementwise(const std::vector<const Content*>& inputs, Bytes begin,
                                              Bytes end, Fn&& fn) {
  std::vector<Bytes> cuts{begin, end};
  for (const auto* in : inputs)
    for (const auto& s : in->pieces(begin, end)) cuts.push_back(s.begin);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<Content::Segment> out;
  std::vector<std::uint64_t> toks(inputs.size());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    for (std::size_t k = 0; k < inputs.size(); ++k) toks[k] = inputs[k]->token_at(cuts[i]);
    out.push_back({cuts[i], cuts[i + 1], fn(toks)});
  }
  return out;
}

// Half-open byte ranges, coalesced.
class IntervalSet {
 public:
  void add(Bytes begin, Bytes end);
  void subtract(Bytes begin, Bytes end);
  void clear() { ranges_.clear(); }
  bool empty() const { return ranges_.empty(); }
  Bytes total() const;
  bool covers(Bytes begin, Bytes end) const;
  const std::map<Bytes, Bytes>& ranges() const { return ranges_; }

  void encode(ByteWriter& w) const;
  static IntervalSet decode(ByteReader& r);

  friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

 private:
  std::map<Bytes, Bytes> ranges_;
};

}  // namespace funky::fpga
