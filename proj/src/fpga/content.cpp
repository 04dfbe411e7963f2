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

#include "funky/fpga/content.hpp"

#include <algorithm>

namespace funky::fpga {

Content Content::filled(Bytes size, std::uint64_t token) {
  Content c;
  c.size_ = size;
  if (size > 0) c.segs_.push_back({0, size, token});
  return c;
}

bool Content::is_zero() const {
  return std::all_of(segs_.begin(), segs_.end(), [](const Segment& s) { return s.token == 0; });
}

std::uint64_t Content::token_at(Bytes pos) const {
  auto it = std::upper_bound(segs_.begin(), segs_.end(), pos,
                             [](Bytes p, const Segment& s) { return p < s.end; });
  return it == segs_.end() ? 0 : it->token;
}

std::vector<Content::Segment> Content::pieces(Bytes begin, Bytes end) const {
  std::vector<Segment> out;
  if (begin >= end) return out;
  auto it = std::upper_bound(segs_.begin(), segs_.end(), begin,
                             [](Bytes p, const Segment& s) { return p < s.end; });
  for (; it != segs_.end() && it->begin < end; ++it)
    out.push_back({std::max(it->begin, begin), std::min(it->end, end), it->token});
  return out;
}

void Content::fill(Bytes begin, Bytes end, std::uint64_t token) {
  assign(begin, end, {{begin, end, token}});
}

void Content::copy_from(const Content& src, Bytes begin, Bytes end) {
  assign(begin, end, src.pieces(begin, end));
}

void Content::write(Bytes at, const Content& src, Bytes begin, Bytes end) {
  if (begin >= end) return;
  auto ps = src.pieces(begin, end);
  for (auto& p : ps) {
    p.begin = p.begin - begin + at;
    p.end = p.end - begin + at;
  }
  assign(at, at + (end - begin), ps);
}

Content Content::slice(Bytes begin, Bytes end) const {
  Content c;
  end = std::min(end, size_);
  if (begin >= end) return c;
  c.size_ = end - begin;
  for (auto p : pieces(begin, end)) c.segs_.push_back({p.begin - begin, p.end - begin, p.token});
  return c;
}

void Content::assign(Bytes begin, Bytes end, const std::vector<Segment>& pieces) {
  end = std::min(end, size_);
  if (begin >= end) return;
  std::vector<Segment> next;
  next.reserve(segs_.size() + pieces.size() + 2);
  for (const auto& s : segs_)
    if (s.begin < begin) next.push_back({s.begin, std::min(s.end, begin), s.token});
  for (const auto& p : pieces)
    if (p.begin < p.end) next.push_back({std::max(p.begin, begin), std::min(p.end, end), p.token});
  for (const auto& s : segs_)
    if (s.end > end) next.push_back({std::max(s.begin, end), s.end, s.token});
  segs_ = std::move(next);
  normalize();
}

void Content::normalize() {
  std::vector<Segment> out;
  out.reserve(segs_.size());
  for (const auto& s : segs_) {
    if (s.begin >= s.end) continue;
    if (!out.empty() && out.back().token == s.token && out.back().end == s.begin)
      out.back().end = s.end;
    else
      out.push_back(s);
  }
  segs_ = std::move(out);
}

std::uint64_t Content::digest() const {
  std::uint64_t h = hash_combine(0x636f6e74656e74ull, size_);
  for (const auto& s : segs_) {
    h = hash_combine(h, s.begin);
    h = hash_combine(h, s.end);
    h = hash_combine(h, s.token);
  }
  return h;
}

void Content::encode(ByteWriter& w) const {
  w.u64(size_);
  w.u32(static_cast<std::uint32_t>(segs_.size()));
  for (const auto& s : segs_) {
    w.u64(s.begin);
    w.u64(s.end);
    w.u64(s.token);
  }
}

Content Content::decode(ByteReader& r) {
  Content c;
  c.size_ = r.u64();
  auto n = r.u32();
  if (n > r.remaining() / 24) fail(r.code(), "segment count exceeds input");
  Bytes pos = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    Segment s{r.u64(), r.u64(), r.u64()};
    if (s.begin != pos || s.end <= s.begin || s.end > c.size_) fail(r.code(), "segments do not tile buffer");
    pos = s.end;
    c.segs_.push_back(s);
  }
  if (pos != c.size_) fail(r.code(), "segments do not cover buffer");
  return c;
}

void IntervalSet::add(Bytes begin, Bytes end) {
  if (begin >= end) return;
  auto it = ranges_.upper_bound(begin);
  if (it != ranges_.begin()) {
    auto prev = std::prev(it);
    if (prev->second >= begin) {
      begin = prev->first;
      end = std::max(end, prev->second);
      it = ranges_.erase(prev);
    }
  }
  while (it != ranges_.end() && it->first <= end) {
    end = std::max(end, it->second);
    it = ranges_.erase(it);
  }
  ranges_.emplace(begin, end);
}

void IntervalSet::subtract(Bytes begin, Bytes end) {
  if (begin >= end) return;
  auto it = ranges_.upper_bound(begin);
  if (it != ranges_.begin()) --it;
  while (it != ranges_.end() && it->first < end) {
    auto [b, e] = *it;
    if (e <= begin) {
      ++it;
      continue;
    }
    it = ranges_.erase(it);
    if (b < begin) ranges_.emplace(b, begin);
    if (e > end) {
      ranges_.emplace(end, e);
      break;
    }
  }
}

Bytes IntervalSet::total() const {
  Bytes t = 0;
  for (auto [b, e] : ranges_) t += e - b;
  return t;
}

bool IntervalSet::covers(Bytes begin, Bytes end) const {
  if (begin >= end) return true;
  auto it = ranges_.upper_bound(begin);
  if (it == ranges_.begin()) return false;
  --it;
  return it->first <= begin && it->second >= end;
}

void IntervalSet::encode(ByteWriter& w) const {
  w.u32(static_cast<std::uint32_t>(ranges_.size()));
  for (auto [b, e] : ranges_) {
    w.u64(b);
    w.u64(e);
  }
}

IntervalSet IntervalSet::decode(ByteReader& r) {
  IntervalSet s;
  auto n = r.u32();
  if (n > r.remaining() / 16) fail(r.code(), "interval count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) {
    auto b = r.u64();
    auto e = r.u64();
    if (e <= b) fail(r.code(), "empty interval");
    s.add(b, e);
  }
  return s;
}

}  // namespace funky::fpga
