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

#include <gtest/gtest.h>

#include "funky/bytes.hpp"
#include "funky/common.hpp"
#include "funky/config.hpp"

namespace funky {
namespace {

TEST(Time, CeilRoundsUpToWholeMicroseconds) {
  EXPECT_EQ(ceil_seconds(1.0).count(), 1'000'000);
  EXPECT_EQ(ceil_seconds(0.0000011).count(), 2);
  EXPECT_EQ(ceil_millis(0.2).count(), 200);
  EXPECT_EQ(ceil_millis(1.0841).count(), 1085);
  EXPECT_DOUBLE_EQ(to_millis(Duration{1500}), 1.5);
  EXPECT_DOUBLE_EQ(to_seconds(Duration{2'500'000}), 2.5);
}

TEST(Hash, Fnv1aMatchesReferenceVectors) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fnv1a(std::string_view("")), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a(std::string_view("a")), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a(std::string_view("foobar")), 0x85944171f73967e8ull);
}

TEST(Hash, ChainedSeedEqualsConcatenation) {
  EXPECT_EQ(fnv1a(std::string_view("bar"), fnv1a(std::string_view("foo"))), fnv1a(std::string_view("foobar")));
}

TEST(Hash, Hex64IsZeroPadded) { EXPECT_EQ(hex64(0x2a), "0x000000000000002a"); }

TEST(Errors, CodeAndMessage) {
  try {
    fail(Errc::NoFreeSlot, "busy");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoFreeSlot);
    EXPECT_STREQ(e.what(), "NoFreeSlot: busy");
  }
}

TEST(Ids, OrderedAndDistinctByTag) {
  TaskId a("a"), b("b");
  EXPECT_LT(a, b);
  EXPECT_EQ(a, TaskId("a"));
  EXPECT_TRUE(TaskId().empty());
  static_assert(!std::is_convertible_v<TaskId, NodeId>);
}

TEST(Bytes, RoundTripAllWidths) {
  ByteWriter w;
  w.u8(0xab);
  w.u16(0xbeef);
  w.u32(0xdeadbeef);
  w.u64(0x0123456789abcdefull);
  w.i64(-5);
  w.f64(3.25);
  w.str("funky");
  std::vector<std::uint8_t> blob{1, 2, 3};
  w.blob(blob);
  auto bytes = std::move(w).take();
  EXPECT_EQ(bytes[1], 0xef);  // little-endian
  ByteReader r(bytes, Errc::MalformedRequest);
  EXPECT_EQ(r.u8(), 0xab);
  EXPECT_EQ(r.u16(), 0xbeef);
  EXPECT_EQ(r.u32(), 0xdeadbeefu);
  EXPECT_EQ(r.u64(), 0x0123456789abcdefull);
  EXPECT_EQ(r.i64(), -5);
  EXPECT_EQ(r.f64(), 3.25);
  EXPECT_EQ(r.str(), "funky");
  auto b = r.blob();
  EXPECT_EQ(std::vector<std::uint8_t>(b.begin(), b.end()), blob);
  EXPECT_NO_THROW(r.expect_done());
}

TEST(Bytes, ShortReadsThrowTheReaderCode) {
  std::vector<std::uint8_t> three{1, 2, 3};
  ByteReader r(three, Errc::SnapshotCorrupt);
  try {
    r.u32();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SnapshotCorrupt);
  }
  ByteWriter w;
  w.u64(1000);
  auto huge_blob = std::move(w).take();
  ByteReader r2(huge_blob, Errc::MalformedRequest);
  EXPECT_THROW(r2.blob(), Error);
}

TEST(Config, ParsesCommentsAndLaterAssignmentsWin) {
  auto c = KvConfig::parse("# comment\n a.b = 1 \n\na.c=x y\na.b = 2\n");
  EXPECT_EQ(c.integer("a.b", 0), 2);
  EXPECT_EQ(c.get_or("a.c", ""), "x y");
  EXPECT_EQ(c.get_or("missing", "dflt"), "dflt");
  EXPECT_FALSE(c.get("missing").has_value());
}

TEST(Config, RejectsLinesWithoutEquals) {
  try {
    KvConfig::parse("ok = 1\nbroken\n", "f.conf");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
    EXPECT_NE(std::string(e.what()).find("f.conf:2"), std::string::npos);
  }
}

TEST(Config, OverridesApplyAfterLoad) {
  auto c = KvConfig::parse("x = 1\n");
  c.apply_overrides({"x=5", "y = z"});
  EXPECT_EQ(c.integer("x", 0), 5);
  EXPECT_EQ(c.get_or("y", ""), "z");
  EXPECT_THROW(c.apply_overrides({"novalue"}), Error);
}

TEST(Config, TypedAccessorsValidate) {
  auto c = KvConfig::parse("n = 1.5\ni = 7\nb = yes\nbad = 1x\n");
  EXPECT_DOUBLE_EQ(c.number("n", 0), 1.5);
  EXPECT_EQ(c.integer("i", 0), 7);
  EXPECT_TRUE(c.boolean("b", false));
  EXPECT_THROW(c.number("bad", 0), Error);
  EXPECT_THROW(c.integer("n", 0), Error);
  EXPECT_THROW(c.boolean("i", false), Error);
}

TEST(Config, PrefixSelection) {
  auto c = KvConfig::parse("peer.a = 1\npeer.b = 2\nother = 3\n");
  auto p = c.with_prefix("peer.");
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p.at("a"), "1");
}

}  // namespace
}  // namespace funky
