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

#include "funky/monitor/context.hpp"

#include <fstream>
#include <system_error>

#include "funky/bytes.hpp"

namespace funky::monitor {

Bytes FpgaContext::payload_bytes() const {
  Bytes t = 0;
  for (const auto& d : dirty_buffers) t += d.size;
  return t;
}

Bytes FpgaContext::restore_bytes() const {
  Bytes t = 0;
  for (const auto& b : buffer_table) {
    if (b.state == fpga::BufferState::Dirty) t += b.size;
    if (b.state == fpga::BufferState::Sync) t += b.size - b.untouched.total();
  }
  return t;
}

std::uint64_t FpgaContext::digest() const {
  auto bytes = encode();
  return fnv1a(bytes);
}

std::vector<std::uint8_t> FpgaContext::encode() const {
  ByteWriter w;
  w.u8(bitstream ? 1 : 0);
  if (bitstream) w.blob(bitstream->encode());
  registers.encode(w);
  w.u32(static_cast<std::uint32_t>(buffer_table.size()));
  for (const auto& b : buffer_table) {
    w.u64(b.buff_id);
    w.u64(b.size);
    w.u64(b.guest_addr);
    w.u8(static_cast<std::uint8_t>(b.state));
    b.divergence.encode(w);
    b.untouched.encode(w);
  }
  w.u32(static_cast<std::uint32_t>(dirty_buffers.size()));
  for (const auto& d : dirty_buffers) {
    w.u64(d.buff_id);
    w.u64(d.size);
    w.u64(d.guest_addr);
    w.u64(d.content_digest);
    d.data.encode(w);
  }
  return std::move(w).take();
}

FpgaContext FpgaContext::decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, Errc::SnapshotCorrupt);
  FpgaContext c;
  if (r.u8()) {
    try {
      c.bitstream = fpga::Bitstream::decode(r.blob());
    } catch (const Error& e) {
      fail(Errc::SnapshotCorrupt, e.what());
    }
  }
  c.registers = fpga::RegisterFile::decode(r);
  auto n = r.u32();
  if (n > r.remaining() / 33) fail(Errc::SnapshotCorrupt, "buffer table exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) {
    BufferEntry b;
    b.buff_id = r.u64();
    b.size = r.u64();
    b.guest_addr = r.u64();
    auto st = r.u8();
    if (st > 2) fail(Errc::SnapshotCorrupt, "bad buffer state");
    b.state = static_cast<fpga::BufferState>(st);
    b.divergence = fpga::IntervalSet::decode(r);
    b.untouched = fpga::IntervalSet::decode(r);
    c.buffer_table.push_back(std::move(b));
  }
  n = r.u32();
  if (n > r.remaining() / 32) fail(Errc::SnapshotCorrupt, "dirty list exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) {
    DirtyBuffer d;
    d.buff_id = r.u64();
    d.size = r.u64();
    d.guest_addr = r.u64();
    d.content_digest = r.u64();
    d.data = fpga::Content::decode(r);
    if (d.data.size() != d.size || d.data.digest() != d.content_digest)
      fail(Errc::SnapshotCorrupt, "dirty buffer digest mismatch");
    c.dirty_buffers.push_back(std::move(d));
  }
  r.expect_done();
  for (const auto& d : c.dirty_buffers) {
    bool listed = false;
    for (const auto& b : c.buffer_table)
      listed |= b.buff_id == d.buff_id && b.state == fpga::BufferState::Dirty && b.size == d.size;
    if (!listed) fail(Errc::SnapshotCorrupt, "dirty buffer missing from buffer table");
  }
  return c;
}

namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'N', 'K', 'Y'};

void section(ByteWriter& w, std::string_view name, std::span<const std::uint8_t> payload) {
  w.str(name);
  w.blob(payload);
  w.u64(fnv1a(payload));
}

std::span<const std::uint8_t> read_section(ByteReader& r, std::string_view name) {
  if (r.str(16) != name) fail(Errc::SnapshotCorrupt, "expected section " + std::string(name));
  auto payload = r.blob();
  if (r.u64() != fnv1a(payload)) fail(Errc::SnapshotCorrupt, "digest mismatch in section " + std::string(name));
  return payload;
}

}  // namespace

std::vector<std::uint8_t> Snapshot::encode() const {
  ByteWriter w;
  w.raw(kMagic);
  w.u16(kVersion);
  w.str(task_id.str());
  w.i64(created_at.count());
  w.str(snapshot_id);
  w.u64(fnv1a(std::span<const std::uint8_t>(w.bytes())));
  section(w, "GUEST", guest_state);
  section(w, "FPGACTX", fpga_context.encode());
  ByteWriter m;
  m.str(meta.node_id);
  m.i64(meta.priority);
  m.u64(meta.logical_bytes);
  section(w, "META", m.bytes());
  return std::move(w).take();
}

Snapshot Snapshot::decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, Errc::SnapshotCorrupt);
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) fail(Errc::SnapshotCorrupt, "bad magic");
  if (r.u16() != kVersion) fail(Errc::SnapshotCorrupt, "unsupported snapshot version");
  Snapshot s;
  s.task_id = TaskId(r.str(4096));
  s.created_at = SimTime(r.i64());
  s.snapshot_id = r.str(4096);
  auto header = bytes.first(bytes.size() - r.remaining());
  if (r.u64() != fnv1a(header)) fail(Errc::SnapshotCorrupt, "digest mismatch in header");
  auto guest = read_section(r, "GUEST");
  s.guest_state.assign(guest.begin(), guest.end());
  s.fpga_context = FpgaContext::decode(read_section(r, "FPGACTX"));
  ByteReader m(read_section(r, "META"), Errc::SnapshotCorrupt);
  s.meta.node_id = m.str(4096);
  s.meta.priority = m.i64();
  s.meta.logical_bytes = m.u64();
  m.expect_done();
  r.expect_done();
  return s;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p, Errc missing) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(missing, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, std::span<const std::uint8_t> data, Errc failure) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(failure, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) fail(failure, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, p, ec);
  if (ec) fail(failure, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::filesystem::path SnapshotStore::resolve(const std::string& name) const {
  std::filesystem::path p(name);
  return p.is_absolute() ? p : root_ / p;
}

std::filesystem::path SnapshotStore::write(const std::string& name, const Snapshot& snap) const {
  auto p = resolve(name);
  write_file(p, snap.encode(), Errc::StoreUnavailable);
  return p;
}

Snapshot SnapshotStore::read(const std::string& name) const {
  return Snapshot::decode(read_file(resolve(name), Errc::StoreUnavailable));
}

bool SnapshotStore::exists(const std::string& name) const {
  std::error_code ec;
  return std::filesystem::exists(resolve(name), ec);
}

}  // namespace funky::monitor
