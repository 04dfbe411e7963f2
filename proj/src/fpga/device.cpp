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

#include "funky/fpga/device.hpp"

#include "json.hpp"

namespace funky::fpga {

std::vector<std::uint8_t> Bitstream::encode() const {
  nlohmann::json j;
  j["bitstream_id"] = id;
  j["kernels"] = nlohmann::json::array();
  for (const auto& k : kernels) j["kernels"].push_back({{"id", k.id}, {"streaming", k.streaming}});
  auto text = j.dump();
  std::vector<std::uint8_t> out{'F', 'B', 'I', 'T'};
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

Bitstream Bitstream::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) fail(Errc::InvalidBitstream, "empty bitstream");
  if (bytes.size() < 4 || bytes[0] != 'F' || bytes[1] != 'B' || bytes[2] != 'I' || bytes[3] != 'T')
    fail(Errc::InvalidBitstream, "bad bitstream magic");
  Bitstream b;
  try {
    auto j = nlohmann::json::parse(bytes.begin() + 4, bytes.end());
    b.id = j.at("bitstream_id").get<std::string>();
    for (const auto& k : j.at("kernels"))
      b.kernels.push_back({k.at("id").get<std::string>(), k.value("streaming", false)});
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidBitstream, e.what());
  }
  if (b.id.empty()) fail(Errc::InvalidBitstream, "bitstream without id");
  return b;
}

const KernelInfo* Bitstream::find(const std::string& kernel_id) const {
  for (const auto& k : kernels)
    if (k.id == kernel_id) return &k;
  return nullptr;
}

std::uint32_t RegisterFile::read(const std::string& name) const {
  auto it = registers.find(name);
  return it == registers.end() ? 0 : it->second;
}

std::uint64_t RegisterFile::digest() const {
  std::uint64_t h = 0x637372;
  for (const auto& [k, v] : registers) h = hash_combine(hash_combine(h, fnv1a(k)), v);
  return h;
}

void RegisterFile::encode(ByteWriter& w) const {
  w.u32(static_cast<std::uint32_t>(registers.size()));
  for (const auto& [k, v] : registers) {
    w.str(k);
    w.u32(v);
  }
}

RegisterFile RegisterFile::decode(ByteReader& r) {
  RegisterFile f;
  auto n = r.u32();
  if (n > r.remaining() / 8) fail(r.code(), "register count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) {
    auto k = r.str(256);
    f.registers[k] = r.u32();
  }
  return f;
}

FpgaDevice::FpgaDevice(std::string device_id, CostModel cost, std::size_t n_slots)
    : device_id_(std::move(device_id)), cost_(std::move(cost)) {
  cost_.validate();
  if (n_slots == 0) fail(Errc::InvalidConfig, "device needs at least one slot");
  for (std::size_t i = 0; i < n_slots; ++i) {
    VFpga slot;
    slot.slot_id = static_cast<std::uint32_t>(i);
    slots_.push_back(std::move(slot));
  }
  phys_ = Content::zeros(cost_.mem_capacity);
}

std::optional<std::size_t> FpgaDevice::free_slot() const {
  for (std::size_t i = 0; i < slots_.size(); ++i)
    if (slots_[i].free()) return i;
  return std::nullopt;
}

std::optional<std::size_t> FpgaDevice::slot_of(const TaskId& task) const {
  for (std::size_t i = 0; i < slots_.size(); ++i)
    if (slots_[i].owner == task) return i;
  return std::nullopt;
}

Duration FpgaDevice::reconfigure(std::size_t slot_id, const TaskId& requester, const Bitstream& bitstream) {
  auto& s = slots_.at(slot_id);
  if (s.owner && *s.owner != requester)
    fail(Errc::SlotOccupiedByOther, "slot " + std::to_string(slot_id) + " owned by " + s.owner->str());
  s.owner = requester;
  s.bitstream = bitstream;
  s.status = SlotConfigured{bitstream.id};
  s.csr.clear();
  return cost_.reconfig_latency;
}

void FpgaDevice::mark_busy(std::size_t slot_id, std::uint64_t request_id) {
  auto& s = slots_.at(slot_id);
  if (s.free()) fail(Errc::InvalidState, "busy on an unconfigured slot");
  s.status = SlotBusy{s.bitstream_id(), request_id};
}

void FpgaDevice::mark_idle(std::size_t slot_id) {
  auto& s = slots_.at(slot_id);
  if (!s.free()) s.status = SlotConfigured{s.bitstream_id()};
}

MemBuffer& FpgaDevice::allocate(const TaskId& owner, BufferId id, Bytes size, GuestAddr guest_addr) {
  if (size == 0) fail(Errc::InvalidState, "zero-sized buffer");
  if (buffers_.contains(id)) fail(Errc::InvalidState, "buffer id " + std::to_string(id) + " in use");
  if (size > memory_free()) fail(Errc::OutOfMemory, "need " + std::to_string(size) + " bytes");
  Bytes pos = 0;
  bool found = false;
  for (const auto& [at, bid] : by_phys_) {
    if (at - pos >= size) {
      found = true;
      break;
    }
    pos = at + buffers_.at(bid).size;
  }
  if (!found && cost_.mem_capacity - pos < size) fail(Errc::OutOfMemory, "memory fragmented");
  MemBuffer b;
  b.buffer_id = id;
  b.owner = owner;
  b.size = size;
  b.phys = pos;
  b.guest_addr = guest_addr;
  b.on_event(BufferEvent::Allocated);
  used_ += size;
  by_phys_[pos] = id;
  return buffers_[id] = std::move(b);
}

const MemBuffer* FpgaDevice::find(BufferId id) const {
  auto it = buffers_.find(id);
  return it == buffers_.end() ? nullptr : &it->second;
}

MemBuffer* FpgaDevice::find(BufferId id) {
  auto it = buffers_.find(id);
  return it == buffers_.end() ? nullptr : &it->second;
}

std::vector<BufferId> FpgaDevice::buffers_of(const TaskId& task) const {
  std::vector<BufferId> out;
  for (const auto& [id, b] : buffers_)
    if (b.owner == task) out.push_back(id);
  return out;
}

Content FpgaDevice::read(BufferId id) const {
  const auto* b = find(id);
  if (!b) fail(Errc::InvalidState, "no buffer " + std::to_string(id));
  return phys_.slice(b->phys, b->phys + b->size);
}

void FpgaDevice::write(BufferId id, Bytes at, const Content& src, Bytes begin, Bytes end) {
  const auto* b = find(id);
  if (!b) fail(Errc::InvalidState, "no buffer " + std::to_string(id));
  if (at + (end - begin) > b->size) fail(Errc::InvalidState, "write past buffer end");
  phys_.write(b->phys + at, src, begin, end);
}

void FpgaDevice::write_pieces(BufferId id, Bytes begin, Bytes end, const std::vector<Content::Segment>& pieces) {
  const auto* b = find(id);
  if (!b) fail(Errc::InvalidState, "no buffer " + std::to_string(id));
  if (end > b->size) fail(Errc::InvalidState, "write past buffer end");
  auto shifted = pieces;
  for (auto& p : shifted) {
    p.begin += b->phys;
    p.end += b->phys;
  }
  phys_.assign(b->phys + begin, b->phys + end, shifted);
}

void FpgaDevice::release_buffers(const TaskId& task, ReleaseMode mode) {
  for (auto it = buffers_.begin(); it != buffers_.end();) {
    if (it->second.owner != task) {
      ++it;
      continue;
    }
    const auto& b = it->second;
    if (mode == ReleaseMode::Scrub) phys_.fill(b.phys, b.phys + b.size, 0);
    used_ -= b.size;
    by_phys_.erase(b.phys);
    it = buffers_.erase(it);
  }
}

void FpgaDevice::zero_and_release(const TaskId& task) {
  auto slot = slot_of(task);
  if (!slot) fail(Errc::NotOwner, task.str() + " holds no slot on " + device_id_);
  release_buffers(task, ReleaseMode::Scrub);
  auto& s = slots_[*slot];
  s.status = SlotFree{};
  s.owner.reset();
  s.bitstream.reset();
  s.csr.clear();
}

}  // namespace funky::fpga
