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

#include "funky/protocol/validate.hpp"

namespace funky::protocol {

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::ForeignBuffer: return "ForeignBuffer";
    case ViolationKind::UnknownBuffer: return "UnknownBuffer";
    case ViolationKind::DuplicateBuffer: return "DuplicateBuffer";
    case ViolationKind::AddressOutOfRange: return "AddressOutOfRange";
    case ViolationKind::RangeOutOfBounds: return "RangeOutOfBounds";
    case ViolationKind::CapacityExceeded: return "CapacityExceeded";
    case ViolationKind::ZeroSize: return "ZeroSize";
    case ViolationKind::UnknownQueue: return "UnknownQueue";
    case ViolationKind::UnknownKernel: return "UnknownKernel";
    case ViolationKind::UnknownRequest: return "UnknownRequest";
  }
  return "?";
}

namespace {

using V = std::optional<Violation>;

V violation(ViolationKind k, std::string detail) { return Violation{k, std::move(detail)}; }

bool in_guest_range(const TaskContext& ctx, GuestAddr a, Bytes size) {
  return a >= ctx.addr_begin && a <= ctx.addr_end && size <= ctx.addr_end - a;
}

V check_queue(const TaskContext& ctx, QueueId q) {
  if (!ctx.queues.contains(q)) return violation(ViolationKind::UnknownQueue, "queue " + std::to_string(q));
  return std::nullopt;
}

// Resolves a buffer id the task must own.
V owned(const TaskContext& ctx, BufferId id, const fpga::MemBuffer** out) {
  const auto* b = ctx.device ? ctx.device->find(id) : nullptr;
  if (!b) return violation(ViolationKind::UnknownBuffer, "buffer " + std::to_string(id));
  if (b->owner != ctx.task) return violation(ViolationKind::ForeignBuffer, "buffer " + std::to_string(id));
  *out = b;
  return std::nullopt;
}

V check(const MemoryReq& m, const TaskContext& ctx) {
  if (m.size == 0) return violation(ViolationKind::ZeroSize, "MEMORY");
  if (!in_guest_range(ctx, m.src, m.size)) return violation(ViolationKind::AddressOutOfRange, "MEMORY src");
  if (ctx.device) {
    if (const auto* b = ctx.device->find(m.buff_id))
      return violation(b->owner == ctx.task ? ViolationKind::DuplicateBuffer : ViolationKind::ForeignBuffer,
                       "buffer " + std::to_string(m.buff_id));
    if (m.size > ctx.device->memory_free())
      return violation(ViolationKind::CapacityExceeded,
                       std::to_string(m.size) + " > " + std::to_string(ctx.device->memory_free()));
  }
  return std::nullopt;
}

V check(const TransferReq& t, const TaskContext& ctx) {
  if (auto v = check_queue(ctx, t.queue_id)) return v;
  if (t.size == 0) return violation(ViolationKind::ZeroSize, "TRANSFER");
  if (!in_guest_range(ctx, t.src, t.size)) return violation(ViolationKind::AddressOutOfRange, "TRANSFER src");
  const fpga::MemBuffer* b = nullptr;
  if (auto v = owned(ctx, t.buff_id, &b)) return v;
  if (t.src < b->guest_addr || t.src - b->guest_addr > b->size || t.size > b->size - (t.src - b->guest_addr))
    return violation(ViolationKind::RangeOutOfBounds, "TRANSFER outside buffer " + std::to_string(t.buff_id));
  return std::nullopt;
}

V check(const ExecuteReq& e, const TaskContext& ctx) {
  if (auto v = check_queue(ctx, e.queue_id)) return v;
  if (ctx.bitstream && !ctx.bitstream->find(e.kernel_id))
    return violation(ViolationKind::UnknownKernel, e.kernel_id);
  for (const auto& a : e.args) {
    const auto* arg = std::get_if<BufferArg>(&a);
    if (!arg) continue;
    const fpga::MemBuffer* b = nullptr;
    if (auto v = owned(ctx, arg->buff_id, &b)) return v;
    if (e.offset > b->size || e.bytes > b->size - e.offset)
      return violation(ViolationKind::RangeOutOfBounds, "work range exceeds buffer " + std::to_string(arg->buff_id));
  }
  return std::nullopt;
}

V check(const SyncReq& s, const TaskContext& ctx) {
  if (auto v = check_queue(ctx, s.queue_id)) return v;
  if (ctx.own_id != 0 && s.req_id >= ctx.own_id)
    return violation(ViolationKind::UnknownRequest, "SYNC on request " + std::to_string(s.req_id));
  return std::nullopt;
}

}  // namespace

std::optional<Violation> validate(const FunkyRequest& request, const TaskContext& ctx) {
  return std::visit([&](const auto& r) { return check(r, ctx); }, request);
}

}  // namespace funky::protocol
