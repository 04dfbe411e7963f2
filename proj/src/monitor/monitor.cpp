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

#include "funky/monitor/monitor.hpp"

#include <algorithm>

#include "funky/fpga/kernel.hpp"

namespace funky::monitor {

using protocol::FunkyRequest;
using protocol::ReqId;

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Running: return "Running";
    case Phase::Synchronizing: return "Synchronizing";
    case Phase::Evicted: return "Evicted";
    case Phase::CheckpointingSaved: return "CheckpointingSaved";
    case Phase::Terminated: return "Terminated";
  }
  return "?";
}

MonitorInstance::MonitorInstance(TaskId task, fpga::FpgaDevice& device, StateCosts costs, SimTime now)
    : task_(std::move(task)), device_(&device), costs_(costs), now_(now) {}

void MonitorInstance::boot(const guest::TaskProgram& program) {
  guest_ = guest::GuestState::boot(program, task_);
  phase_ = Phase::Running;
  completed_ = false;
  fault_.reset();
  sched_.clear();
  scheduled_upto_ = 0;
}

MonitorInstance MonitorInstance::restore(const Snapshot& snap, fpga::FpgaDevice& device, StateCosts costs,
                                         SimTime now, ResumeReport* report) {
  MonitorInstance m(snap.task_id, device, costs, now);
  m.guest_ = guest::GuestState::decode(snap.guest_state);
  m.node_id = snap.meta.node_id;
  m.priority = snap.meta.priority;
  m.phase_ = Phase::Evicted;
  m.context_ = snap.fpga_context;
  m.now_ += load_time(costs, snap.meta.logical_bytes);
  m.log("restore", 0, snap.snapshot_id);
  auto r = m.resume(device);
  if (report) *report = r;
  return m;
}

void MonitorInstance::rebind(fpga::FpgaDevice& device) {
  if (slot()) fail(Errc::InvalidState, task_.str() + " holds a vFPGA on " + device_->device_id());
  device_ = &device;
}

std::vector<ReqId> MonitorInstance::in_flight() const {
  std::vector<ReqId> out;
  for (const auto& s : sched_)
    if (s.dispatched) out.push_back(s.id);
  return out;
}

void MonitorInstance::log(std::string what, ReqId id, std::string detail) {
  events_.push_back({now_, std::move(what), id, std::move(detail)});
}

std::optional<std::size_t> MonitorInstance::slot() const { return device_->slot_of(task_); }

// ---- guest environment ----

protocol::VFpgaHandle MonitorInstance::vfpga_init(const std::string& bitstream_id,
                                                  std::span<const std::uint8_t> bytes) {
  if (slot()) fail(Errc::HandleAlreadyHeld, task_.str() + " already holds a vFPGA");
  auto bs = fpga::Bitstream::decode(bytes);
  if (bs.id != bitstream_id) fail(Errc::InvalidBitstream, "bitstream '" + bs.id + "' is not '" + bitstream_id + "'");
  auto s = device_->free_slot();
  if (!s) fail(Errc::NoFreeSlot, "no free slot on " + device_->device_id());
  auto rc = device_->reconfigure(*s, task_, bs);
  now_ += rc + device_->cost().worker_spawn();
  bitstream_ = bs;
  last_start_ = device_free_ = last_end_ = now_;
  protocol::VFpgaHandle h{next_handle_++, device_->device_id(), static_cast<std::uint32_t>(*s), {1}};
  log("init", 0, bs.id);
  return h;
}

void MonitorInstance::vfpga_exit(const protocol::VFpgaHandle&) {
  advance_to(std::max(now_, last_end_));
  if (phase_ == Phase::Terminated) return;
  release_device();
  log("exit");
}

void MonitorInstance::doorbell(protocol::QueueId) { schedule_new(); }

bool MonitorInstance::wait(protocol::QueueId, ReqId req) { return guest_.queue.is_completed(req); }

// ---- worker timeline ----

Duration MonitorInstance::device_cost(const FunkyRequest& r) const {
  const auto& m = device_->cost();
  if (const auto* t = std::get_if<protocol::TransferReq>(&r)) return fpga::transfer_cost(m, t->size, t->dir);
  if (const auto* e = std::get_if<protocol::ExecuteReq>(&r)) {
    if (!bitstream_ || !bitstream_->find(e->kernel_id)) return Duration{0};  // rejected at dispatch
    Bytes inputs = 0;
    for (const auto& a : e->args)
      if (const auto* b = std::get_if<protocol::BufferArg>(&a); b && protocol::reads(b->dir)) ++inputs;
    return fpga::execute_cost(m, e->kernel_id, e->bytes * std::max<Bytes>(inputs, 1));
  }
  return Duration{0};
}

void MonitorInstance::place(ScheduledRequest& s, const FunkyRequest& r, SimTime visible) {
  s.kind = std::string(protocol::kind_name(r));
  if (std::holds_alternative<protocol::SyncReq>(r)) {
    s.prep_start = s.start = s.end = std::max(visible, last_end_);
  } else {
    s.prep_start = std::max(visible, last_start_);
    s.start = std::max(s.prep_start + device_->cost().request_overhead, device_free_);
    s.end = s.start + device_cost(r);
    last_start_ = s.start;
    device_free_ = s.end;
  }
  last_end_ = std::max(last_end_, s.end);
}

void MonitorInstance::schedule_new() {
  for (const auto& e : guest_.queue.pending()) {
    if (e.id <= scheduled_upto_) continue;
    ScheduledRequest s;
    s.id = e.id;
    place(s, e.request, now_);
    sched_.push_back(s);
    scheduled_upto_ = e.id;
  }
}

void MonitorInstance::reschedule_all() {
  sched_.clear();
  last_start_ = device_free_ = last_end_ = now_;
  scheduled_upto_ = guest_.queue.last_completed();
  schedule_new();
}

void MonitorInstance::advance_to(SimTime t) {
  while (!sched_.empty() && phase_ != Phase::Terminated) {
    auto& s = sched_.front();
    if (!s.dispatched) {
      if (paused_ || s.start > t) break;
      if (!dispatch(s)) return;
    }
    if (s.end > t) break;
    complete(s);
    sched_.pop_front();
  }
  now_ = std::max(now_, t);
}

bool MonitorInstance::dispatch(ScheduledRequest& s) {
  const auto& entry = guest_.queue.at(0);
  if (entry.id != s.id) fail(Errc::InvalidState, "worker schedule out of step with the queue");
  protocol::TaskContext ctx;
  ctx.task = task_;
  ctx.addr_begin = 0;
  ctx.addr_end = guest_.guest_mem_bytes;
  ctx.device = device_;
  ctx.bitstream = bitstream_ ? &*bitstream_ : nullptr;
  ctx.queues = {guest_.queue.id()};
  ctx.own_id = s.id;
  auto prev = now_;
  now_ = std::max(now_, s.start);
  if (auto v = protocol::validate(entry.request, ctx)) {
    terminate_with_fault(s.id, v->kind, v->detail);
    return false;
  }
  auto sl = slot();
  if (!sl) {
    terminate_with_fault(s.id, protocol::ViolationKind::UnknownQueue, "request without a vFPGA");
    return false;
  }
  if (!std::holds_alternative<protocol::SyncReq>(entry.request)) device_->mark_busy(*sl, s.id);
  s.dispatched = true;
  log("dispatch", s.id, s.kind);
  now_ = prev;
  return true;
}

void MonitorInstance::complete(ScheduledRequest& s) {
  const auto& entry = guest_.queue.at(0);
  auto prev = now_;
  now_ = std::max(now_, s.end);
  try {
    apply_effects(entry.request);
  } catch (const Error& e) {
    auto kind = e.code() == Errc::OutOfMemory ? protocol::ViolationKind::CapacityExceeded
                                              : protocol::ViolationKind::RangeOutOfBounds;
    terminate_with_fault(s.id, kind, e.what());
    return;
  }
  if (auto sl = slot(); sl && !std::holds_alternative<protocol::SyncReq>(entry.request)) device_->mark_idle(*sl);
  guest_.queue.complete(s.id);
  log("complete", s.id, s.kind);
  now_ = prev;
}

void MonitorInstance::apply_effects(const FunkyRequest& r) {
  using fpga::BufferEvent;
  if (const auto* m = std::get_if<protocol::MemoryReq>(&r)) {
    device_->allocate(task_, m->buff_id, m->size, m->src);
  } else if (const auto* t = std::get_if<protocol::TransferReq>(&r)) {
    auto* b = device_->find(t->buff_id);
    Bytes off = t->src - b->guest_addr;
    if (t->dir == fpga::Direction::H2D) {
      device_->write(t->buff_id, off, guest_.read_memory(t->src, t->size), 0, t->size);
      b->on_event(BufferEvent::TransferH2DComplete, off, off + t->size);
    } else {
      guest_.write_memory(t->src, device_->read(t->buff_id).slice(off, off + t->size));
      b->on_event(BufferEvent::TransferD2HComplete, off, off + t->size);
      // Buffers aliasing the written host range now differ from their twin.
      GuestAddr lo = t->src, hi = t->src + t->size;
      for (auto id : device_->buffers_of(task_)) {
        if (id == t->buff_id) continue;
        auto* o = device_->find(id);
        GuestAddr a = std::max(lo, o->guest_addr), z = std::min(hi, o->guest_addr + o->size);
        if (a < z) o->on_host_write(a - o->guest_addr, z - o->guest_addr);
      }
    }
  } else if (const auto* e = std::get_if<protocol::ExecuteReq>(&r)) {
    execute(*e);
  }
}

void MonitorInstance::execute(const protocol::ExecuteReq& e) {
  std::vector<fpga::Content> inputs;
  std::vector<fpga::BufferId> in_ids, out_ids;
  std::vector<std::uint64_t> scalars;
  for (const auto& a : e.args) {
    if (const auto* s = std::get_if<protocol::ScalarArg>(&a)) {
      scalars.push_back(s->value);
      continue;
    }
    const auto& b = std::get<protocol::BufferArg>(a);
    if (protocol::reads(b.dir)) {
      inputs.push_back(device_->read(b.buff_id));
      in_ids.push_back(b.buff_id);
    }
    if (protocol::writes(b.dir)) out_ids.push_back(b.buff_id);
  }
  const auto* k = bitstream_->find(e.kernel_id);
  auto& csr = device_->slot(*slot()).csr;
  const std::string reg = e.kernel_id + ".invocations";
  auto invocation = csr.read(reg);
  const Bytes begin = e.offset, end = e.offset + e.bytes;
  if (begin < end) {
    std::vector<const fpga::Content*> ptrs;
    for (const auto& c : inputs) ptrs.push_back(&c);
    std::vector<std::uint64_t> digests;
    if (!k->streaming)
      for (const auto& c : inputs) digests.push_back(c.slice(begin, end).digest());
    for (std::size_t j = 0; j < out_ids.size(); ++j) {
      std::vector<fpga::Content::Segment> pieces;
      if (k->streaming) {
        pieces = fpga::map_elementwise(ptrs, begin, end, [&](const std::vector<std::uint64_t>& toks) {
          return fpga::streaming_token(e.kernel_id, j, toks, scalars);
        });
      } else {
        pieces.push_back({begin, end, fpga::batch_token(e.kernel_id, j, digests, scalars, invocation)});
      }
      device_->write_pieces(out_ids[j], begin, end, pieces);
    }
    for (auto id : in_ids) device_->find(id)->on_event(fpga::BufferEvent::ExecuteReadBuffer, begin, end);
    for (auto id : out_ids) device_->find(id)->on_event(fpga::BufferEvent::ExecuteWroteBuffer, begin, end);
  }
  csr.write(reg, invocation + 1);
}

void MonitorInstance::terminate_with_fault(ReqId id, protocol::ViolationKind kind, std::string detail) {
  fault_ = IsolationFaultRecord{id, kind, detail};
  log("fault", id, std::string(protocol::to_string(kind)) + ": " + detail);
  release_device();
  sched_.clear();
  phase_ = Phase::Terminated;
}

void MonitorInstance::release_device() {
  if (slot()) device_->zero_and_release(task_);
}

void MonitorInstance::drain_dispatched() {
  if (sched_.empty() || !sched_.front().dispatched) return;
  paused_ = true;
  advance_to(sched_.front().end);
  paused_ = false;
}

void MonitorInstance::finish_task() {
  advance_to(std::max(now_, last_end_));
  release_device();
  sched_.clear();
  phase_ = Phase::Terminated;
  completed_ = true;
  log("done");
}

RunResult MonitorInstance::run(std::optional<SimTime> until, std::optional<std::size_t> max_steps) {
  RunResult r;
  while (phase_ == Phase::Running) {
    if (guest_.done()) {
      finish_task();
      break;
    }
    if (max_steps && r.steps >= *max_steps) break;
    guest::StepOutcome o;
    try {
      o = guest::step(guest_, *this);
    } catch (const Error& e) {
      if (e.code() == Errc::ProtocolViolation) kill();
      throw;
    }
    if (o == guest::StepOutcome::Progressed) {
      ++r.steps;
      continue;
    }
    if (o == guest::StepOutcome::Done) continue;
    SimTime t = last_end_;
    auto awaited = guest_.queue.last_submitted();
    for (const auto& s : sched_)
      if (s.id == awaited) t = s.end;
    t = std::max(t, now_);
    if (until && t > *until) {
      advance_to(*until);
      r.blocked = true;
      break;
    }
    advance_to(t);
  }
  if (until && phase_ == Phase::Running && *until > now_) advance_to(*until);
  r.done = completed_;
  return r;
}

// ---- state commands ----

Duration MonitorInstance::sync_fpga() {
  if (phase_ != Phase::Running) return Duration{0};
  advance_to(now_);
  auto t0 = now_;
  phase_ = Phase::Synchronizing;
  drain_dispatched();
  if (phase_ == Phase::Synchronizing) phase_ = Phase::Running;
  return now_ - t0;
}

EvictReport MonitorInstance::evict() {
  if (phase_ == Phase::Evicted || phase_ == Phase::CheckpointingSaved)
    fail(Errc::AlreadyEvicted, task_.str() + " is already evicted");
  if (phase_ == Phase::Terminated) fail(Errc::InvalidState, task_.str() + " has terminated");
  EvictReport rep;
  advance_to(now_);
  auto t0 = now_;
  phase_ = Phase::Synchronizing;
  drain_dispatched();
  if (phase_ == Phase::Terminated) fail(Errc::IsolationFault, task_.str() + " faulted while synchronizing");
  rep.sync_wait = now_ - t0;
  if (!in_flight().empty()) fail(Errc::InvalidState, "evict observed in-flight requests");
  sched_.clear();
  FpgaContext ctx;
  if (auto s = slot()) {
    const auto& v = device_->slot(*s);
    ctx.bitstream = v.bitstream;
    ctx.registers = v.csr;
    for (auto id : device_->buffers_of(task_)) {
      const auto& b = *device_->find(id);
      ctx.buffer_table.push_back({b.buffer_id, b.size, b.guest_addr, b.state, b.divergence, b.untouched});
      if (b.state == fpga::BufferState::Dirty) {
        DirtyBuffer d{b.buffer_id, b.size, b.guest_addr, 0, device_->read(id)};
        d.content_digest = d.data.digest();
        ctx.dirty_buffers.push_back(std::move(d));
      }
    }
    rep.transfer = eviction_time(device_->cost(), ctx.payload_bytes());
    now_ += rep.transfer;
    device_->zero_and_release(task_);
  }
  phase_ = Phase::Evicted;
  context_ = ctx;
  rep.context = std::move(ctx);
  log("evict", 0, std::to_string(rep.context.payload_bytes()));
  return rep;
}

ResumeReport MonitorInstance::resume(fpga::FpgaDevice& device) {
  if (phase_ != Phase::Evicted) fail(Errc::AlreadyRunning, task_.str() + " is not evicted");
  if (!context_) fail(Errc::ContextMissing, task_.str() + " has no retained context");
  const auto& ctx = *context_;
  ResumeReport rep;
  if (ctx.has_fpga()) {
    auto s = device.free_slot();
    if (!s) fail(Errc::NoFreeSlot, "no free slot on " + device.device_id());
    Bytes need = 0;
    for (const auto& e : ctx.buffer_table) need += e.size;
    if (need > device.memory_free()) fail(Errc::OutOfMemory, "context needs " + std::to_string(need) + " bytes");
    rep.reconfig = device.reconfigure(*s, task_, *ctx.bitstream);
    device.slot(*s).csr = ctx.registers;
    try {
      for (const auto& e : ctx.buffer_table) {
        auto& b = device.allocate(task_, e.buff_id, e.size, e.guest_addr);
        fpga::Content data;
        if (e.state == fpga::BufferState::Dirty) {
          auto it = std::find_if(ctx.dirty_buffers.begin(), ctx.dirty_buffers.end(),
                                 [&](const DirtyBuffer& d) { return d.buff_id == e.buff_id; });
          if (it == ctx.dirty_buffers.end()) fail(Errc::SnapshotCorrupt, "dirty buffer missing from context");
          data = it->data;
        } else {
          // Written ranges of a sync buffer match the host twin; the rest
          // still holds the zeroed allocation.
          data = fpga::Content::zeros(e.size);
          if (e.state == fpga::BufferState::Sync) {
            auto host = guest_.read_memory(e.guest_addr, e.size);
            Bytes pos = 0;
            for (const auto& [lo, hi] : e.untouched.ranges()) {
              if (pos < lo) data.write(pos, host, pos, lo);
              pos = hi;
            }
            if (pos < e.size) data.write(pos, host, pos, e.size);
          }
        }
        device.write(e.buff_id, 0, data, 0, e.size);
        b.state = e.state;
        b.divergence = e.divergence;
        b.untouched = e.untouched;
      }
    } catch (...) {
      device.zero_and_release(task_);
      throw;
    }
    rep.resume = resume_time(device.cost(), ctx.restore_bytes());
    bitstream_ = ctx.bitstream;
    if (guest_.handle) {
      guest_.handle->device_id = device.device_id();
      guest_.handle->slot_id = static_cast<std::uint32_t>(*s);
    }
    now_ += rep.resume + rep.reconfig;
  }
  device_ = &device;
  context_.reset();
  phase_ = Phase::Running;
  reschedule_all();
  log("resume", 0, device.device_id());
  return rep;
}

Snapshot MonitorInstance::make_snapshot() const {
  if (!context_) fail(Errc::InvalidState, task_.str() + " must be evicted to snapshot");
  Snapshot s;
  s.snapshot_id = task_.str() + "@" + std::to_string(now_.count());
  s.task_id = task_;
  s.created_at = now_;
  s.guest_state = guest_.encode();
  s.fpga_context = *context_;
  s.meta.node_id = node_id;
  s.meta.priority = priority;
  s.meta.logical_bytes = snapshot_bytes(costs_, guest_.memory_bytes(), context_->payload_bytes());
  return s;
}

CheckpointReport MonitorInstance::checkpoint(const SnapshotStore& store, const std::string& name) {
  if (phase_ == Phase::Terminated) fail(Errc::InvalidState, task_.str() + " has terminated");
  const bool was_running = phase_ != Phase::Evicted;
  CheckpointReport rep;
  if (was_running) {
    auto e = evict();
    rep.evict = e.sync_wait + e.transfer;
  }
  phase_ = Phase::CheckpointingSaved;
  rep.snapshot = make_snapshot();
  rep.persist = persist_time(costs_, rep.snapshot.meta.logical_bytes);
  now_ += rep.persist;
  try {
    rep.path = store.write(name, rep.snapshot);
  } catch (...) {
    phase_ = Phase::Evicted;
    if (was_running) resume(*device_);
    throw;
  }
  phase_ = Phase::Evicted;
  log("checkpoint", 0, rep.path.string());
  if (was_running) rep.resumed = resume(*device_);
  return rep;
}

void MonitorInstance::kill() {
  release_device();
  sched_.clear();
  context_.reset();
  phase_ = Phase::Terminated;
  log("kill");
}

std::uint64_t MonitorInstance::device_state_digest() const {
  std::uint64_t h = 0x646576;
  auto sl = slot();
  if (!sl) return h;
  const auto& v = device_->slot(*sl);
  h = hash_combine(h, fnv1a(v.bitstream_id()));
  h = hash_combine(h, v.csr.digest());
  for (auto id : device_->buffers_of(task_)) {
    const auto& b = *device_->find(id);
    h = hash_combine(h, b.buffer_id);
    h = hash_combine(h, b.size);
    h = hash_combine(h, b.guest_addr);
    h = hash_combine(h, static_cast<std::uint64_t>(b.state));
    for (const auto& [lo, hi] : b.divergence.ranges()) h = hash_combine(hash_combine(h, lo), hi);
    h = hash_combine(h, 0x7e);
    for (const auto& [lo, hi] : b.untouched.ranges()) h = hash_combine(hash_combine(h, lo), hi);
    h = hash_combine(h, device_->read(id).digest());
  }
  return h;
}

}  // namespace funky::monitor
