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

#include "funky/guest/guest.hpp"

#include "funky/bytes.hpp"

namespace funky::guest {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void violation(const std::string& what) { fail(Errc::ProtocolViolation, what); }

Bytes page_up(Bytes x) { return (x + kPageSize - 1) / kPageSize * kPageSize; }

const VFpgaHandle& need_handle(const GuestState& s, std::string_view op) {
  if (!s.handle) violation(std::string(op) + " before create_program");
  return *s.handle;
}

const HostRegion& host_buffer(const GuestState& s, const std::string& name) {
  auto it = s.host.find(name);
  if (it == s.host.end()) violation("unknown host buffer '" + name + "'");
  return it->second;
}

BufferId device_buffer(const GuestState& s, const std::string& name) {
  auto it = s.buffer_ids.find(name);
  if (it == s.buffer_ids.end()) violation("buffer '" + name + "' used before create_buffer");
  return it->second;
}

}  // namespace

GuestState GuestState::boot(const TaskProgram& program, const TaskId& task) {
  program.check();
  GuestState s;
  s.program = program;
  s.flat = program.flatten();
  GuestAddr next = kHostBase;
  for (const auto& b : program.buffers) {
    s.host[b.name] = HostRegion{next, b.size};
    next = page_up(next + b.size);
  }
  s.guest_mem_bytes = std::max<Bytes>(program.guest_mem_bytes, next);
  s.memory = fpga::Content::zeros(s.guest_mem_bytes);
  for (const auto& b : program.buffers) {
    const auto& r = s.host[b.name];
    s.memory.fill(r.addr, r.addr + r.size, b.initial_digest);
  }
  s.id_base = (fnv1a(task.str()) & 0xffffffffull) << 20;
  return s;
}

Bytes GuestState::memory_bytes() const {
  Bytes t = 0;
  for (const auto& [n, r] : host) t += r.size;
  return t;
}

fpga::Content GuestState::region_contents(const std::string& name) const {
  const auto& r = host.at(name);
  return memory.slice(r.addr, r.addr + r.size);
}

std::uint64_t GuestState::output_digest() const {
  std::uint64_t h = 0x6f7574;
  for (const auto& [n, r] : host) h = hash_combine(hash_combine(h, fnv1a(n)), region_contents(n).digest());
  return h;
}

fpga::Content GuestState::read_memory(GuestAddr addr, Bytes size) const {
  if (addr > memory.size() || size > memory.size() - addr) fail(Errc::InvalidState, "guest read out of range");
  return memory.slice(addr, addr + size);
}

void GuestState::write_memory(GuestAddr addr, const fpga::Content& src) {
  if (addr > memory.size() || src.size() > memory.size() - addr) fail(Errc::InvalidState, "guest write out of range");
  memory.write(addr, src, 0, src.size());
}

std::vector<std::uint8_t> GuestState::encode() const {
  ByteWriter w;
  w.str(program.to_json());
  w.u64(pc);
  w.u8(awaiting ? 1 : 0);
  memory.encode(w);
  w.u32(static_cast<std::uint32_t>(host.size()));
  for (const auto& [n, r] : host) {
    w.str(n);
    w.u64(r.addr);
    w.u64(r.size);
  }
  w.u32(static_cast<std::uint32_t>(buffer_ids.size()));
  for (const auto& [n, id] : buffer_ids) {
    w.str(n);
    w.u64(id);
  }
  w.u32(static_cast<std::uint32_t>(deferred.size()));
  for (const auto& a : deferred) {
    if (!a) {
      w.u8(0);
    } else if (auto* s = std::get_if<protocol::ScalarArg>(&*a)) {
      w.u8(1);
      w.u64(s->value);
    } else {
      auto& b = std::get<protocol::BufferArg>(*a);
      w.u8(2);
      w.u64(b.buff_id);
      w.u8(static_cast<std::uint8_t>(b.dir));
    }
  }
  w.u8(handle ? 1 : 0);
  if (handle) handle->encode(w);
  queue.encode(w);
  w.u64(id_base);
  w.u32(buffers_created);
  w.u64(guest_mem_bytes);
  return std::move(w).take();
}

GuestState GuestState::decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, Errc::SnapshotCorrupt);
  GuestState s;
  try {
    s.program = TaskProgram::from_json(r.str(64u << 20));
  } catch (const Error& e) {
    fail(Errc::SnapshotCorrupt, std::string("guest program: ") + e.what());
  }
  s.flat = s.program.flatten();
  s.pc = r.u64();
  s.awaiting = r.u8() != 0;
  if (s.pc > s.flat.size()) fail(Errc::SnapshotCorrupt, "program counter out of range");
  s.memory = fpga::Content::decode(r);
  auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = r.str();
    HostRegion h;
    h.addr = r.u64();
    h.size = r.u64();
    if (h.addr > s.memory.size() || h.size > s.memory.size() - h.addr)
      fail(Errc::SnapshotCorrupt, "host array outside guest memory");
    s.host[name] = h;
  }
  n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = r.str();
    s.buffer_ids[name] = r.u64();
  }
  n = r.u32();
  if (n > r.remaining()) fail(Errc::SnapshotCorrupt, "argument count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) {
    switch (r.u8()) {
      case 0: s.deferred.emplace_back(); break;
      case 1: s.deferred.emplace_back(protocol::ScalarArg{r.u64()}); break;
      case 2: {
        protocol::BufferArg b;
        b.buff_id = r.u64();
        auto dir = r.u8();
        if (dir > 2) fail(Errc::SnapshotCorrupt, "bad argument direction");
        b.dir = static_cast<ArgDir>(dir);
        s.deferred.emplace_back(b);
        break;
      }
      default: fail(Errc::SnapshotCorrupt, "bad deferred argument tag");
    }
  }
  if (r.u8()) s.handle = VFpgaHandle::decode(r);
  try {
    s.queue = protocol::RequestQueue::decode(r);
  } catch (const Error& e) {
    fail(Errc::SnapshotCorrupt, e.what());
  }
  s.id_base = r.u64();
  s.buffers_created = r.u32();
  s.guest_mem_bytes = r.u64();
  if (s.guest_mem_bytes != s.memory.size()) fail(Errc::SnapshotCorrupt, "guest memory size mismatch");
  r.expect_done();
  return s;
}

std::vector<Action> translate(const ApiCall& c, GuestState& s) {
  std::vector<Action> out;
  std::visit(overloaded{
                 [&](const call::CreateProgram& p) {
                   auto bs = s.program.bitstream();
                   if (!p.bitstream_id.empty()) bs.id = p.bitstream_id;
                   out.push_back(action::HypercallInit{bs.id, bs.encode()});
                 },
                 [&](const call::ReleaseProgram&) {
                   need_handle(s, "release_program");
                   out.push_back(action::HypercallExit{});
                 },
                 [&](const call::CreateBuffer& b) {
                   need_handle(s, "create_buffer");
                   if (s.buffer_ids.contains(b.name)) violation("buffer '" + b.name + "' created twice");
                   const auto& hb = host_buffer(s, b.name);
                   BufferId id = s.id_base + s.buffers_created++;
                   s.buffer_ids[b.name] = id;
                   out.push_back(action::Submit{protocol::MemoryReq{id, hb.addr, hb.size}});
                 },
                 [&](const call::EnqueueWrite& w) {
                   const auto& h = need_handle(s, "enqueue_write");
                   const auto& hb = host_buffer(s, w.name);
                   out.push_back(action::Submit{protocol::TransferReq{h.queue_ids.at(0), device_buffer(s, w.name),
                                                                      hb.addr + w.offset, w.bytes, fpga::Direction::H2D}});
                 },
                 [&](const call::EnqueueRead& r) {
                   const auto& h = need_handle(s, "enqueue_read");
                   const auto& hb = host_buffer(s, r.name);
                   out.push_back(action::Submit{protocol::TransferReq{h.queue_ids.at(0), device_buffer(s, r.name),
                                                                      hb.addr + r.offset, r.bytes, fpga::Direction::D2H}});
                 },
                 [&](const call::SetArg& a) {
                   if (a.index > s.deferred.size())
                     violation("set_arg index " + std::to_string(a.index) + " skips index " +
                               std::to_string(s.deferred.size()));
                   protocol::KernelArg arg;
                   if (a.scalar)
                     arg = protocol::ScalarArg{*a.scalar};
                   else
                     arg = protocol::BufferArg{device_buffer(s, a.buffer), a.dir};
                   if (a.index == s.deferred.size())
                     s.deferred.emplace_back(arg);
                   else
                     s.deferred[a.index] = arg;
                 },
                 [&](const call::EnqueueKernel& k) {
                   const auto& h = need_handle(s, "enqueue_kernel");
                   protocol::ExecuteReq e;
                   e.queue_id = h.queue_ids.at(0);
                   e.kernel_id = k.kernel_id;
                   e.offset = k.offset;
                   e.bytes = k.bytes;
                   // Arguments stay bound across launches, as with clSetKernelArg.
                   for (const auto& a : s.deferred) e.args.push_back(*a);
                   out.push_back(action::Submit{std::move(e)});
                 },
                 [&](const call::Finish&) {
                   const auto& h = need_handle(s, "finish");
                   out.push_back(action::Submit{protocol::SyncReq{h.queue_ids.at(0), s.queue.last_submitted()}});
                   out.push_back(action::Await{});
                 },
                 [&](const call::Repeat&) { violation("repeat must be flattened before translation"); },
             },
             c.v);
  return out;
}

StepOutcome step(GuestState& s, GuestEnv& env) {
  if (s.awaiting) {
    if (!env.wait(s.queue.id(), s.queue.last_submitted())) return StepOutcome::Blocked;
    s.awaiting = false;
    ++s.pc;
    return StepOutcome::Progressed;
  }
  const auto* c = s.current();
  if (!c) return StepOutcome::Done;
  auto actions = translate(*c, s);
  for (auto& a : actions) {
    if (auto* init = std::get_if<action::HypercallInit>(&a)) {
      if (s.handle) fail(Errc::HandleAlreadyHeld, "vFPGA handle already held");
      s.handle = env.vfpga_init(init->bitstream_id, init->bitstream);
      s.queue = protocol::RequestQueue(s.handle->queue_ids.at(0));
    } else if (std::holds_alternative<action::HypercallExit>(a)) {
      env.vfpga_exit(*s.handle);
      s.handle.reset();
      s.queue.close();
    } else if (auto* sub = std::get_if<action::Submit>(&a)) {
      s.queue.submit(std::move(sub->request));
      env.doorbell(s.queue.id());
    } else {
      s.awaiting = true;
      if (!env.wait(s.queue.id(), s.queue.last_submitted())) return StepOutcome::Blocked;
      s.awaiting = false;
    }
  }
  ++s.pc;
  return StepOutcome::Progressed;
}

GuestState run_program(const TaskProgram& program, GuestEnv& env, const TaskId& task) {
  auto s = GuestState::boot(program, task);
  while (true) {
    auto o = step(s, env);
    if (o == StepOutcome::Done) break;
    if (o == StepOutcome::Blocked) fail(Errc::InvalidState, "blocking environment returned without completion");
  }
  return s;
}

}  // namespace funky::guest
