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

#include "funky/protocol/request.hpp"

#include <sstream>

namespace funky::protocol {

namespace {

enum Tag : std::uint8_t { kMemory = 1, kTransfer = 2, kExecute = 3, kSync = 4 };
enum ArgTag : std::uint8_t { kScalar = 1, kBuffer = 2 };

[[noreturn]] void malformed(const std::string& what) { fail(Errc::MalformedRequest, what); }

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

std::string_view to_string(ArgDir d) {
  switch (d) {
    case ArgDir::In: return "in";
    case ArgDir::Out: return "out";
    case ArgDir::InOut: return "inout";
  }
  return "?";
}

ArgDir arg_dir_from_string(std::string_view s) {
  if (s == "in") return ArgDir::In;
  if (s == "out") return ArgDir::Out;
  if (s == "inout") return ArgDir::InOut;
  fail(Errc::ParseError, "unknown argument direction '" + std::string(s) + "'");
}

std::string_view kind_name(const FunkyRequest& r) {
  static constexpr std::string_view names[] = {"MEMORY", "TRANSFER", "EXECUTE", "SYNC"};
  return names[r.index()];
}

std::string describe(const FunkyRequest& r) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const MemoryReq& m) { os << "MEMORY{buff=" << m.buff_id << " src=" << m.src << " size=" << m.size << "}"; },
                 [&](const TransferReq& t) {
                   os << "TRANSFER{q=" << t.queue_id << " buff=" << t.buff_id << " src=" << t.src << " size=" << t.size
                      << " " << fpga::to_string(t.dir) << "}";
                 },
                 [&](const ExecuteReq& e) {
                   os << "EXECUTE{q=" << e.queue_id << " kernel=" << e.kernel_id << " args=[";
                   for (std::size_t i = 0; i < e.args.size(); ++i) {
                     if (i) os << ",";
                     if (auto* s = std::get_if<ScalarArg>(&e.args[i]))
                       os << s->value;
                     else {
                       auto& b = std::get<BufferArg>(e.args[i]);
                       os << b.buff_id << ":" << to_string(b.dir);
                     }
                   }
                   os << "] range=" << e.offset << "+" << e.bytes << "}";
                 },
                 [&](const SyncReq& s) { os << "SYNC{q=" << s.queue_id << " req=" << s.req_id << "}"; },
             },
             r);
  return os.str();
}

void encode(ByteWriter& w, const FunkyRequest& r) {
  std::visit(overloaded{
                 [&](const MemoryReq& m) {
                   w.u8(kMemory);
                   w.u64(m.buff_id);
                   w.u64(m.src);
                   w.u64(m.size);
                 },
                 [&](const TransferReq& t) {
                   w.u8(kTransfer);
                   w.u32(t.queue_id);
                   w.u64(t.buff_id);
                   w.u64(t.src);
                   w.u64(t.size);
                   w.u8(static_cast<std::uint8_t>(t.dir));
                 },
                 [&](const ExecuteReq& e) {
                   w.u8(kExecute);
                   w.u32(e.queue_id);
                   w.u16(static_cast<std::uint16_t>(e.kernel_id.size()));
                   w.raw({reinterpret_cast<const std::uint8_t*>(e.kernel_id.data()), e.kernel_id.size()});
                   w.u64(e.offset);
                   w.u64(e.bytes);
                   w.u16(static_cast<std::uint16_t>(e.args.size()));
                   for (const auto& a : e.args) {
                     if (auto* s = std::get_if<ScalarArg>(&a)) {
                       w.u8(kScalar);
                       w.u64(s->value);
                     } else {
                       auto& b = std::get<BufferArg>(a);
                       w.u8(kBuffer);
                       w.u64(b.buff_id);
                       w.u8(static_cast<std::uint8_t>(b.dir));
                     }
                   }
                 },
                 [&](const SyncReq& s) {
                   w.u8(kSync);
                   w.u32(s.queue_id);
                   w.u64(s.req_id);
                 },
             },
             r);
}

std::vector<std::uint8_t> encode(const FunkyRequest& r) {
  ByteWriter w;
  encode(w, r);
  return std::move(w).take();
}

FunkyRequest decode(ByteReader& r) {
  switch (r.u8()) {
    case kMemory: {
      MemoryReq m;
      m.buff_id = r.u64();
      m.src = r.u64();
      m.size = r.u64();
      if (m.size == 0) malformed("MEMORY with zero size");
      return m;
    }
    case kTransfer: {
      TransferReq t;
      t.queue_id = r.u32();
      t.buff_id = r.u64();
      t.src = r.u64();
      t.size = r.u64();
      auto dir = r.u8();
      if (dir > 1) malformed("bad transfer direction " + std::to_string(dir));
      t.dir = static_cast<Direction>(dir);
      if (t.size == 0) malformed("TRANSFER with zero size");
      return t;
    }
    case kExecute: {
      ExecuteReq e;
      e.queue_id = r.u32();
      auto len = r.u16();
      if (len > kMaxKernelIdLen) malformed("kernel id too long");
      auto id = r.take(len);
      e.kernel_id.assign(id.begin(), id.end());
      e.offset = r.u64();
      e.bytes = r.u64();
      auto n = r.u16();
      if (n > r.remaining() / 9) malformed("argument count exceeds input");
      e.args.reserve(n);
      for (std::uint16_t i = 0; i < n; ++i) {
        auto tag = r.u8();
        if (tag == kScalar) {
          e.args.push_back(ScalarArg{r.u64()});
        } else if (tag == kBuffer) {
          BufferArg b;
          b.buff_id = r.u64();
          auto dir = r.u8();
          if (dir > 2) malformed("bad argument direction " + std::to_string(dir));
          b.dir = static_cast<ArgDir>(dir);
          e.args.push_back(b);
        } else {
          malformed("unknown argument tag " + std::to_string(tag));
        }
      }
      return e;
    }
    case kSync: {
      SyncReq s;
      s.queue_id = r.u32();
      s.req_id = r.u64();
      return s;
    }
    default: malformed("unknown request tag");
  }
}

FunkyRequest decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, Errc::MalformedRequest);
  auto req = decode(r);
  r.expect_done();
  return req;
}

ReqId RequestQueue::submit(FunkyRequest r) {
  if (closed_) fail(Errc::QueueClosed, "queue " + std::to_string(id_) + " is closed");
  auto id = next_id_++;
  pending_.push_back({id, std::move(r)});
  return id;
}

void RequestQueue::complete(ReqId id) {
  if (pending_.empty() || pending_.front().id != id)
    fail(Errc::ProtocolViolation, "out-of-order completion of request " + std::to_string(id));
  pending_.pop_front();
  completed_upto_ = id;
}

void RequestQueue::encode(ByteWriter& w) const {
  w.u32(id_);
  w.u8(closed_ ? 1 : 0);
  w.u64(next_id_);
  w.u64(completed_upto_);
  w.u32(static_cast<std::uint32_t>(pending_.size()));
  for (const auto& e : pending_) {
    w.u64(e.id);
    protocol::encode(w, e.request);
  }
}

RequestQueue RequestQueue::decode(ByteReader& r) {
  RequestQueue q;
  q.id_ = r.u32();
  q.closed_ = r.u8() != 0;
  q.next_id_ = r.u64();
  q.completed_upto_ = r.u64();
  auto n = r.u32();
  if (n > r.remaining() / 9) fail(r.code(), "queue length exceeds input");
  ReqId expect = q.completed_upto_ + 1;
  for (std::uint32_t i = 0; i < n; ++i) {
    Entry e;
    e.id = r.u64();
    if (e.id != expect++) fail(r.code(), "queue entries out of order");
    e.request = protocol::decode(r);
    q.pending_.push_back(std::move(e));
  }
  if (expect != q.next_id_) fail(r.code(), "queue counters inconsistent");
  return q;
}

void VFpgaHandle::encode(ByteWriter& w) const {
  w.u64(handle_id);
  w.str(device_id);
  w.u32(slot_id);
  w.u32(static_cast<std::uint32_t>(queue_ids.size()));
  for (auto q : queue_ids) w.u32(q);
}

VFpgaHandle VFpgaHandle::decode(ByteReader& r) {
  VFpgaHandle h;
  h.handle_id = r.u64();
  h.device_id = r.str(4096);
  h.slot_id = r.u32();
  auto n = r.u32();
  if (n > r.remaining() / 4) fail(r.code(), "queue count exceeds input");
  for (std::uint32_t i = 0; i < n; ++i) h.queue_ids.push_back(r.u32());
  return h;
}

}  // namespace funky::protocol
