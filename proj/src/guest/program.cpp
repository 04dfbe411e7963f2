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

#include "funky/guest/program.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace funky::guest {

using nlohmann::json;

namespace call {
bool operator==(const Repeat& a, const Repeat& b) {
  return a.count == b.count && a.partition == b.partition && a.body == b.body;
}
}  // namespace call

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void violation(const std::string& what) { fail(Errc::ProtocolViolation, what); }

struct Partition {
  std::uint64_t i, n;
};

// Range [off, off+len) narrowed by nested partitions, outermost first.
std::pair<Bytes, Bytes> narrow(Bytes off, Bytes len, const std::vector<Partition>& parts) {
  for (auto p : parts) {
    auto lo = static_cast<Bytes>((static_cast<unsigned __int128>(len) * p.i) / p.n);
    auto hi = static_cast<Bytes>((static_cast<unsigned __int128>(len) * (p.i + 1)) / p.n);
    off += lo;
    len = hi - lo;
  }
  return {off, len};
}

Bytes rest(const TaskProgram& p, const std::string& name, Bytes offset, Bytes bytes) {
  const auto* b = p.buffer(name);
  if (!b) violation("undeclared buffer '" + name + "'");
  if (offset > b->size) violation("offset past end of '" + name + "'");
  return bytes == 0 ? b->size - offset : bytes;
}

void flatten_into(const TaskProgram& p, const std::vector<ApiCall>& steps, std::vector<Partition>& parts,
                  std::vector<ApiCall>& out) {
  for (const auto& s : steps) {
    std::visit(overloaded{
                   [&](const call::EnqueueWrite& w) {
                     auto [off, len] = narrow(w.offset, rest(p, w.name, w.offset, w.bytes), parts);
                     out.push_back(call::EnqueueWrite{w.name, off, len});
                   },
                   [&](const call::EnqueueRead& r) {
                     auto [off, len] = narrow(r.offset, rest(p, r.name, r.offset, r.bytes), parts);
                     out.push_back(call::EnqueueRead{r.name, off, len});
                   },
                   [&](const call::EnqueueKernel& k) {
                     auto [off, len] = narrow(k.offset, k.bytes, parts);
                     out.push_back(call::EnqueueKernel{k.kernel_id, len, off});
                   },
                   [&](const call::Repeat& r) {
                     for (std::uint32_t i = 0; i < r.count; ++i) {
                       if (r.partition) parts.push_back({i, r.count});
                       flatten_into(p, r.body, parts, out);
                       if (r.partition) parts.pop_back();
                     }
                   },
                   [&](const auto& other) { out.push_back(other); },
               },
               s.v);
  }
}

void check_refs(const TaskProgram& p, const std::vector<ApiCall>& steps, bool top) {
  auto need_buffer = [&](const std::string& n) {
    if (!p.buffer(n)) violation("undeclared buffer '" + n + "'");
  };
  for (const auto& s : steps) {
    std::visit(overloaded{
                   [&](const call::CreateProgram&) {
                     if (!top) violation("create_program inside repeat");
                   },
                   [&](const call::ReleaseProgram&) {
                     if (!top) violation("release_program inside repeat");
                   },
                   [&](const call::CreateBuffer& c) { need_buffer(c.name); },
                   [&](const call::EnqueueWrite& w) { need_buffer(w.name); },
                   [&](const call::EnqueueRead& r) { need_buffer(r.name); },
                   [&](const call::SetArg& a) {
                     if (!a.scalar) need_buffer(a.buffer);
                   },
                   [&](const call::EnqueueKernel& k) {
                     if (!p.kernel(k.kernel_id)) violation("unknown kernel '" + k.kernel_id + "'");
                   },
                   [&](const call::Repeat& r) {
                     if (r.count == 0) violation("repeat count must be positive");
                     check_refs(p, r.body, false);
                   },
                   [&](const call::Finish&) {},
               },
               s.v);
  }
}

Bytes json_size(const json& j, const char* key) {
  if (!j.contains(key)) return 0;
  const auto& v = j.at(key);
  if (v.is_string()) return parse_size(v.get<std::string>());
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    fail(Errc::ParseError, std::string(key) + " must be a non-negative integer");
  return v.get<Bytes>();
}

ApiCall call_from_json(const json& j) {
  const auto op = j.at("op").get<std::string>();
  if (op == "create_program") return call::CreateProgram{j.value("bitstream_id", std::string{})};
  if (op == "create_buffer") return call::CreateBuffer{j.at("name").get<std::string>()};
  if (op == "enqueue_write")
    return call::EnqueueWrite{j.at("name").get<std::string>(), json_size(j, "offset"), json_size(j, "bytes")};
  if (op == "enqueue_read")
    return call::EnqueueRead{j.at("name").get<std::string>(), json_size(j, "offset"), json_size(j, "bytes")};
  if (op == "set_arg") {
    call::SetArg a;
    a.index = j.at("index").get<std::uint32_t>();
    if (j.contains("scalar")) {
      a.scalar = j.at("scalar").get<std::uint64_t>();
    } else {
      a.buffer = j.at("buffer").get<std::string>();
      a.dir = protocol::arg_dir_from_string(j.value("dir", std::string("in")));
    }
    return a;
  }
  if (op == "enqueue_kernel")
    return call::EnqueueKernel{j.at("kernel").get<std::string>(), json_size(j, "bytes"), json_size(j, "offset")};
  if (op == "finish") return call::Finish{};
  if (op == "release_program") return call::ReleaseProgram{};
  if (op == "repeat") {
    call::Repeat r;
    r.count = j.at("count").get<std::uint32_t>();
    r.partition = j.value("partition", true);
    for (const auto& s : j.at("body")) r.body.push_back(call_from_json(s));
    return r;
  }
  fail(Errc::Unsupported, "API call '" + op + "' is not supported");
}

json call_to_json(const ApiCall& c) {
  json j;
  j["op"] = std::string(op_name(c));
  std::visit(overloaded{
                 [&](const call::CreateProgram& p) {
                   if (!p.bitstream_id.empty()) j["bitstream_id"] = p.bitstream_id;
                 },
                 [&](const call::CreateBuffer& b) { j["name"] = b.name; },
                 [&](const call::EnqueueWrite& w) {
                   j["name"] = w.name;
                   if (w.offset) j["offset"] = w.offset;
                   if (w.bytes) j["bytes"] = w.bytes;
                 },
                 [&](const call::EnqueueRead& r) {
                   j["name"] = r.name;
                   if (r.offset) j["offset"] = r.offset;
                   if (r.bytes) j["bytes"] = r.bytes;
                 },
                 [&](const call::SetArg& a) {
                   j["index"] = a.index;
                   if (a.scalar) {
                     j["scalar"] = *a.scalar;
                   } else {
                     j["buffer"] = a.buffer;
                     j["dir"] = std::string(protocol::to_string(a.dir));
                   }
                 },
                 [&](const call::EnqueueKernel& k) {
                   j["kernel"] = k.kernel_id;
                   j["bytes"] = k.bytes;
                   if (k.offset) j["offset"] = k.offset;
                 },
                 [&](const call::Repeat& r) {
                   j["count"] = r.count;
                   if (!r.partition) j["partition"] = false;
                   j["body"] = json::array();
                   for (const auto& s : r.body) j["body"].push_back(call_to_json(s));
                 },
                 [&](const auto&) {},
             },
             c.v);
  return j;
}

}  // namespace

std::string_view op_name(const ApiCall& c) {
  static constexpr std::string_view names[] = {"create_program", "create_buffer", "enqueue_write",
                                               "enqueue_read",   "set_arg",       "enqueue_kernel",
                                               "finish",         "release_program", "repeat"};
  return names[c.v.index()];
}

Bytes parse_size(const std::string& text) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    fail(Errc::ParseError, "bad size '" + text + "'");
  }
  auto unit = text.substr(pos);
  while (!unit.empty() && unit.front() == ' ') unit.erase(0, 1);
  double mult = 1;
  if (unit.empty() || unit == "B") mult = 1;
  else if (unit == "KiB") mult = KiB;
  else if (unit == "MiB") mult = MiB;
  else if (unit == "GiB") mult = GiB;
  else if (unit == "KB") mult = 1e3;
  else if (unit == "MB") mult = 1e6;
  else if (unit == "GB") mult = 1e9;
  else fail(Errc::ParseError, "bad size unit '" + unit + "'");
  if (v < 0) fail(Errc::ParseError, "negative size '" + text + "'");
  return static_cast<Bytes>(v * mult + 0.5);
}

const HostBufferDecl* TaskProgram::buffer(const std::string& name) const {
  for (const auto& b : buffers)
    if (b.name == name) return &b;
  return nullptr;
}

const fpga::KernelInfo* TaskProgram::kernel(const std::string& id) const {
  for (const auto& k : kernels)
    if (k.id == id) return &k;
  return nullptr;
}

fpga::Bitstream TaskProgram::bitstream() const { return {bitstream_id, kernels}; }

void TaskProgram::check() const {
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    if (buffers[i].size == 0) violation("buffer '" + buffers[i].name + "' has zero size");
    for (std::size_t k = 0; k < i; ++k)
      if (buffers[k].name == buffers[i].name) violation("duplicate buffer '" + buffers[i].name + "'");
  }
  check_refs(*this, steps, true);
  std::optional<std::size_t> create, release;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (std::holds_alternative<call::CreateProgram>(steps[i].v)) {
      if (create) violation("more than one create_program");
      create = i;
    } else if (std::holds_alternative<call::ReleaseProgram>(steps[i].v)) {
      if (release) violation("more than one release_program");
      release = i;
    }
  }
  if (!create) violation("program has no create_program");
  if (!release) violation("program has no release_program");
  if (*release < *create) violation("release_program before create_program");
}

std::vector<ApiCall> TaskProgram::flatten() const {
  std::vector<ApiCall> out;
  std::vector<Partition> parts;
  flatten_into(*this, steps, parts, out);
  return out;
}

std::string TaskProgram::to_json() const {
  json j;
  j["program_id"] = program_id;
  j["bitstream_id"] = bitstream_id;
  j["kernels"] = json::array();
  for (const auto& k : kernels) j["kernels"].push_back({{"id", k.id}, {"streaming", k.streaming}});
  j["buffers"] = json::array();
  for (const auto& b : buffers)
    j["buffers"].push_back({{"name", b.name}, {"size", b.size}, {"initial_digest", b.initial_digest}});
  if (guest_mem_bytes) j["guest_mem_bytes"] = guest_mem_bytes;
  j["steps"] = json::array();
  for (const auto& s : steps) j["steps"].push_back(call_to_json(s));
  return j.dump(2);
}

TaskProgram TaskProgram::from_json(const std::string& text) {
  TaskProgram p;
  try {
    auto j = json::parse(text);
    p.program_id = j.at("program_id").get<std::string>();
    p.bitstream_id = j.at("bitstream_id").get<std::string>();
    for (const auto& k : j.value("kernels", json::array()))
      p.kernels.push_back({k.at("id").get<std::string>(), k.value("streaming", false)});
    for (const auto& b : j.at("buffers")) {
      HostBufferDecl d;
      d.name = b.at("name").get<std::string>();
      d.size = json_size(b, "size");
      d.initial_digest = b.value("initial_digest", std::uint64_t{0});
      p.buffers.push_back(std::move(d));
    }
    p.guest_mem_bytes = json_size(j, "guest_mem_bytes");
    for (const auto& s : j.at("steps")) p.steps.push_back(call_from_json(s));
  } catch (const json::exception& e) {
    fail(Errc::ParseError, std::string("task program: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ParseError || e.code() == Errc::Unsupported) throw;
    fail(Errc::ParseError, e.what());
  }
  return p;
}

TaskProgram TaskProgram::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::ParseError, "cannot read program " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

namespace {

bool splittable_op(const ApiCall& c) {
  return std::holds_alternative<call::EnqueueWrite>(c.v) || std::holds_alternative<call::EnqueueRead>(c.v) ||
         std::holds_alternative<call::SetArg>(c.v) || std::holds_alternative<call::EnqueueKernel>(c.v);
}

}  // namespace

TaskProgram split_chunks(const TaskProgram& program, std::uint32_t n_chunks, Bytes min_chunk) {
  if (n_chunks == 0) fail(Errc::InvalidState, "n_chunks must be at least 1");
  std::optional<std::size_t> k;
  for (std::size_t i = 0; i < program.steps.size(); ++i)
    if (std::holds_alternative<call::EnqueueKernel>(program.steps[i].v)) {
      k = i;
      break;
    }
  if (!k) fail(Errc::Unsupported, "program has no top-level kernel step");
  const auto& main = std::get<call::EnqueueKernel>(program.steps[*k].v);
  const Bytes off = main.offset, total = main.bytes;

  std::size_t lo = *k, hi = *k + 1;
  while (lo > 0 && splittable_op(program.steps[lo - 1])) --lo;
  while (hi < program.steps.size() && splittable_op(program.steps[hi])) ++hi;

  for (std::size_t i = lo; i < hi; ++i) {
    const auto& s = program.steps[i].v;
    if (auto* kc = std::get_if<call::EnqueueKernel>(&s)) {
      const auto* info = program.kernel(kc->kernel_id);
      if (!info || !info->streaming) fail(Errc::NotStreaming, "kernel '" + kc->kernel_id + "' is not streaming");
      if (kc->offset != off || kc->bytes != total) fail(Errc::Unsupported, "kernels process different ranges");
    } else if (auto* w = std::get_if<call::EnqueueWrite>(&s)) {
      if (w->offset != off || rest(program, w->name, w->offset, w->bytes) != total)
        fail(Errc::Unsupported, "write of '" + w->name + "' does not match the kernel range");
    } else if (auto* r = std::get_if<call::EnqueueRead>(&s)) {
      if (r->offset != off || rest(program, r->name, r->offset, r->bytes) != total)
        fail(Errc::Unsupported, "read of '" + r->name + "' does not match the kernel range");
    }
  }

  Bytes chunks_by_size = min_chunk == 0 ? total : total / min_chunk;
  auto n_eff = static_cast<std::uint32_t>(std::min<Bytes>(n_chunks, std::max<Bytes>(1, chunks_by_size)));
  if (n_eff == 1) return program;

  TaskProgram out = program;
  call::Repeat loop;
  loop.count = n_eff;
  loop.partition = true;
  for (std::size_t i = lo; i < hi; ++i) {
    ApiCall c = program.steps[i];
    // Make implicit "rest of buffer" ranges explicit so partitioning sees B.
    if (auto* w = std::get_if<call::EnqueueWrite>(&c.v)) w->bytes = total;
    if (auto* r = std::get_if<call::EnqueueRead>(&c.v)) r->bytes = total;
    loop.body.push_back(std::move(c));
  }
  out.steps.erase(out.steps.begin() + static_cast<std::ptrdiff_t>(lo), out.steps.begin() + static_cast<std::ptrdiff_t>(hi));
  out.steps.insert(out.steps.begin() + static_cast<std::ptrdiff_t>(lo), ApiCall{std::move(loop)});
  return out;
}

std::size_t request_count(const TaskProgram& program) {
  std::size_t n = 0;
  for (const auto& c : program.flatten())
    if (std::holds_alternative<call::CreateBuffer>(c.v) || std::holds_alternative<call::EnqueueWrite>(c.v) ||
        std::holds_alternative<call::EnqueueRead>(c.v) || std::holds_alternative<call::EnqueueKernel>(c.v) ||
        std::holds_alternative<call::Finish>(c.v))
      ++n;
  return n;
}

}  // namespace funky::guest
