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

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

namespace funky::runtime {

using json = nlohmann::json;

// Message framing shared by the node and orchestrator services: a 4-byte
// big-endian length followed by a JSON document.
inline constexpr std::uint32_t kMaxFrame = 256u << 20;

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string str() const { return host + ":" + std::to_string(port); }
  // "host:port" or ":port". Throws ParseError.
  static Endpoint parse(const std::string& text);
};

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  // Throws PeerUnreachable.
  static Socket connect(const Endpoint& ep, int timeout_ms = 5000);

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  void close();
  void shutdown();

  // Throws PeerUnreachable on I/O failure.
  void send_frame(const std::string& payload);
  // nullopt on orderly close before a frame starts; throws PeerUnreachable
  // on a torn frame and MalformedRequest on an oversized length.
  std::optional<std::string> recv_frame();

 private:
  int fd_ = -1;
};

// One request/response exchange on a fresh connection.
json call(const Endpoint& ep, const json& request, int timeout_ms = 30000);

// Thread-per-connection JSON server. The handler maps a request document to
// a response document; frames that are not JSON get an error response and
// the connection stays open.
class JsonServer {
 public:
  using Handler = std::function<json(const json&)>;

  JsonServer(Endpoint listen, Handler handler);
  ~JsonServer();
  JsonServer(const JsonServer&) = delete;
  JsonServer& operator=(const JsonServer&) = delete;

  // Binds and starts accepting. Throws PeerUnreachable on bind failure.
  void start();
  void stop();
  const Endpoint& endpoint() const { return ep_; }  // actual port after start()

 private:
  void accept_loop();
  void serve(int fd);

  Endpoint ep_;
  Handler handler_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
};

json error_response(const json& id, const std::string& code, const std::string& message);

}  // namespace funky::runtime
