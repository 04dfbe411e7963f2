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

#include "funky/runtime/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "funky/common.hpp"

namespace funky::runtime {

Endpoint Endpoint::parse(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos) fail(Errc::ParseError, "endpoint '" + text + "' lacks a port");
  Endpoint ep;
  if (colon > 0) ep.host = text.substr(0, colon);
  try {
    auto port = std::stoul(text.substr(colon + 1));
    if (port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    fail(Errc::ParseError, "bad port in endpoint '" + text + "'");
  }
  return ep;
}

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = std::exchange(o.fd_, -1);
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

namespace {

[[noreturn]] void io_fail(const std::string& what) { fail(Errc::PeerUnreachable, what + ": " + std::strerror(errno)); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res)
    fail(Errc::PeerUnreachable, "cannot resolve " + ep.host);
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

void write_all(int fd, const char* p, std::size_t n) {
  while (n > 0) {
    auto w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      io_fail("send");
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

// false if the peer closed before any byte arrived.
bool read_all(int fd, char* p, std::size_t n, bool allow_eof) {
  std::size_t got = 0;
  while (got < n) {
    auto r = ::recv(fd, p + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      io_fail("recv");
    }
    if (r == 0) {
      if (got == 0 && allow_eof) return false;
      fail(Errc::PeerUnreachable, "connection closed mid-frame");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

Socket Socket::connect(const Endpoint& ep, int timeout_ms) {
  auto addr = resolve(ep);
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) io_fail("socket");
  Socket s(fd);
  timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) io_fail("connect " + ep.str());
  return s;
}

void Socket::send_frame(const std::string& payload) {
  if (payload.size() > kMaxFrame) fail(Errc::MalformedRequest, "frame too large");
  auto n = static_cast<std::uint32_t>(payload.size());
  char hdr[4] = {static_cast<char>(n >> 24), static_cast<char>(n >> 16), static_cast<char>(n >> 8),
                 static_cast<char>(n)};
  write_all(fd_, hdr, 4);
  write_all(fd_, payload.data(), payload.size());
}

std::optional<std::string> Socket::recv_frame() {
  unsigned char hdr[4];
  if (!read_all(fd_, reinterpret_cast<char*>(hdr), 4, true)) return std::nullopt;
  std::uint32_t n = (std::uint32_t{hdr[0]} << 24) | (std::uint32_t{hdr[1]} << 16) | (std::uint32_t{hdr[2]} << 8) | hdr[3];
  if (n > kMaxFrame) fail(Errc::MalformedRequest, "frame length " + std::to_string(n) + " exceeds limit");
  std::string payload(n, '\0');
  read_all(fd_, payload.data(), n, false);
  return payload;
}

json call(const Endpoint& ep, const json& request, int timeout_ms) {
  auto s = Socket::connect(ep, timeout_ms);
  s.send_frame(request.dump());
  auto reply = s.recv_frame();
  if (!reply) fail(Errc::PeerUnreachable, ep.str() + " closed without replying");
  try {
    return json::parse(*reply);
  } catch (const json::exception& e) {
    fail(Errc::MalformedRequest, std::string("unreadable reply: ") + e.what());
  }
}

json error_response(const json& id, const std::string& code, const std::string& message) {
  return json{{"id", id}, {"ok", false}, {"error", {{"code", code}, {"message", message}}}};
}

JsonServer::JsonServer(Endpoint listen, Handler handler) : ep_(std::move(listen)), handler_(std::move(handler)) {}

JsonServer::~JsonServer() { stop(); }

void JsonServer::start() {
  auto addr = resolve(ep_);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) io_fail("socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    auto msg = std::string("bind ") + ep_.str() + ": " + std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    fail(Errc::PeerUnreachable, msg);
  }
  if (::listen(listen_fd_, 64) != 0) io_fail("listen");
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  ep_.port = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void JsonServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lk(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers)
    if (t.joinable()) t.join();
  listen_fd_ = -1;
}

void JsonServer::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    int r = ::poll(&p, 1, 200);
    if (r <= 0) continue;
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lk(mu_);
    if (!running_) {
      ::close(fd);
      break;
    }
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void JsonServer::serve(int fd) {
  Socket s(fd);
  try {
    while (running_) {
      auto frame = s.recv_frame();
      if (!frame) break;
      json reply;
      try {
        reply = handler_(json::parse(*frame));
      } catch (const json::exception& e) {
        reply = error_response(nullptr, "MalformedRequest", e.what());
      } catch (const Error& e) {
        reply = error_response(nullptr, std::string(to_string(e.code())), e.what());
      }
      s.send_frame(reply.dump());
    }
  } catch (const std::exception&) {
    // Peer went away or sent a torn frame; drop the connection.
  }
  std::lock_guard lk(mu_);
  open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
}

}  // namespace funky::runtime
