// Copyright 2026 The mcdsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy of
// the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations under
// the License.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <vector>

#include "mcds/xcp.hpp"

namespace mcds::xcp {
namespace {

using std::chrono::microseconds;
using std::chrono::milliseconds;
using std::chrono::nanoseconds;

bool send_all(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

// Reads until one complete frame is buffered; nullopt on EOF or error.
std::optional<Frame> recv_frame(int fd, std::vector<std::uint8_t>& rx) {
  std::uint8_t chunk[4096];
  while (true) {
    if (auto f = take_frame(rx)) return f;
    ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    rx.insert(rx.end(), chunk, chunk + n);
  }
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    throw TransportError("cannot parse IPv4 address '" + host + "'");
  }
  return addr;
}

}  // namespace

nanoseconds default_latency(TransportKind kind) {
  return kind == TransportKind::kJtagLike ? nanoseconds(microseconds(2))
                                          : nanoseconds(milliseconds(3));
}

std::string_view transport_name(TransportKind kind) {
  return kind == TransportKind::kJtagLike ? "JTAG_LIKE" : "USB_LIKE";
}

Transport::Transport(TransportKind kind, nanoseconds one_way) : kind_(kind), one_way_(one_way) {
  if (one_way_.count() <= 0) throw Error("transport latency must be positive");
}

Roundtrip Transport::roundtrip(const Frame& request) {
  Roundtrip r;
  r.response = exchange(request);
  // Service time is zero on the simulated ledger; only the link counts.
  r.elapsed = 2 * one_way_;
  total_ += r.elapsed;
  return r;
}

InProcessTransport::InProcessTransport(Handler handler, TransportKind kind,
                                       std::optional<nanoseconds> one_way)
    : Transport(kind, one_way.value_or(default_latency(kind))), handler_(std::move(handler)) {}

Frame InProcessTransport::exchange(const Frame& request) {
  if (closed_) throw TransportError("channel closed");
  auto wire = encode_frame(request);
  auto req = take_frame(wire);
  auto resp_wire = encode_frame(handler_(*req));
  return *take_frame(resp_wire);
}

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port, TransportKind kind,
                           std::optional<nanoseconds> one_way)
    : Transport(kind, one_way.value_or(default_latency(kind))) {
  sockaddr_in addr = resolve(host, port);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    int err = errno;
    ::close(fd_);
    fd_ = -1;
    throw TransportError(std::string("connect: ") + std::strerror(err));
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpTransport::~TcpTransport() { close(); }

void TcpTransport::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

Frame TcpTransport::exchange(const Frame& request) {
  if (fd_ < 0) throw TransportError("channel closed");
  if (!send_all(fd_, encode_frame(request))) throw TransportError("send failed");
  auto f = recv_frame(fd_, rx_);
  if (!f) throw TransportError("connection closed by peer");
  return *f;
}

TcpServer::TcpServer(const std::string& host, std::uint16_t port, Handler handler)
    : handler_(std::move(handler)) {
  sockaddr_in addr = resolve(host, port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 8) != 0) {
    int err = errno;
    ::close(listen_fd_);
    throw TransportError(std::string("bind/listen: ") + std::strerror(err));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(clients_mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : clients_) {
    if (t.joinable()) t.join();
  }
}

void TcpServer::accept_loop() {
  while (!stopping_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(clients_mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    client_fds_.push_back(fd);
    clients_.emplace_back([this, fd] { serve_client(fd); });
  }
}

void TcpServer::serve_client(int fd) {
  std::vector<std::uint8_t> rx;
  while (auto req = recv_frame(fd, rx)) {
    Frame resp;
    {
      std::lock_guard lock(handler_mu_);
      resp = handler_(*req);
    }
    if (!send_all(fd, encode_frame(resp))) break;
  }
  std::lock_guard lock(clients_mu_);
  std::erase(client_fds_, fd);
  ::close(fd);
}

}  // namespace mcds::xcp
