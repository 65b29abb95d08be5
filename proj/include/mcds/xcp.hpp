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
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mcds/error.hpp"
#include "mcds/machine.hpp"

namespace mcds::xcp {

inline constexpr std::uint8_t kConnect = 0xFF;
inline constexpr std::uint8_t kDisconnect = 0xFE;
inline constexpr std::uint8_t kGetStatus = 0xFD;
inline constexpr std::uint8_t kShortUpload = 0xF4;
inline constexpr std::uint8_t kDownload = 0xF0;
inline constexpr std::uint8_t kSetCalPage = 0xEB;
inline constexpr std::uint8_t kGetCalPage = 0xEA;
inline constexpr std::uint8_t kStartStopDaq = 0xDE;

inline constexpr std::uint8_t kPositive = 0xFF;
inline constexpr std::uint8_t kNegative = 0xFE;

inline constexpr std::uint8_t kErrSequence = 0x1D;
inline constexpr std::uint8_t kErrCmdUnknown = 0x20;
inline constexpr std::uint8_t kErrMalformed = 0x21;
inline constexpr std::uint8_t kErrOutOfRange = 0x22;

// Wire form: len u16 LE | ctr u16 LE | payload[len]; payload[0] is the
// packet id.
struct Frame {
  std::uint16_t ctr = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const Frame&, const Frame&) = default;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);
// Pulls one frame off the front of `buffer`. Returns nullopt until enough
// bytes have arrived; a zero length is reported as an empty payload.
std::optional<Frame> take_frame(std::vector<std::uint8_t>& buffer);

struct DaqEntry {
  std::uint32_t addr = 0;
  std::uint8_t len = 0;  // 1..8
};

struct DaqList {
  std::uint8_t id = 0;
  std::vector<DaqEntry> entries;
  std::uint64_t period = 1;
  bool active = false;

  // Throws Error on an empty or oversized entry, a zero period or more than
  // 255 sample bytes per firing.
  void validate() const;
};

// Measurement and calibration service. Every memory access goes through the
// machine's debug port, so serving commands costs the target no cycles.
class Server {
 public:
  explicit Server(Machine& machine, std::vector<DaqList> lists = {});

  Frame serve(const Frame& request);
  // Called after the tick of `cycle`; a list fires when (cycle + 1) is a
  // multiple of its period. Payload: list id followed by the samples.
  std::vector<Frame> daq_tick(std::uint64_t cycle);

  bool connected() const { return connected_; }
  const std::vector<DaqList>& lists() const { return lists_; }
  std::uint64_t daq_frames() const { return daq_frames_; }

 private:
  std::vector<std::uint8_t> handle(std::span<const std::uint8_t> req);

  Machine& machine_;
  std::vector<DaqList> lists_;
  bool connected_ = false;
  std::uint16_t daq_ctr_ = 0;
  std::uint64_t daq_frames_ = 0;
};

// ---------------------------------------------------------------------------
// Transports. Elapsed time is simulated and kept in a ledger; it never
// depends on the wall clock.

enum class TransportKind : std::uint8_t { kJtagLike, kUsbLike };

std::chrono::nanoseconds default_latency(TransportKind kind);
std::string_view transport_name(TransportKind kind);

class TransportError : public Error {
 public:
  using Error::Error;
};

struct Roundtrip {
  Frame response;
  std::chrono::nanoseconds elapsed{0};
};

class Transport {
 public:
  Transport(TransportKind kind, std::chrono::nanoseconds one_way);
  virtual ~Transport() = default;

  TransportKind kind() const { return kind_; }
  std::chrono::nanoseconds one_way_latency() const { return one_way_; }
  std::chrono::nanoseconds total_elapsed() const { return total_; }

  // Throws TransportError when the channel is closed or broken.
  Roundtrip roundtrip(const Frame& request);

 protected:
  virtual Frame exchange(const Frame& request) = 0;

 private:
  TransportKind kind_;
  std::chrono::nanoseconds one_way_;
  std::chrono::nanoseconds total_{0};
};

using Handler = std::function<Frame(const Frame&)>;

// Same framing as the socket transport, without leaving the process. Each
// request is encoded and re-parsed so both paths exercise the wire format.
class InProcessTransport : public Transport {
 public:
  explicit InProcessTransport(Handler handler,
                              TransportKind kind = TransportKind::kJtagLike,
                              std::optional<std::chrono::nanoseconds> one_way = {});
  void close() { closed_ = true; }

 protected:
  Frame exchange(const Frame& request) override;

 private:
  Handler handler_;
  bool closed_ = false;
};

// Client side of the TCP channel.
class TcpTransport : public Transport {
 public:
  TcpTransport(const std::string& host, std::uint16_t port,
               TransportKind kind = TransportKind::kUsbLike,
               std::optional<std::chrono::nanoseconds> one_way = {});
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;
  void close();

 protected:
  Frame exchange(const Frame& request) override;

 private:
  int fd_ = -1;
  std::vector<std::uint8_t> rx_;
};

// Accepts TCP clients and answers each frame through `handler`, one request
// at a time across all connections.
class TcpServer {
 public:
  TcpServer(const std::string& host, std::uint16_t port, Handler handler);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();

 private:
  void accept_loop();
  void serve_client(int fd);

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  Handler handler_;
  std::mutex handler_mu_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex clients_mu_;
  std::vector<int> client_fds_;
  std::vector<std::thread> clients_;
};

}  // namespace mcds::xcp
