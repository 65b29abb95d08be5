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

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "mcds/session.hpp"
#include "mcds/xcp.hpp"

namespace httplib {
class Server;
}

namespace mcds {

// Serializes every session access onto one worker thread.
class SessionWorker {
 public:
  explicit SessionWorker(std::unique_ptr<Session> session);
  ~SessionWorker();
  SessionWorker(const SessionWorker&) = delete;
  SessionWorker& operator=(const SessionWorker&) = delete;

  // Queues `fn(session)` and returns its future.
  template <typename F>
  auto submit(F&& fn) -> std::future<std::invoke_result_t<F, Session&>> {
    using R = std::invoke_result_t<F, Session&>;
    auto task = std::make_shared<std::packaged_task<R(Session&)>>(std::forward<F>(fn));
    auto fut = task->get_future();
    enqueue([task](Session& s) { (*task)(s); });
    return fut;
  }

  void stop();

 private:
  void enqueue(std::function<void(Session&)> job);
  void loop();

  std::unique_ptr<Session> session_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::queue<std::function<void(Session&)>> jobs_;
  bool stopping_ = false;
  std::thread thread_;
};

// HTTP/JSON front end plus an optional XCP TCP listener for one session.
//
//   GET  /api/state                 session state snapshot
//   POST /api/control               {"cmd": ...}; 400 malformed, 409 phase
//   GET  /api/trace?from=N[&limit=M] live trace from global index N
//   GET  /api/calibration?addr=A&len=L   read through XCP SHORT_UPLOAD
//   POST /api/calibration           {"addr": A, "bytes": [...]} via DOWNLOAD
//   GET  /api/calibration/page      {"page": P}
//   POST /api/calibration/page      {"page": P} or a bare 0/1 via SET_CAL_PAGE
//   GET  /api/stream[?from=N]       server-sent events: state, trace, daq
class ApiServer {
 public:
  explicit ApiServer(std::unique_ptr<Session> session);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds and serves on background threads; port 0 picks a free port.
  // Returns the bound port. Throws Error when binding fails.
  int start(const std::string& host, int port);
  std::uint16_t start_xcp_tcp(const std::string& host, std::uint16_t port);
  void stop();

  SessionWorker& worker() { return *worker_; }

 private:
  struct Broadcast;

  void install_routes();
  // Runs `fn` on the worker and publishes whatever it changed before the
  // future resolves, so a follow-up GET always sees the effect.
  template <typename F>
  auto call(F&& fn) -> std::invoke_result_t<F, Session&>;
  void publish(Session& session);

  std::unique_ptr<SessionWorker> worker_;
  std::unique_ptr<httplib::Server> http_;
  std::unique_ptr<xcp::TcpServer> xcp_tcp_;
  std::unique_ptr<Broadcast> bus_;
  std::thread http_thread_;
};

}  // namespace mcds
