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

#include "mcds/api_server.hpp"

#include <chrono>

#include "httplib.h"
#include "json.hpp"
#include "mcds/codec.hpp"
#include "mcds/error.hpp"

namespace mcds {

using nlohmann::json;

SessionWorker::SessionWorker(std::unique_ptr<Session> session)
    : session_(std::move(session)), thread_([this] { loop(); }) {}

SessionWorker::~SessionWorker() { stop(); }

void SessionWorker::enqueue(std::function<void(Session&)> job) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) throw Error("session worker stopped");
    jobs_.push(std::move(job));
  }
  cv_.notify_one();
}

void SessionWorker::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void SessionWorker::loop() {
  while (true) {
    std::function<void(Session&)> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
      if (jobs_.empty()) return;  // stopping with nothing left to do
      job = std::move(jobs_.front());
      jobs_.pop();
    }
    job(*session_);
  }
}

struct ApiServer::Broadcast {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::string> trace;  // message JSON by global index
  std::vector<std::string> log;    // formatted SSE events
  std::string state;
  std::size_t session_seen = 0;    // messages of the current trace epoch
  std::size_t daq_seen = 0;
  int clients = 0;
  bool stopping = false;
};

namespace {

constexpr std::uint64_t kRunSlice = 10'000;

std::string sse(const char* event, const std::string& data) {
  return std::string("event: ") + event + "\ndata: " + data + "\n\n";
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& what) {
  reply(res, status, json{{"error", what}});
}

// Maps exceptions from a session call onto HTTP statuses.
template <typename F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const PhaseError& e) {
    reply_error(res, 409, e.what());
  } catch (const RequestError& e) {
    reply_error(res, 400, e.what());
  } catch (const AccessError& e) {
    reply_error(res, 400, e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, e.what());
  }
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw RequestError(std::string("malformed JSON body: ") + e.what());
  }
}

std::uint64_t query_uint(const httplib::Request& req, const char* key, std::uint64_t fallback,
                         std::uint64_t max) {
  if (!req.has_param(key)) return fallback;
  const std::string s = req.get_param_value(key);
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || s[0] == '-' || v > max) {
    throw RequestError(std::string("query parameter '") + key + "' is not a valid number");
  }
  return v;
}

std::uint32_t json_addr(const json& j) {
  if (j.is_number_unsigned() && j.get<std::uint64_t>() <= 0xFFFFFFFFu) {
    return static_cast<std::uint32_t>(j.get<std::uint64_t>());
  }
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    std::size_t used = 0;
    try {
      std::uint64_t v = std::stoull(s, &used, 0);
      if (used == s.size() && v <= 0xFFFFFFFFu && s[0] != '-') return static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
    }
  }
  throw RequestError("'addr' must be a 32-bit address");
}

}  // namespace

ApiServer::ApiServer(std::unique_ptr<Session> session)
    : worker_(std::make_unique<SessionWorker>(std::move(session))),
      http_(std::make_unique<httplib::Server>()),
      bus_(std::make_unique<Broadcast>()) {
  call([](Session&) {});
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

template <typename F>
auto ApiServer::call(F&& fn) -> std::invoke_result_t<F, Session&> {
  return worker_
      ->submit([this, &fn](Session& s) {
        struct Publish {
          ApiServer* self;
          Session& s;
          ~Publish() { self->publish(s); }
        } guard{this, s};
        return fn(s);
      })
      .get();
}

void ApiServer::publish(Session& s) {
  std::lock_guard lock(bus_->mu);
  Broadcast& b = *bus_;
  const auto& trace = s.trace();
  // A reset starts a new host-side trace; global indices keep counting.
  if (trace.size() < b.session_seen) b.session_seen = 0;
  for (std::size_t i = b.session_seen; i < trace.size(); ++i) {
    json j = to_json(trace[i]);
    j["index"] = b.trace.size();
    std::string text = j.dump();
    b.log.push_back(sse("trace", text));
    b.trace.push_back(std::move(text));
  }
  b.session_seen = trace.size();
  const auto& daq = s.daq_frames();
  for (std::size_t i = b.daq_seen; i < daq.size(); ++i) {
    const auto& p = daq[i].payload;
    b.log.push_back(sse("daq", json{{"ctr", daq[i].ctr},
                                    {"list", p.empty() ? 0 : p[0]},
                                    {"bytes", std::vector<std::uint8_t>(p.begin() + (p.empty() ? 0 : 1), p.end())}}
                                   .dump()));
  }
  b.daq_seen = daq.size();
  std::string state = s.state_json().dump();
  if (state != b.state) {
    b.state = state;
    b.log.push_back(sse("state", state));
  }
  b.cv.notify_all();
}

void ApiServer::install_routes() {
  httplib::Server& srv = *http_;

  srv.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, call([](Session& s) { return s.state_json(); })); });
  });

  srv.Post("/api/control", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json cmd = parse_body(req);
      if (cmd.is_object() && cmd.value("cmd", json()) == "run") {
        // Long runs go in slices so state queries and the event stream keep
        // flowing between them; every slice ends on a cycle boundary.
        std::uint64_t remaining = 0;
        bool more = call([&](Session& s) {
          remaining = s.config().max_cycles;
          if (cmd.contains("cycles")) {
            const json& v = cmd["cycles"];
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
              throw RequestError("'cycles' must be a non-negative integer");
            }
            remaining = v.get<std::uint64_t>();
          }
          const std::uint64_t slice = std::min(remaining, kRunSlice);
          s.run(slice);
          remaining -= slice;
          return s.phase() == Phase::kRunning;
        });
        while (more && remaining > 0) {
          more = call([&](Session& s) {
            // A halt may have slipped in between slices.
            if (s.phase() != Phase::kRunning) return false;
            const std::uint64_t slice = std::min(remaining, kRunSlice);
            s.run(slice);
            remaining -= slice;
            return s.phase() == Phase::kRunning;
          });
        }
        reply(res, 200, call([](Session& s) { return s.state_json(); }));
        return;
      }
      reply(res, 200, call([&](Session& s) { return s.control(cmd); }));
    });
  });

  srv.Get("/api/trace", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::uint64_t from = query_uint(req, "from", 0, ~std::uint64_t{0});
      const std::uint64_t limit = query_uint(req, "limit", 10'000, 1'000'000);
      std::string body;
      {
        std::lock_guard lock(bus_->mu);
        const std::size_t total = bus_->trace.size();
        const std::size_t begin = static_cast<std::size_t>(std::min<std::uint64_t>(from, total));
        const std::size_t end = static_cast<std::size_t>(std::min<std::uint64_t>(total, begin + limit));
        body = "{\"from\":" + std::to_string(begin) + ",\"next\":" + std::to_string(end) +
               ",\"total\":" + std::to_string(total) + ",\"messages\":[";
        for (std::size_t i = begin; i < end; ++i) {
          if (i != begin) body += ',';
          body += bus_->trace[i];
        }
        body += "]}";
      }
      res.status = 200;
      res.set_content(body, "application/json");
    });
  });

  srv.Get("/api/calibration", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("addr")) throw RequestError("missing 'addr'");
      const auto addr = static_cast<std::uint32_t>(query_uint(req, "addr", 0, 0xFFFFFFFFu));
      const auto len = static_cast<std::uint8_t>(query_uint(req, "len", 4, 255));
      if (len == 0) throw RequestError("'len' must be 1-255");
      auto bytes = call([&](Session& s) { return s.upload(addr, len); });
      reply(res, 200, json{{"addr", addr}, {"bytes", bytes}});
    });
  });

  srv.Post("/api/calibration", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json body = parse_body(req);
      if (!body.is_object() || !body.contains("addr") || !body.contains("bytes")) {
        throw RequestError("expected {\"addr\": ..., \"bytes\": [...]}");
      }
      const std::uint32_t addr = json_addr(body["addr"]);
      std::vector<std::uint8_t> bytes;
      if (!body["bytes"].is_array() || body["bytes"].empty()) {
        throw RequestError("'bytes' must be a non-empty array");
      }
      for (const auto& b : body["bytes"]) {
        if (!b.is_number_unsigned() || b.get<std::uint64_t>() > 255) {
          throw RequestError("'bytes' entries must be 0-255");
        }
        bytes.push_back(b.get<std::uint8_t>());
      }
      auto elapsed = call([&](Session& s) { return s.calibrate(addr, bytes); });
      reply(res, 200, json{{"ok", true}, {"elapsed_ns", elapsed.count()}});
    });
  });

  srv.Get("/api/calibration/page", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      int page = call([](Session& s) { return s.machine().emu().cal_page(); });
      reply(res, 200, json{{"page", page}});
    });
  });

  srv.Post("/api/calibration/page", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      json body = parse_body(req);
      json p = body.is_object() ? body.value("page", json()) : body;
      if (!p.is_number_unsigned() || p.get<std::uint64_t>() > 1) {
        throw RequestError("expected {\"page\": 0|1}");
      }
      const int page = p.get<int>();
      auto elapsed = call([&](Session& s) { return s.set_cal_page(page); });
      reply(res, 200, json{{"page", page}, {"elapsed_ns", elapsed.count()}});
    });
  });

  srv.Get("/api/stream", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::size_t> replay_from;
    try {
      if (req.has_param("from")) replay_from = query_uint(req, "from", 0, ~std::uint64_t{0});
    } catch (const RequestError& e) {
      reply_error(res, 400, e.what());
      return;
    }
    struct Cursor {
      bool started = false;
      std::size_t log_pos = 0;
    };
    auto cursor = std::make_shared<Cursor>();
    int clients;
    {
      std::lock_guard lock(bus_->mu);
      clients = ++bus_->clients;
    }
    worker_->submit([clients](Session& s) { s.set_clients(clients); });
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, cursor, replay_from](std::size_t, httplib::DataSink& sink) {
          std::string out;
          {
            std::unique_lock lock(bus_->mu);
            if (!cursor->started) {
              cursor->started = true;
              cursor->log_pos = bus_->log.size();
              out += sse("state", bus_->state);
              if (replay_from) {
                for (std::size_t i = *replay_from; i < bus_->trace.size(); ++i) {
                  out += sse("trace", bus_->trace[i]);
                }
              }
            } else {
              bus_->cv.wait_for(lock, std::chrono::seconds(1), [&] {
                return bus_->stopping || bus_->log.size() > cursor->log_pos;
              });
              if (bus_->stopping) {
                sink.done();
                return false;
              }
              for (; cursor->log_pos < bus_->log.size(); ++cursor->log_pos) {
                out += bus_->log[cursor->log_pos];
              }
            }
          }
          // A comment line doubles as a liveness probe for idle clients.
          if (out.empty()) out = ": keepalive\n\n";
          return sink.write(out.data(), out.size());
        },
        [this](bool) {
          int clients;
          {
            std::lock_guard lock(bus_->mu);
            clients = --bus_->clients;
          }
          try {
            worker_->submit([clients](Session& s) { s.set_clients(clients); });
          } catch (const Error&) {
            // Worker already stopped during shutdown.
          }
        });
  });
}

int ApiServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = http_->bind_to_any_port(host);
  } else if (!http_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw Error("cannot bind HTTP server to " + host + ":" + std::to_string(port));
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return bound;
}

std::uint16_t ApiServer::start_xcp_tcp(const std::string& host, std::uint16_t port) {
  xcp_tcp_ = std::make_unique<xcp::TcpServer>(host, port, [this](const xcp::Frame& f) {
    return call([&](Session& s) { return s.xcp_server().serve(f); });
  });
  return xcp_tcp_->port();
}

void ApiServer::stop() {
  {
    std::lock_guard lock(bus_->mu);
    if (bus_->stopping) return;
    bus_->stopping = true;
  }
  bus_->cv.notify_all();
  if (xcp_tcp_) xcp_tcp_->stop();
  http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
  worker_->stop();
}

}  // namespace mcds
