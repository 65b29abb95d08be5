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

// mcdsctl: command-line front end over the mcds C API.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcds/mcds.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int report(mcds_status st, const char* what) {
  if (st == MCDS_OK) return kExitOk;
  std::fprintf(stderr, "mcdsctl: %s: %s\n", what, mcds_last_error());
  return st == MCDS_ERR_CONFIG ? kExitConfig : kExitRuntime;
}

// Owns a C string handed out by the library.
struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { mcds_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct SessionHandle {
  mcds_session* s = nullptr;
  ~SessionHandle() { mcds_session_free(s); }
};

void print_summary(const std::string& state_text) {
  auto st = nlohmann::json::parse(state_text);
  std::printf("phase=%s cycle=%llu trace_messages=%llu trace_bytes=%llu\n",
              st["phase"].get<std::string>().c_str(),
              static_cast<unsigned long long>(st["cycle"].get<std::uint64_t>()),
              static_cast<unsigned long long>(st["trace"]["messages"].get<std::uint64_t>()),
              static_cast<unsigned long long>(st["trace"]["bytes"].get<std::uint64_t>()));
  for (const auto& c : st["cores"]) {
    std::printf("  core%d %-12s pc=0x%08x\n", c["id"].get<int>(),
                c["mode"].get<std::string>().c_str(), c["pc"].get<unsigned>());
  }
}

std::uint64_t parse_number(const std::string& text) {
  std::size_t used = 0;
  auto v = std::stoull(text, &used, 0);
  if (used != text.size()) throw std::invalid_argument("bad number '" + text + "'");
  return v;
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> cycles,
            const std::string& trace_out) {
  SessionHandle h;
  if (int rc = report(mcds_session_load(config.c_str(), &h.s), "config")) return rc;
  nlohmann::json cmd{{"cmd", "run"}};
  if (cycles) cmd["cycles"] = *cycles;
  OwnedString state;
  if (int rc = report(mcds_control_json(h.s, cmd.dump().c_str(), &state.p), "run")) return rc;
  if (!trace_out.empty()) {
    if (int rc = report(mcds_export_trace(h.s, trace_out.c_str(), "mtrc"), "export")) return rc;
  }
  print_summary(state.str());
  return kExitOk;
}

int cmd_decode(const std::string& trace, const std::vector<std::string>& images,
               const std::string& out, int ts_width) {
  std::vector<const char*> paths;
  for (const auto& p : images) paths.push_back(p.c_str());
  OwnedString summary;
  auto st = mcds_decode_file(trace.c_str(), paths.data(), paths.size(), ts_width, out.c_str(),
                             &summary.p);
  if (st != MCDS_OK) return report(st, "decode");
  std::printf("%s\n", nlohmann::json::parse(summary.str()).dump(2).c_str());
  return kExitOk;
}

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int cmd_serve(const std::string& config, const std::string& http, const std::string& xcp) {
  mcds_server* srv = nullptr;
  if (int rc = report(mcds_server_start(config.c_str(), http.c_str(),
                                        xcp.empty() ? nullptr : xcp.c_str(), &srv),
                      "serve")) {
    return rc;
  }
  std::printf("http port %d", mcds_server_http_port(srv));
  if (mcds_server_xcp_port(srv) >= 0) std::printf(", xcp port %d", mcds_server_xcp_port(srv));
  std::printf("\n");
  std::fflush(stdout);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  mcds_server_stop(srv);
  return kExitOk;
}

constexpr const char* kShellHelp =
    "commands:\n"
    "  run [cycles]            run until break, completion or the cycle budget\n"
    "  halt | resume | reset\n"
    "  step [cycles]\n"
    "  pin <n> [0|1]           drive an external trigger pin\n"
    "  swbreak <addr> [off]    patch a software breakpoint into overlay memory\n"
    "  page [0|1]              show or switch the active calibration page\n"
    "  cal <addr> <byte>...    download bytes through XCP\n"
    "  read <addr> <len>       debug-port memory read\n"
    "  state                   print the full state JSON\n"
    "  export <file> [mtrc|jsonl]\n"
    "  quit\n";

// Returns false when the shell should exit.
bool shell_line(mcds_session* s, const std::string& line, int& last_rc) {
  std::istringstream in(line);
  std::vector<std::string> w;
  for (std::string t; in >> t;) w.push_back(t);
  if (w.empty() || w[0][0] == '#') return true;
  const std::string& op = w[0];
  auto arg = [&](std::size_t i) { return parse_number(w.at(i)); };

  nlohmann::json cmd;
  if (op == "quit" || op == "exit") return false;
  if (op == "help") {
    std::fputs(kShellHelp, stdout);
    return true;
  }
  if (op == "run") {
    cmd = {{"cmd", "run"}};
    if (w.size() > 1) cmd["cycles"] = arg(1);
  } else if (op == "halt" || op == "resume" || op == "reset") {
    cmd = {{"cmd", op}};
  } else if (op == "step") {
    cmd = {{"cmd", "step"}, {"cycles", w.size() > 1 ? arg(1) : 1}};
  } else if (op == "pin") {
    cmd = {{"cmd", "set_pin"}, {"pin", arg(1)}, {"level", w.size() > 2 ? arg(2) != 0 : true}};
  } else if (op == "swbreak") {
    cmd = {{"cmd", "swbreak"}, {"addr", arg(1)}, {"on", !(w.size() > 2 && w[2] == "off")}};
  } else if (op == "page") {
    if (w.size() > 1) {
      std::uint64_t ns = 0;
      last_rc = report(mcds_cal_page_set(s, static_cast<int>(arg(1)), &ns), "page");
      if (last_rc == kExitOk) std::printf("page %d (%llu ns)\n", static_cast<int>(arg(1)),
                                          static_cast<unsigned long long>(ns));
    } else {
      int page = 0;
      last_rc = report(mcds_cal_page_get(s, &page), "page");
      if (last_rc == kExitOk) std::printf("page %d\n", page);
    }
    return true;
  } else if (op == "cal") {
    std::vector<std::uint8_t> bytes;
    for (std::size_t i = 2; i < w.size(); ++i) bytes.push_back(static_cast<std::uint8_t>(arg(i)));
    std::uint64_t ns = 0;
    last_rc = report(mcds_calibrate(s, static_cast<std::uint32_t>(arg(1)), bytes.data(),
                                    bytes.size(), &ns),
                     "cal");
    if (last_rc == kExitOk) std::printf("wrote %zu bytes (%llu ns)\n", bytes.size(),
                                        static_cast<unsigned long long>(ns));
    return true;
  } else if (op == "read") {
    std::vector<std::uint8_t> buf(arg(2));
    last_rc = report(mcds_read_memory(s, static_cast<std::uint32_t>(arg(1)), buf.data(),
                                      buf.size()),
                     "read");
    if (last_rc == kExitOk) {
      for (auto b : buf) std::printf("%02x ", b);
      std::printf("\n");
    }
    return true;
  } else if (op == "state") {
    OwnedString st;
    last_rc = report(mcds_state_json(s, &st.p), "state");
    if (last_rc == kExitOk) std::printf("%s\n", nlohmann::json::parse(st.str()).dump(2).c_str());
    return true;
  } else if (op == "export") {
    const char* fmt = w.size() > 2 ? w[2].c_str() : "mtrc";
    last_rc = report(mcds_export_trace(s, w.at(1).c_str(), fmt), "export");
    return true;
  } else {
    std::fprintf(stderr, "unknown command '%s' (try 'help')\n", op.c_str());
    last_rc = kExitRuntime;
    return true;
  }

  OwnedString state;
  last_rc = report(mcds_control_json(s, cmd.dump().c_str(), &state.p), op.c_str());
  if (last_rc == kExitOk) print_summary(state.str());
  return true;
}

int cmd_shell(const std::string& config) {
  SessionHandle h;
  if (int rc = report(mcds_session_load(config.c_str(), &h.s), "config")) return rc;
  const bool tty = isatty(fileno(stdin));
  int last_rc = kExitOk;
  int worst = kExitOk;
  std::string line;
  while (true) {
    if (tty) {
      std::printf("mcds> ");
      std::fflush(stdout);
    }
    if (!std::getline(std::cin, line)) break;
    try {
      if (!shell_line(h.s, line, last_rc)) break;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "bad arguments: %s\n", e.what());
      last_rc = kExitRuntime;
    }
    if (last_rc > worst) worst = last_rc;
  }
  // Scripts piped into the shell report their worst failure.
  return tty ? kExitOk : worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCDS simulator control"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mcds_version()));

  std::string config, trace_out, trace, out, http = "127.0.0.1:8080", xcp, source, bin;
  std::vector<std::string> images;
  std::optional<std::uint64_t> cycles;
  int ts_width = 16;
  std::uint32_t base = 0;

  auto* run = app.add_subcommand("run", "run a session to completion or a cycle budget");
  run->add_option("--config", config, "session config (JSON)")->required();
  run->add_option("--cycles", cycles, "cycle budget");
  run->add_option("--trace-out", trace_out, "write the trace as .mtrc");

  auto* decode = app.add_subcommand("decode", "decode an .mtrc file to JSON lines");
  decode->add_option("--trace", trace, "input .mtrc")->required();
  decode->add_option("--image", images, "program image per source, in source order");
  decode->add_option("--out", out, "output .jsonl")->required();
  decode->add_option("--ts-width", ts_width, "timestamp width in bits")->check(CLI::Range(2, 32));

  auto* serve = app.add_subcommand("serve", "serve the HTTP API and XCP over TCP");
  serve->add_option("--config", config, "session config (JSON)")->required();
  serve->add_option("--http", http, "HTTP listen address host:port");
  serve->add_option("--xcp-tcp", xcp, "XCP listen address host:port");

  auto* shell = app.add_subcommand("shell", "interactive debug shell");
  shell->add_option("--config", config, "session config (JSON)")->required();

  auto* assemble = app.add_subcommand("assemble", "assemble a source file into a .bin image");
  assemble->add_option("source", source, "assembly source")->required();
  assemble->add_option("-o,--out", bin, "output .bin")->required();
  assemble->add_option("--base", base, "load address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return cmd_run(config, cycles, trace_out);
  if (*decode) return cmd_decode(trace, images, out, ts_width);
  if (*serve) return cmd_serve(config, http, xcp);
  if (*shell) return cmd_shell(config);
  if (*assemble) return report(mcds_assemble_file(source.c_str(), base, bin.c_str()), "assemble");
  return kExitOk;
}
