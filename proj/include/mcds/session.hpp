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

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcds/debug_system.hpp"
#include "mcds/machine.hpp"
#include "mcds/session_config.hpp"
#include "mcds/xcp.hpp"

namespace mcds {

enum class Phase : std::uint8_t { kIdle, kRunning, kBroken, kDone };
std::string_view phase_name(Phase phase);

enum class TraceFormat : std::uint8_t { kMtrc, kJsonl };

// Owns the machine and everything attached to it. Not thread-safe: the API
// server gives one worker thread exclusive ownership.
class Session {
 public:
  explicit Session(SessionConfig config);
  static std::unique_ptr<Session> load(const std::string& config_path);

  const SessionConfig& config() const { return config_; }
  Phase phase() const { return phase_; }
  Machine& machine() { return *machine_; }
  const Machine& machine() const { return *machine_; }
  DebugSystem& debug() { return *debug_; }
  const DebugSystem& debug() const { return *debug_; }
  xcp::Server& xcp_server() { return *xcp_; }

  // Run control. Each throws PhaseError when the phase does not admit it.
  //
  // run: IDLE or RUNNING. Advances up to `cycles` (bounded by the run
  // limit); stops early on a new break halt or once nothing is left running.
  void run(std::uint64_t cycles);
  // IDLE or RUNNING -> BROKEN, through the break/suspend switch.
  void halt();
  // BROKEN -> RUNNING. Cores stopped on a patched breakpoint execute the
  // original instruction first.
  void resume();
  // Any phase but DONE: resumes, advances exactly `cycles`, halts again.
  void step(std::uint64_t cycles);
  void set_pin(int pin, bool level);
  // Patches BRK into emulation RAM; only addresses that currently resolve
  // there are accepted (plain flash cannot be patched). Throws RequestError.
  void swbreak(std::uint32_t addr, bool on);
  // Target reset; emulation memory and flash survive. Back to IDLE.
  void reset();

  // {"cmd": "run", "cycles": N} and friends; returns state_json().
  nlohmann::json control(const nlohmann::json& command);
  nlohmann::json state_json() const;

  // XCP through the in-process JTAG-like link; frames DAQ output into
  // daq_frames().
  xcp::Roundtrip xcp_request(const xcp::Frame& request);
  // Convenience wrappers; throw RequestError on a negative response.
  std::chrono::nanoseconds calibrate(std::uint32_t addr, std::span<const std::uint8_t> bytes);
  std::chrono::nanoseconds set_cal_page(int page);
  std::vector<std::uint8_t> upload(std::uint32_t addr, std::uint8_t len);
  const std::vector<xcp::Frame>& daq_frames() const { return daq_frames_; }

  // Live trace, already in merge order.
  const std::vector<TraceMessage>& trace() const { return debug_->trace(); }
  std::vector<std::uint8_t> export_mtrc() const;
  std::string export_jsonl() const;
  void export_trace(const std::string& path, TraceFormat format) const;

  void set_clients(int n) { clients_ = n; }

 private:
  void tick();
  void settle_phase(bool stop_on_break);
  xcp::Frame xcp_checked(std::vector<std::uint8_t> payload);

  SessionConfig config_;
  std::unique_ptr<Machine> machine_;
  std::unique_ptr<DebugSystem> debug_;
  std::unique_ptr<xcp::Server> xcp_;
  std::unique_ptr<xcp::InProcessTransport> jtag_;
  Phase phase_ = Phase::kIdle;
  std::map<std::uint32_t, std::uint32_t> swbreaks_;  // emu offset -> original word
  std::vector<xcp::Frame> daq_frames_;
  std::uint16_t xcp_ctr_ = 0;
  int clients_ = 0;
};

}  // namespace mcds
