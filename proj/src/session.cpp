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

#include "mcds/session.hpp"

#include <sstream>

#include "mcds/codec.hpp"
#include "mcds/error.hpp"

namespace mcds {
namespace {

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::string_view mode_name(CoreMode m) {
  switch (m) {
    case CoreMode::kRunning: return "RUNNING";
    case CoreMode::kHaltedBreak: return "HALTED_BREAK";
    case CoreMode::kDone: return "DONE";
  }
  return "?";
}

std::uint64_t arg_uint(const nlohmann::json& cmd, const char* key, std::uint64_t max) {
  const auto& v = cmd.at(key);
  std::uint64_t out = 0;
  if (v.is_number_unsigned()) {
    out = v.get<std::uint64_t>();
  } else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    out = static_cast<std::uint64_t>(v.get<std::int64_t>());
  } else if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t used = 0;
    try {
      out = std::stoull(s, &used, 0);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || s[0] == '-') {
      throw RequestError(std::string("'") + key + "' must be a non-negative integer");
    }
  } else {
    throw RequestError(std::string("'") + key + "' must be a non-negative integer");
  }
  if (out > max) throw RequestError(std::string("'") + key + "' out of range");
  return out;
}

bool arg_bool(const nlohmann::json& cmd, const char* key, bool fallback) {
  if (!cmd.contains(key)) return fallback;
  if (!cmd[key].is_boolean()) throw RequestError(std::string("'") + key + "' must be a boolean");
  return cmd[key].get<bool>();
}

}  // namespace

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::kIdle: return "IDLE";
    case Phase::kRunning: return "RUNNING";
    case Phase::kBroken: return "BROKEN";
    case Phase::kDone: return "DONE";
  }
  return "?";
}

Session::Session(SessionConfig config) : config_(std::move(config)) {
  machine_ = std::make_unique<Machine>(config_.machine);
  EmuMemory& emu = machine_->emu();
  emu.set_trace_mode(config_.trace_mode);
  bool has_trace = false;
  for (int s = 0; s < static_cast<int>(config_.segments.size()); ++s) {
    emu.set_segment_role(s, config_.segments[s]);
    has_trace = has_trace || config_.segments[s] == SegmentRole::kTrace;
  }
  // Ranges stay disabled until the images are in flash so that loading and
  // page filling see plain flash.
  for (const auto& o : config_.overlays) {
    OverlayRange r = o.range;
    r.enabled = false;
    emu.define_overlay_range(r);
  }
  for (std::size_t i = 0; i < config_.images.size(); ++i) {
    const auto& spec = config_.images[i];
    try {
      machine_->load(spec.image);
    } catch (const AccessError& e) {
      throw ConfigError({"images[" + std::to_string(i) + "]: " + e.what()});
    }
    if (spec.core) machine_->set_entry(*spec.core, spec.entry.value_or(spec.image.base_address));
  }
  for (const auto& o : config_.overlays) {
    if (o.fill_from_flash) {
      auto bytes = machine_->debug_read(o.range.flash_base, o.range.size);
      for (std::uint32_t k = 0; k < o.range.size; ++k) {
        emu.write(o.range.dest_page0 + k, bytes[k]);
        emu.write(o.range.dest_page1 + k, bytes[k]);
      }
    }
  }
  for (const auto& o : config_.overlays) {
    if (o.range.enabled) emu.set_range_enabled(o.range.id, true);
  }
  emu.set_cal_page(config_.initial_page);
  emu.set_trace_active(has_trace);
  if (config_.dma) machine_->set_dma(*config_.dma);

  debug_ = std::make_unique<DebugSystem>(*machine_, config_.debug);
  xcp_ = std::make_unique<xcp::Server>(*machine_, config_.daq);
  jtag_ = std::make_unique<xcp::InProcessTransport>(
      [this](const xcp::Frame& f) { return xcp_->serve(f); }, xcp::TransportKind::kJtagLike,
      config_.transports.jtag_latency);
}

std::unique_ptr<Session> Session::load(const std::string& config_path) {
  SessionConfig cfg = load_session_config(config_path);
  try {
    return std::make_unique<Session>(std::move(cfg));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError({e.what()});
  }
}

void Session::tick() {
  debug_->tick();
  for (auto& f : xcp_->daq_tick(machine_->cycle() - 1)) daq_frames_.push_back(std::move(f));
}

void Session::settle_phase(bool stop_on_break) {
  bool halted = false;
  for (const auto& c : machine_->cores()) halted = halted || c.mode == CoreMode::kHaltedBreak;
  if (halted && stop_on_break) {
    phase_ = Phase::kBroken;
  } else if (!machine_->any_running()) {
    phase_ = halted ? Phase::kBroken : Phase::kDone;
  }
}

void Session::run(std::uint64_t cycles) {
  if (phase_ == Phase::kBroken) throw PhaseError("session is BROKEN; resume first");
  if (phase_ == Phase::kDone) throw PhaseError("session is DONE");
  phase_ = Phase::kRunning;
  for (std::uint64_t i = 0; i < cycles; ++i) {
    if (machine_->cycle() >= config_.max_cycles) {
      phase_ = Phase::kDone;
      return;
    }
    tick();
    settle_phase(true);
    if (phase_ != Phase::kRunning) return;
  }
  if (machine_->cycle() >= config_.max_cycles) phase_ = Phase::kDone;
}

void Session::halt() {
  if (phase_ != Phase::kIdle && phase_ != Phase::kRunning) {
    throw PhaseError(std::string("cannot halt in phase ") + std::string(phase_name(phase_)));
  }
  debug_->halt_all();
  phase_ = Phase::kBroken;
}

void Session::resume() {
  if (phase_ != Phase::kBroken) throw PhaseError("resume is only valid in BROKEN");
  for (const auto& c : machine_->cores()) {
    if (c.mode != CoreMode::kHaltedBreak) continue;
    std::uint32_t off = 0;
    std::optional<std::uint32_t> override_word;
    if (machine_->resolves_to_emu(c.pc, &off)) {
      auto it = swbreaks_.find(off);
      if (it != swbreaks_.end()) override_word = it->second;
    }
    machine_->resume_core(c.id, override_word);
  }
  machine_->set_dma_suspended(false);
  phase_ = Phase::kRunning;
}

void Session::step(std::uint64_t cycles) {
  if (phase_ == Phase::kDone) throw PhaseError("session is DONE");
  if (cycles == 0) throw RequestError("step needs at least one cycle");
  if (phase_ == Phase::kBroken) resume();
  phase_ = Phase::kRunning;
  for (std::uint64_t i = 0; i < cycles && machine_->cycle() < config_.max_cycles; ++i) tick();
  settle_phase(false);
  if (phase_ == Phase::kRunning) {
    debug_->halt_all();
    phase_ = Phase::kBroken;
  }
}

void Session::set_pin(int pin, bool level) {
  if (pin < 0 || pin >= kExternalPins) throw RequestError("pin must be 0 or 1");
  debug_->set_pin(pin, level);
}

void Session::swbreak(std::uint32_t addr, bool on) {
  if (addr % 4 != 0) throw RequestError("breakpoint address must be word aligned");
  std::uint32_t off = 0;
  if (!machine_->resolves_to_emu(addr, &off)) {
    throw RequestError("software breakpoint at " + hex(addr) +
                       " needs code in emulation RAM (an enabled overlay range or the raw "
                       "emulation window); plain flash cannot be patched");
  }
  EmuMemory& emu = machine_->emu();
  auto word_at = [&] {
    std::uint32_t w = 0;
    for (int b = 0; b < 4; ++b) w |= static_cast<std::uint32_t>(emu.read(off + b)) << (8 * b);
    return w;
  };
  auto put = [&](std::uint32_t w) {
    for (int b = 0; b < 4; ++b) emu.write(off + b, static_cast<std::uint8_t>(w >> (8 * b)));
  };
  if (on) {
    if (swbreaks_.count(off)) return;
    swbreaks_[off] = word_at();
    put(kBreakWord);
  } else {
    auto it = swbreaks_.find(off);
    if (it == swbreaks_.end()) return;
    put(it->second);
    swbreaks_.erase(it);
  }
}

void Session::reset() {
  machine_->reset();
  // A fresh host-side trace epoch; the on-chip buffer keeps its contents.
  debug_ = std::make_unique<DebugSystem>(*machine_, config_.debug);
  phase_ = Phase::kIdle;
}

nlohmann::json Session::control(const nlohmann::json& command) {
  if (!command.is_object() || !command.contains("cmd") || !command["cmd"].is_string()) {
    throw RequestError("expected an object with a string 'cmd'");
  }
  const std::string cmd = command["cmd"].get<std::string>();
  try {
    if (cmd == "run") {
      std::uint64_t n = command.contains("cycles")
                            ? arg_uint(command, "cycles", ~std::uint64_t{0})
                            : config_.max_cycles;
      run(n);
    } else if (cmd == "halt") {
      halt();
    } else if (cmd == "resume") {
      resume();
    } else if (cmd == "step") {
      step(command.contains("cycles") ? arg_uint(command, "cycles", ~std::uint64_t{0}) : 1);
    } else if (cmd == "set_pin") {
      if (!command.contains("pin")) throw RequestError("set_pin needs 'pin'");
      set_pin(static_cast<int>(arg_uint(command, "pin", kExternalPins - 1)),
              arg_bool(command, "level", true));
    } else if (cmd == "swbreak") {
      if (!command.contains("addr")) throw RequestError("swbreak needs 'addr'");
      swbreak(static_cast<std::uint32_t>(arg_uint(command, "addr", 0xFFFFFFFFu)),
              arg_bool(command, "on", true));
    } else if (cmd == "reset") {
      reset();
    } else {
      throw RequestError("unknown command '" + cmd + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw RequestError(e.what());
  }
  return state_json();
}

nlohmann::json Session::state_json() const {
  nlohmann::json j;
  j["phase"] = std::string(phase_name(phase_));
  j["cycle"] = machine_->cycle();
  j["cores"] = nlohmann::json::array();
  for (const auto& c : machine_->cores()) {
    j["cores"].push_back({{"id", c.id},
                          {"mode", std::string(mode_name(c.mode))},
                          {"pc", c.pc},
                          {"fault", c.fault},
                          {"regs", c.regs}});
  }
  const auto& dma = machine_->dma();
  j["dma"] = {{"active", dma.desc.active},
              {"suspended", dma.suspended},
              {"remaining", dma.desc.words},
              {"fault", dma.fault}};
  const EmuMemory& emu = machine_->emu();
  j["trace"] = {{"messages", debug_->trace().size()},
                {"bytes", debug_->trace_bytes()},
                {"dropped_frames", debug_->dropped_frames()}};
  if (emu.trace_active()) {
    j["trace"]["buffer"] = {{"capacity", emu.trace_capacity()},
                            {"size", emu.trace_size()},
                            {"wrapped", emu.trace_wrapped()},
                            {"mode", emu.trace_mode() == TraceMode::kCircular ? "CIRCULAR"
                                                                             : "FILL_ONCE"}};
  }
  j["cal_page"] = emu.cal_page();
  j["pins"] = {debug_->pin(0), debug_->pin(1)};
  std::size_t pulses = 0, warnings = 0;
  for (const auto& e : debug_->host_events()) {
    (e.kind == HostEvent::Kind::kPinPulse ? pulses : warnings) += 1;
  }
  j["pin_pulses"] = pulses;
  j["warnings"] = warnings;
  j["swbreaks"] = swbreaks_.size();
  j["daq_frames"] = daq_frames_.size();
  j["xcp_connected"] = xcp_->connected();
  j["clients"] = clients_;
  j["max_cycles"] = config_.max_cycles;
  return j;
}

xcp::Roundtrip Session::xcp_request(const xcp::Frame& request) { return jtag_->roundtrip(request); }

xcp::Frame Session::xcp_checked(std::vector<std::uint8_t> payload) {
  if (!xcp_->connected()) {
    auto r = jtag_->roundtrip(xcp::Frame{xcp_ctr_++, {xcp::kConnect}});
    if (r.response.payload.empty() || r.response.payload[0] != xcp::kPositive) {
      throw RequestError("XCP CONNECT refused");
    }
  }
  auto r = jtag_->roundtrip(xcp::Frame{xcp_ctr_++, std::move(payload)});
  const auto& p = r.response.payload;
  if (p.empty() || p[0] != xcp::kPositive) {
    std::ostringstream os;
    os << "XCP error 0x" << std::hex << (p.size() > 1 ? int{p[1]} : 0);
    if (p.size() > 1 && p[1] == xcp::kErrOutOfRange) os << " (out of range)";
    if (p.size() > 1 && p[1] == xcp::kErrMalformed) os << " (malformed request)";
    throw RequestError(os.str());
  }
  return r.response;
}

std::chrono::nanoseconds Session::calibrate(std::uint32_t addr,
                                            std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw RequestError("calibration write needs at least one byte");
  const auto before = jtag_->total_elapsed();
  constexpr std::size_t kChunk = 0xFFFF - 5;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const std::uint32_t a = addr + static_cast<std::uint32_t>(off);
    std::vector<std::uint8_t> req{xcp::kDownload, static_cast<std::uint8_t>(a),
                                  static_cast<std::uint8_t>(a >> 8),
                                  static_cast<std::uint8_t>(a >> 16),
                                  static_cast<std::uint8_t>(a >> 24)};
    auto part = bytes.subspan(off, std::min(kChunk, bytes.size() - off));
    req.insert(req.end(), part.begin(), part.end());
    xcp_checked(std::move(req));
  }
  return jtag_->total_elapsed() - before;
}

std::chrono::nanoseconds Session::set_cal_page(int page) {
  if (page != 0 && page != 1) throw RequestError("page must be 0 or 1");
  const auto before = jtag_->total_elapsed();
  xcp_checked({xcp::kSetCalPage, static_cast<std::uint8_t>(page)});
  return jtag_->total_elapsed() - before;
}

std::vector<std::uint8_t> Session::upload(std::uint32_t addr, std::uint8_t len) {
  auto resp = xcp_checked({xcp::kShortUpload, static_cast<std::uint8_t>(addr),
                           static_cast<std::uint8_t>(addr >> 8),
                           static_cast<std::uint8_t>(addr >> 16),
                           static_cast<std::uint8_t>(addr >> 24), len});
  return {resp.payload.begin() + 1, resp.payload.end()};
}

std::vector<std::uint8_t> Session::export_mtrc() const {
  std::vector<std::uint8_t> out{'M', 'C', 'D', 'S', kMtrcVersion};
  auto frames = debug_->export_frames();
  out.insert(out.end(), frames.begin(), frames.end());
  return out;
}

std::string Session::export_jsonl() const {
  auto merged = reconstruct(debug_->export_frames(), config_.debug.timestamps);
  return to_jsonl(merged);
}

void Session::export_trace(const std::string& path, TraceFormat format) const {
  if (format == TraceFormat::kMtrc) {
    write_file(path, export_mtrc());
  } else {
    std::string text = export_jsonl();
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
}

}  // namespace mcds
