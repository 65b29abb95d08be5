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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcds/debug_system.hpp"
#include "mcds/emu_memory.hpp"
#include "mcds/isa.hpp"
#include "mcds/machine.hpp"
#include "mcds/xcp.hpp"

namespace mcds {

struct ImageSpec {
  std::string path;
  // Assembly sources (.s/.asm) are assembled at this base; binaries use it
  // to override the sidecar.
  std::optional<std::uint32_t> base;
  std::optional<int> core;              // core whose entry point this sets
  std::optional<std::uint32_t> entry;   // defaults to the image base
  ProgramImage image;                   // filled in by the loader
};

struct OverlaySpec {
  OverlayRange range;
  // Copy the overlaid flash bytes into both pages before enabling.
  bool fill_from_flash = false;
};

struct TransportSettings {
  std::chrono::nanoseconds jtag_latency = xcp::default_latency(xcp::TransportKind::kJtagLike);
  std::chrono::nanoseconds usb_latency = xcp::default_latency(xcp::TransportKind::kUsbLike);
  std::string usb_host = "127.0.0.1";
  std::optional<std::uint16_t> usb_port;
};

struct SessionConfig {
  MachineConfig machine;
  std::vector<ImageSpec> images;
  std::optional<DmaDescriptor> dma;
  DebugConfig debug;
  std::vector<SegmentRole> segments;  // one per 64 KiB segment
  TraceMode trace_mode = TraceMode::kCircular;
  std::vector<OverlaySpec> overlays;
  int initial_page = 0;
  std::vector<xcp::DaqList> daq;
  TransportSettings transports;
  std::uint64_t max_cycles = 1'000'000;
};

// Validates the whole document at once. Throws ConfigError listing every
// violation, each prefixed with its JSON path (e.g. "emu.ranges[16].id").
// Relative image paths resolve against `base_dir`.
SessionConfig parse_session_config(const nlohmann::json& doc,
                                   const std::filesystem::path& base_dir = {});
SessionConfig load_session_config(const std::filesystem::path& path);

}  // namespace mcds
