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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mcds/emu_memory.hpp"
#include "mcds/isa.hpp"

namespace mcds {

// Flat 32-bit address map.
inline constexpr std::uint32_t kFlashBase = 0x0000'0000;
inline constexpr std::uint32_t kRamBase = 0x2000'0000;
inline constexpr std::uint32_t kEmuControlBase = 0xF000'0000;
inline constexpr std::uint32_t kEmuRawBase = 0xF100'0000;

enum class CoreMode : std::uint8_t { kRunning, kHaltedBreak, kDone };
enum class AccessKind : std::uint8_t { kRead, kWrite };

struct RetireRecord {
  int source = 0;
  std::uint64_t cycle = 0;
  std::uint32_t pc = 0;
  bool taken = false;
  std::uint32_t target = 0;
  // Set for HALT; lets the program trace encoder tell a finished stream from a
  // truncated one.
  bool halt = false;

  friend bool operator==(const RetireRecord&, const RetireRecord&) = default;
};

struct DataRecord {
  int source = 0;
  std::uint64_t cycle = 0;
  std::uint32_t addr = 0;
  std::uint32_t value = 0;
  std::uint8_t size = 4;
  AccessKind kind = AccessKind::kRead;

  friend bool operator==(const DataRecord&, const DataRecord&) = default;
};

struct BusGrant {
  int master = 0;
  friend bool operator==(const BusGrant&, const BusGrant&) = default;
};

struct CycleEvents {
  std::uint64_t cycle = 0;
  std::vector<RetireRecord> retires;
  std::vector<DataRecord> data;
  std::optional<BusGrant> grant;

  void clear() {
    retires.clear();
    data.clear();
    grant.reset();
  }
  friend bool operator==(const CycleEvents&, const CycleEvents&) = default;
};

struct MachineConfig {
  int num_cores = 1;
  std::uint32_t flash_size = 2 * 1024 * 1024;
  std::uint32_t ram_size = 64 * 1024;
  int flash_latency = 2;
  int ram_latency = 1;
  // Raw emulation window and control registers.
  int emu_latency = 1;
  std::uint32_t emu_size = EmuMemory::kDefaultSize;
};

struct DmaDescriptor {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint32_t words = 0;
  bool active = false;
  friend bool operator==(const DmaDescriptor&, const DmaDescriptor&) = default;
};

struct CoreState {
  int id = 0;
  std::array<std::uint32_t, kNumRegisters> regs{};
  std::uint32_t pc = 0;
  CoreMode mode = CoreMode::kRunning;
  int stall_cycles = 0;
  bool fault = false;

  // Memory instruction issued but not yet retired.
  struct InFlight {
    Instruction insn;
    std::uint32_t addr = 0;
  };
  std::optional<InFlight> in_flight;
  bool break_pending = false;
  // Word executed instead of memory contents on the next issue at `pc`; used
  // to step over a patched software breakpoint.
  std::optional<std::uint32_t> fetch_override;
};

struct DmaState {
  DmaDescriptor desc;
  bool suspended = false;
  bool fault = false;
  bool in_flight = false;
  int stall_cycles = 0;
};

// Deterministic multi-core target. Masters are ordered core 0..N-1 then DMA;
// the DMA's source id is N. Instruction fetch and core reads of flash use
// private per-core ports; every other data access goes through one shared
// bus that grants a single new transaction per cycle, round robin.
class Machine {
 public:
  explicit Machine(MachineConfig config = {});

  const MachineConfig& config() const { return config_; }
  int num_cores() const { return config_.num_cores; }
  int dma_source() const { return config_.num_cores; }
  int num_masters() const { return config_.num_cores + 1; }
  std::uint64_t cycle() const { return cycle_; }
  int bus_grant_cursor() const { return bus_grant_; }

  const CoreState& core(int id) const { return cores_.at(id); }
  const std::vector<CoreState>& cores() const { return cores_; }
  const DmaState& dma() const { return dma_; }
  EmuMemory& emu() { return emu_; }
  const EmuMemory& emu() const { return emu_; }

  // Programs memory through the debug port and sets no entry point.
  void load(const ProgramImage& image);
  void set_entry(int core, std::uint32_t pc);
  std::uint32_t entry(int core) const { return entry_.at(core); }
  void set_dma(const DmaDescriptor& desc);

  CycleEvents tick();
  void tick(CycleEvents& out);
  std::vector<CycleEvents> step(std::uint64_t n);

  // Debug port: zero target cycles, never arbitrates. Flash addresses resolve
  // through the overlay exactly as a core read would. Throws AccessError if
  // any byte of the range is unmapped; nothing is accessed in that case.
  std::vector<std::uint8_t> debug_read(std::uint32_t addr, std::uint32_t len) const;
  void debug_write(std::uint32_t addr, std::span<const std::uint8_t> bytes);
  std::uint32_t debug_read32(std::uint32_t addr) const;
  void debug_write32(std::uint32_t addr, std::uint32_t value);
  bool is_mapped(std::uint32_t addr, std::uint32_t len) const;
  // True when `addr` currently resolves into emulation RAM; `offset` receives
  // the emulation RAM offset.
  bool resolves_to_emu(std::uint32_t addr, std::uint32_t* offset = nullptr) const;

  // Cores, RAM, DMA and the cycle counter return to reset state. Flash and
  // the emulation memory (separate power domain) are kept.
  void reset();

  // Run control, applied between ticks. request_break returns false when the
  // core is already DONE.
  bool request_break(int core);
  void resume_core(int core, std::optional<std::uint32_t> fetch_override = {});
  void set_dma_suspended(bool suspended) { dma_.suspended = suspended; }

  bool any_running() const;

 private:
  enum class Region : std::uint8_t { kFlash, kRam, kEmuRaw, kEmuControl };
  struct Route {
    Region region;
    std::uint32_t offset;
    int latency;
    bool needs_bus;
  };

  std::optional<Route> route(std::uint32_t addr, std::uint32_t size, bool core_port) const;
  std::uint32_t read32(const Route& r) const;
  void write32(const Route& r, std::uint32_t value, bool deferred_control);
  std::uint8_t read_byte(std::uint32_t addr) const;
  void write_byte(std::uint32_t addr, std::uint8_t value);

  std::optional<Instruction> fetch(const CoreState& core) const;
  bool wants_bus(const CoreState& core) const;
  void execute_core(CoreState& core, bool granted, CycleEvents& ev);
  void execute_dma(bool granted, CycleEvents& ev);
  void fault(CoreState& core);

  MachineConfig config_;
  std::vector<std::uint8_t> flash_;
  std::vector<std::uint8_t> ram_;
  EmuMemory emu_;
  std::vector<CoreState> cores_;
  std::vector<std::uint32_t> entry_;
  DmaState dma_;
  DmaDescriptor dma_init_;
  std::uint64_t cycle_ = 0;
  int bus_grant_ = 0;
};

}  // namespace mcds
