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

#include "mcds/machine.hpp"

#include <sstream>

#include "mcds/error.hpp"

namespace mcds {

Machine::Machine(MachineConfig config)
    : config_(config),
      flash_(config.flash_size, 0),
      ram_(config.ram_size, 0),
      emu_(config.emu_size, config.flash_latency),
      entry_(config.num_cores, 0) {
  if (config.num_cores < 1 || config.num_cores > 8) {
    throw Error("core count must be between 1 and 8");
  }
  if (config.flash_latency < 1 || config.ram_latency < 1 || config.emu_latency < 1) {
    throw Error("memory latencies must be at least one cycle");
  }
  if (config.flash_size > kRamBase || config.ram_size > kEmuControlBase - kRamBase) {
    throw Error("memory region sizes overlap the address map");
  }
  reset();
}

void Machine::reset() {
  cores_.assign(config_.num_cores, CoreState{});
  for (int i = 0; i < config_.num_cores; ++i) {
    cores_[i].id = i;
    cores_[i].pc = entry_[i];
  }
  std::fill(ram_.begin(), ram_.end(), 0);
  dma_ = DmaState{};
  dma_.desc = dma_init_;
  cycle_ = 0;
  bus_grant_ = 0;
}

void Machine::load(const ProgramImage& image) {
  debug_write(image.base_address, image.bytes);
}

void Machine::set_entry(int core, std::uint32_t pc) {
  if (pc % 4 != 0) throw Error("entry point not word aligned");
  entry_.at(core) = pc;
  if (cycle_ == 0) cores_.at(core).pc = pc;
}

void Machine::set_dma(const DmaDescriptor& desc) {
  dma_init_ = desc;
  dma_.desc = desc;
  dma_.in_flight = false;
  dma_.stall_cycles = 0;
  dma_.fault = false;
}

std::optional<Machine::Route> Machine::route(std::uint32_t addr, std::uint32_t size,
                                             bool core_port) const {
  auto within = [&](std::uint32_t base, std::uint32_t len) {
    return addr >= base && addr - base < len && len - (addr - base) >= size;
  };
  if (within(kFlashBase, config_.flash_size)) {
    RoutedAccess t = emu_.translate(addr);
    if (t.target == RoutedAccess::Target::kEmu) {
      return Route{Region::kEmuRaw, t.address, t.latency, !core_port};
    }
    return Route{Region::kFlash, addr - kFlashBase, config_.flash_latency, !core_port};
  }
  if (within(kRamBase, config_.ram_size)) {
    return Route{Region::kRam, addr - kRamBase, config_.ram_latency, true};
  }
  if (within(kEmuControlBase, EmuMemory::kControlWindowSize)) {
    return Route{Region::kEmuControl, addr - kEmuControlBase, config_.emu_latency, true};
  }
  if (within(kEmuRawBase, emu_.size())) {
    return Route{Region::kEmuRaw, addr - kEmuRawBase, config_.emu_latency, true};
  }
  return std::nullopt;
}

std::uint32_t Machine::read32(const Route& r) const {
  auto le = [](const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  };
  switch (r.region) {
    case Region::kFlash: return le(&flash_[r.offset]);
    case Region::kRam: return le(&ram_[r.offset]);
    case Region::kEmuRaw: return le(&emu_.raw()[r.offset]);
    case Region::kEmuControl: return emu_.control_read32(r.offset);
  }
  return 0;
}

void Machine::write32(const Route& r, std::uint32_t value, bool deferred_control) {
  switch (r.region) {
    case Region::kFlash:
      for (int b = 0; b < 4; ++b) flash_[r.offset + b] = static_cast<std::uint8_t>(value >> (8 * b));
      break;
    case Region::kRam:
      for (int b = 0; b < 4; ++b) ram_[r.offset + b] = static_cast<std::uint8_t>(value >> (8 * b));
      break;
    case Region::kEmuRaw:
      for (int b = 0; b < 4; ++b) emu_.write(r.offset + b, static_cast<std::uint8_t>(value >> (8 * b)));
      break;
    case Region::kEmuControl:
      emu_.control_write32(r.offset, value, deferred_control);
      break;
  }
}

std::uint8_t Machine::read_byte(std::uint32_t addr) const {
  auto r = route(addr, 1, true);
  if (!r) throw AccessError("unmapped address");
  switch (r->region) {
    case Region::kFlash: return flash_[r->offset];
    case Region::kRam: return ram_[r->offset];
    case Region::kEmuRaw: return emu_.read(r->offset);
    case Region::kEmuControl: {
      std::uint32_t reg = r->offset & ~3u;
      return static_cast<std::uint8_t>(emu_.control_read32(reg) >> (8 * (r->offset & 3)));
    }
  }
  return 0;
}

void Machine::write_byte(std::uint32_t addr, std::uint8_t value) {
  auto r = route(addr, 1, true);
  if (!r) throw AccessError("unmapped address");
  switch (r->region) {
    case Region::kFlash: flash_[r->offset] = value; break;
    case Region::kRam: ram_[r->offset] = value; break;
    case Region::kEmuRaw: emu_.write(r->offset, value); break;
    case Region::kEmuControl:
      // Byte writes land in the low byte of the addressed register.
      if ((r->offset & 3) == 0) emu_.control_write32(r->offset, value, false);
      break;
  }
}

bool Machine::is_mapped(std::uint32_t addr, std::uint32_t len) const {
  if (len == 0) return false;
  if (static_cast<std::uint64_t>(addr) + len > 0x1'0000'0000ULL) return false;
  // Ranges never straddle two regions, so checking the endpoints suffices.
  return route(addr, 1, true).has_value() && route(addr + len - 1, 1, true).has_value() &&
         route(addr, len, true).has_value();
}

bool Machine::resolves_to_emu(std::uint32_t addr, std::uint32_t* offset) const {
  auto r = route(addr, 1, true);
  if (!r || r->region != Region::kEmuRaw) return false;
  if (offset) *offset = r->offset;
  return true;
}

std::vector<std::uint8_t> Machine::debug_read(std::uint32_t addr, std::uint32_t len) const {
  if (!is_mapped(addr, len)) {
    std::ostringstream os;
    os << "debug read of unmapped range 0x" << std::hex << addr << "+" << std::dec << len;
    throw AccessError(os.str());
  }
  std::vector<std::uint8_t> out(len);
  for (std::uint32_t i = 0; i < len; ++i) out[i] = read_byte(addr + i);
  return out;
}

void Machine::debug_write(std::uint32_t addr, std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) return;
  if (!is_mapped(addr, static_cast<std::uint32_t>(bytes.size()))) {
    std::ostringstream os;
    os << "debug write to unmapped range 0x" << std::hex << addr << "+" << std::dec
       << bytes.size();
    throw AccessError(os.str());
  }
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    write_byte(addr + static_cast<std::uint32_t>(i), bytes[i]);
  }
}

std::uint32_t Machine::debug_read32(std::uint32_t addr) const {
  auto b = debug_read(addr, 4);
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void Machine::debug_write32(std::uint32_t addr, std::uint32_t value) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(value), static_cast<std::uint8_t>(value >> 8),
                       static_cast<std::uint8_t>(value >> 16),
                       static_cast<std::uint8_t>(value >> 24)};
  debug_write(addr, b);
}

std::optional<Instruction> Machine::fetch(const CoreState& core) const {
  if (core.fetch_override) return try_decode(*core.fetch_override);
  auto r = route(core.pc, 4, true);
  if (!r || r->region == Region::kEmuControl) return std::nullopt;
  return try_decode(read32(*r));
}

bool Machine::wants_bus(const CoreState& core) const {
  if (core.mode != CoreMode::kRunning || core.stall_cycles > 0 || core.in_flight ||
      core.break_pending) {
    return false;
  }
  auto insn = fetch(core);
  if (!insn || (insn->opcode != Opcode::kLd && insn->opcode != Opcode::kSt)) return false;
  std::uint32_t addr = core.regs[insn->ra] + static_cast<std::uint32_t>(insn->offset());
  if (addr % 4 != 0) return false;
  auto r = route(addr, 4, true);
  return r && r->needs_bus;
}

void Machine::fault(CoreState& core) {
  core.mode = CoreMode::kDone;
  core.fault = true;
  core.in_flight.reset();
  core.fetch_override.reset();
}

void Machine::execute_core(CoreState& core, bool granted, CycleEvents& ev) {
  if (core.mode != CoreMode::kRunning) return;
  if (core.stall_cycles > 0) {
    --core.stall_cycles;
    return;
  }
  if (core.in_flight) {
    const Instruction& insn = core.in_flight->insn;
    std::uint32_t addr = core.in_flight->addr;
    // Re-resolve so the access observes the page active in this cycle.
    auto r = route(addr, 4, true);
    DataRecord d{core.id, cycle_, addr, 0, 4, AccessKind::kRead};
    if (insn.opcode == Opcode::kLd) {
      d.value = read32(*r);
      if (insn.rd != 0) core.regs[insn.rd] = d.value;
    } else {
      d.value = core.regs[insn.rd];
      d.kind = AccessKind::kWrite;
      write32(*r, d.value, true);
    }
    ev.data.push_back(d);
    ev.retires.push_back(RetireRecord{core.id, cycle_, core.pc, false, 0, false});
    core.pc += 4;
    core.in_flight.reset();
    if (core.break_pending) {
      core.break_pending = false;
      core.mode = CoreMode::kHaltedBreak;
    }
    return;
  }
  if (core.break_pending) {
    core.break_pending = false;
    core.mode = CoreMode::kHaltedBreak;
    return;
  }

  auto fetched = fetch(core);
  if (!fetched) {
    fault(core);
    return;
  }
  const Instruction insn = *fetched;
  auto& regs = core.regs;
  const std::uint32_t pc = core.pc;
  RetireRecord retire{core.id, cycle_, pc, false, 0, false};
  std::uint32_t next = pc + 4;

  switch (insn.opcode) {
    case Opcode::kNop:
      break;
    case Opcode::kLdi:
      if (insn.rd != 0) {
        regs[insn.rd] = insn.ra ? static_cast<std::uint32_t>(insn.imm16) << 16 : insn.imm16;
      }
      break;
    case Opcode::kAdd:
      if (insn.rd != 0) regs[insn.rd] = regs[insn.ra] + regs[insn.rb()];
      break;
    case Opcode::kSub:
      if (insn.rd != 0) regs[insn.rd] = regs[insn.ra] - regs[insn.rb()];
      break;
    case Opcode::kLd:
    case Opcode::kSt: {
      std::uint32_t addr = regs[insn.ra] + static_cast<std::uint32_t>(insn.offset());
      auto r = route(addr, 4, true);
      if (addr % 4 != 0 || !r || (insn.opcode == Opcode::kSt && r->region == Region::kFlash)) {
        fault(core);
        return;
      }
      if (r->needs_bus && !granted) return;  // lost arbitration, retry next cycle
      core.in_flight = CoreState::InFlight{insn, addr};
      core.stall_cycles = r->latency - 1;
      core.fetch_override.reset();
      return;
    }
    case Opcode::kBeq:
    case Opcode::kBne: {
      bool eq = regs[insn.rd] == regs[insn.ra];
      if (eq == (insn.opcode == Opcode::kBeq)) {
        retire.taken = true;
        retire.target = pc + 4 + static_cast<std::uint32_t>(insn.offset());
      }
      break;
    }
    case Opcode::kJmp:
      retire.taken = true;
      retire.target = regs[insn.ra] + insn.imm16;
      break;
    case Opcode::kHalt:
      if (insn.is_break()) {
        core.mode = CoreMode::kHaltedBreak;
        return;
      }
      retire.halt = true;
      break;
  }
  if (retire.taken) {
    if (retire.target % 4 != 0) {
      fault(core);
      return;
    }
    next = retire.target;
  }
  core.fetch_override.reset();
  ev.retires.push_back(retire);
  core.pc = retire.halt ? pc : next;
  if (retire.halt) core.mode = CoreMode::kDone;
}

void Machine::execute_dma(bool granted, CycleEvents& ev) {
  DmaState& dma = dma_;
  if (!dma.desc.active) return;
  const int src_id = dma_source();
  if (dma.in_flight) {
    if (dma.stall_cycles > 0) {
      --dma.stall_cycles;
      return;
    }
    auto rs = route(dma.desc.src, 4, false);
    auto rd = route(dma.desc.dst, 4, false);
    std::uint32_t v = read32(*rs);
    ev.data.push_back(DataRecord{src_id, cycle_, dma.desc.src, v, 4, AccessKind::kRead});
    write32(*rd, v, true);
    ev.data.push_back(DataRecord{src_id, cycle_, dma.desc.dst, v, 4, AccessKind::kWrite});
    dma.desc.src += 4;
    dma.desc.dst += 4;
    dma.in_flight = false;
    if (--dma.desc.words == 0) dma.desc.active = false;
    return;
  }
  if (dma.suspended || !granted) return;
  auto rs = route(dma.desc.src, 4, false);
  auto rd = route(dma.desc.dst, 4, false);
  if (dma.desc.src % 4 || dma.desc.dst % 4 || !rs || !rd || rd->region == Region::kFlash) {
    dma.fault = true;
    dma.desc.active = false;
    return;
  }
  dma.in_flight = true;
  dma.stall_cycles = std::max(rs->latency, rd->latency) - 1;
}

void Machine::tick(CycleEvents& ev) {
  ev.clear();
  ev.cycle = cycle_;

  // Arbitration sees every request before any master executes.
  const int masters = num_masters();
  int winner = -1;
  bool requests[9] = {};
  for (const auto& c : cores_) requests[c.id] = wants_bus(c);
  requests[dma_source()] = dma_.desc.active && !dma_.suspended && !dma_.in_flight &&
                           dma_.desc.words > 0;
  for (int k = 0; k < masters; ++k) {
    int m = (bus_grant_ + k) % masters;
    if (requests[m]) {
      winner = m;
      break;
    }
  }
  if (winner >= 0) {
    ev.grant = BusGrant{winner};
    bus_grant_ = (winner + 1) % masters;
  }

  for (auto& c : cores_) execute_core(c, winner == c.id, ev);
  execute_dma(winner == dma_source(), ev);

  emu_.commit();
  ++cycle_;
}

CycleEvents Machine::tick() {
  CycleEvents ev;
  tick(ev);
  return ev;
}

std::vector<CycleEvents> Machine::step(std::uint64_t n) {
  if (n == 0) throw Error("step count must be at least 1");
  std::vector<CycleEvents> out(n);
  for (auto& ev : out) tick(ev);
  return out;
}

bool Machine::request_break(int core) {
  CoreState& c = cores_.at(core);
  if (c.mode == CoreMode::kDone) return false;
  if (c.mode == CoreMode::kHaltedBreak) return true;
  if (c.in_flight) {
    c.break_pending = true;
  } else {
    c.mode = CoreMode::kHaltedBreak;
    c.stall_cycles = 0;
  }
  return true;
}

void Machine::resume_core(int core, std::optional<std::uint32_t> fetch_override) {
  CoreState& c = cores_.at(core);
  if (c.mode != CoreMode::kHaltedBreak) return;
  c.mode = CoreMode::kRunning;
  c.fetch_override = fetch_override;
}

bool Machine::any_running() const {
  for (const auto& c : cores_) {
    if (c.mode == CoreMode::kRunning) return true;
  }
  return false;
}

}  // namespace mcds
