#include "reference_model.hpp"

#include <algorithm>

namespace mcds::testing {

ReferenceModel::ReferenceModel(const Scenario& s)
    : cfg_(s.machine), flash_(s.machine.flash_size, 0), ram_(s.machine.ram_size, 0) {
  for (const auto& img : s.images) {
    std::copy(img.bytes.begin(), img.bytes.end(), flash_.begin() + img.base_address);
  }
  cores_.resize(s.machine.num_cores);
  for (std::size_t i = 0; i < cores_.size(); ++i) cores_[i].pc = s.entries.at(i);
  dma_ = s.dma;
}

ReferenceModel::Space ReferenceModel::space(std::uint32_t addr) const {
  if (addr % 4 != 0) return Space::kNone;
  if (addr < flash_.size()) return Space::kFlash;
  if (addr >= kRamBase && addr - kRamBase < ram_.size()) return Space::kRam;
  return Space::kNone;
}

int ReferenceModel::latency(Space s) const {
  return s == Space::kFlash ? cfg_.flash_latency : cfg_.ram_latency;
}

std::uint32_t ReferenceModel::load(std::uint32_t addr) const {
  const std::uint8_t* p = space(addr) == Space::kFlash ? &flash_[addr] : &ram_[addr - kRamBase];
  return p[0] | p[1] << 8 | p[2] << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void ReferenceModel::store(std::uint32_t addr, std::uint32_t value) {
  std::uint8_t* p = &ram_[addr - kRamBase];
  for (int b = 0; b < 4; ++b) p[b] = static_cast<std::uint8_t>(value >> (8 * b));
}

bool ReferenceModel::requests_bus(const Core& c) const {
  if (c.stopped || c.pending) return false;
  auto insn = try_decode(load(c.pc));
  if (!insn || (insn->opcode != Opcode::kLd && insn->opcode != Opcode::kSt)) return false;
  // Flash sits behind the per-core port; only RAM needs the shared bus.
  return space(c.regs[insn->ra] + static_cast<std::uint32_t>(insn->offset())) == Space::kRam;
}

CycleEvents ReferenceModel::tick() {
  CycleEvents ev;
  ev.cycle = cycle_;
  const int masters = static_cast<int>(cores_.size()) + 1;
  const int dma_id = masters - 1;

  std::vector<bool> wants(masters, false);
  for (int i = 0; i < dma_id; ++i) wants[i] = requests_bus(cores_[i]);
  wants[dma_id] = dma_.active && dma_.words > 0 && !dma_done_at_;
  int granted = -1;
  for (int k = 0; k < masters && granted < 0; ++k) {
    if (wants[(cursor_ + k) % masters]) granted = (cursor_ + k) % masters;
  }
  if (granted >= 0) {
    ev.grant = BusGrant{granted};
    cursor_ = (granted + 1) % masters;
  }

  for (int id = 0; id < dma_id; ++id) {
    Core& c = cores_[id];
    if (c.stopped) continue;
    if (c.pending) {
      if (cycle_ < c.pending->done_at) continue;
      const Pending p = *c.pending;
      c.pending.reset();
      DataRecord d{id, cycle_, p.addr, 0, 4, AccessKind::kRead};
      if (p.insn.opcode == Opcode::kLd) {
        d.value = load(p.addr);
        if (p.insn.rd) c.regs[p.insn.rd] = d.value;
      } else {
        d.value = c.regs[p.insn.rd];
        d.kind = AccessKind::kWrite;
        store(p.addr, d.value);
      }
      ev.data.push_back(d);
      ev.retires.push_back({id, cycle_, c.pc, false, 0, false});
      c.pc += 4;
      continue;
    }
    auto insn = try_decode(load(c.pc));
    if (!insn) {
      c.stopped = true;
      continue;
    }
    RetireRecord r{id, cycle_, c.pc, false, 0, false};
    std::uint32_t* regs = c.regs;
    auto set = [&](std::uint32_t v) {
      if (insn->rd) regs[insn->rd] = v;
    };
    switch (insn->opcode) {
      case Opcode::kNop: break;
      case Opcode::kLdi: set(insn->ra ? std::uint32_t{insn->imm16} << 16 : insn->imm16); break;
      case Opcode::kAdd: set(regs[insn->ra] + regs[insn->rb()]); break;
      case Opcode::kSub: set(regs[insn->ra] - regs[insn->rb()]); break;
      case Opcode::kBeq:
      case Opcode::kBne:
        if ((regs[insn->rd] == regs[insn->ra]) == (insn->opcode == Opcode::kBeq)) {
          r.taken = true;
          r.target = c.pc + 4 + static_cast<std::uint32_t>(insn->offset());
        }
        break;
      case Opcode::kJmp:
        r.taken = true;
        r.target = regs[insn->ra] + insn->imm16;
        break;
      case Opcode::kHalt:
        c.stopped = true;
        if (insn->is_break()) continue;
        r.halt = true;
        break;
      case Opcode::kLd:
      case Opcode::kSt: {
        const std::uint32_t addr = regs[insn->ra] + static_cast<std::uint32_t>(insn->offset());
        const Space sp = space(addr);
        if (sp == Space::kNone || (insn->opcode == Opcode::kSt && sp == Space::kFlash)) {
          c.stopped = true;
        } else if (sp == Space::kFlash || granted == id) {
          c.pending = Pending{*insn, addr, cycle_ + static_cast<std::uint64_t>(latency(sp))};
        }
        continue;
      }
    }
    if (r.taken && r.target % 4 != 0) {
      c.stopped = true;
      continue;
    }
    ev.retires.push_back(r);
    if (!r.halt) c.pc = r.taken ? r.target : c.pc + 4;
  }

  if (dma_done_at_ && cycle_ >= *dma_done_at_) {
    const std::uint32_t v = load(dma_.src);
    ev.data.push_back({dma_id, cycle_, dma_.src, v, 4, AccessKind::kRead});
    store(dma_.dst, v);
    ev.data.push_back({dma_id, cycle_, dma_.dst, v, 4, AccessKind::kWrite});
    dma_.src += 4;
    dma_.dst += 4;
    dma_done_at_.reset();
    if (--dma_.words == 0) dma_.active = false;
  } else if (!dma_done_at_ && granted == dma_id) {
    const Space s = space(dma_.src), d = space(dma_.dst);
    if (s == Space::kNone || d != Space::kRam) {
      dma_.active = false;
    } else {
      dma_done_at_ = cycle_ + static_cast<std::uint64_t>(std::max(latency(s), latency(d)));
    }
  }

  ++cycle_;
  return ev;
}

bool ReferenceModel::finished() const {
  for (const auto& c : cores_) {
    if (!c.stopped) return false;
  }
  return !dma_.active;
}

std::vector<CycleEvents> reference_run(const Scenario& scenario, std::uint64_t limit) {
  ReferenceModel model(scenario);
  std::vector<CycleEvents> out;
  while (!model.finished() && model.cycle() < limit) out.push_back(model.tick());
  return out;
}

}  // namespace mcds::testing
