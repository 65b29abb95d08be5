#include "doctest.h"
#include "mcds/debug_system.hpp"
#include "mcds/error.hpp"
#include "random_program.hpp"

using namespace mcds;
using namespace mcds::testing;

namespace {

bool busy(const Machine& m) { return m.any_running() || m.dma().desc.active; }

Comparator pc_eq(int id, std::uint32_t pc) {
  return Comparator{id, ComparatorKind::kPc, CompareOp::kEq, pc, 0, AccessFilter::kExec,
                    kAnySource};
}

Transition on_hit(int comparator, ActionSet actions) {
  Transition t;
  t.hits_all = 1u << comparator;
  t.actions = actions;
  return t;
}

std::vector<std::uint32_t> retired_pcs(const std::vector<CycleEvents>& evs, int source) {
  std::vector<std::uint32_t> out;
  for (const auto& e : evs) {
    for (const auto& r : e.retires) {
      if (r.source == source) out.push_back(r.pc);
    }
  }
  return out;
}

std::vector<TraceMessage> of_source(const std::vector<TraceMessage>& msgs, int source) {
  std::vector<TraceMessage> out;
  for (const auto& m : msgs) {
    if (m.source == source) out.push_back(m);
  }
  return out;
}

}  // namespace

TEST_CASE("observing with triggers and trace leaves the target's events unchanged") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    auto s = random_scenario(seed);
    auto plain = build_machine(s);
    std::vector<CycleEvents> want;
    while (busy(plain)) want.push_back(plain.tick());

    auto m = build_machine(s);
    DebugConfig cfg;
    cfg.blocks.resize(3);
    for (auto& b : cfg.blocks) {
      b.comparators.push_back(pc_eq(0, s.entries[0] + 8));
      b.fsm.transitions.push_back(on_hit(0, ActionSet{}));
    }
    DebugSystem dbg(m, cfg);
    std::vector<CycleEvents> got;
    while (busy(m)) got.push_back(dbg.tick());
    CHECK(got == want);
  }
}

TEST_CASE("the live trace reconstructs every core's flow and every data access") {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    CAPTURE(seed);
    auto s = random_scenario(seed);
    auto m = build_machine(s);
    DebugSystem dbg(m, DebugConfig{});
    std::vector<CycleEvents> evs;
    while (busy(m)) evs.push_back(dbg.tick());

    auto merged = reconstruct(dbg.export_frames(), TimestampConfig{});
    // Emission order is merge order, and cycles survive the wire.
    std::vector<TraceMessage> live = dbg.trace();
    REQUIRE(merged.size() == live.size());
    for (std::size_t i = 0; i < live.size(); ++i) {
      CHECK(same_on_wire(merged[i], live[i]));
      CHECK(merged[i].cycle == live[i].cycle);
    }
    for (int core = 0; core < 2; ++core) {
      auto flow = decode_program(of_source(merged, core), s.images[core]);
      CHECK(flow.pcs == retired_pcs(evs, core));
    }
    std::vector<DataRecord> want;
    for (const auto& e : evs) want.insert(want.end(), e.data.begin(), e.data.end());
    auto got = decode_data(merged);
    std::stable_sort(want.begin(), want.end(), [](const DataRecord& a, const DataRecord& b) {
      return a.cycle != b.cycle ? a.cycle < b.cycle : a.source < b.source;
    });
    CHECK(got == want);
  }
}

TEST_CASE("cross-trigger break of another core slips at most two instructions") {
  // Core 1 spins; core 0 fires a trigger when it reaches `fire`.
  const char* victim = "top: ADD R1, R1, R2\nLD R3, [R0+data]\nJMP R0, top\ndata: .word 1\n";
  for (int delay = 0; delay < 40; ++delay) {
    CAPTURE(delay);
    std::string trigger_src;
    for (int i = 0; i < delay; ++i) trigger_src += "NOP\n";
    trigger_src += "fire: NOP\nHALT\n";
    MachineConfig mc;
    mc.num_cores = 2;
    Machine m(mc);
    auto img0 = assemble(trigger_src);
    m.load(img0);
    m.load(assemble(victim, 0x1000));
    m.set_entry(1, 0x1000);

    DebugConfig cfg;
    cfg.blocks.resize(3);
    ActionSet brk;
    brk.trigger_out = 1;
    cfg.blocks[0].comparators.push_back(pc_eq(0, img0.symbols.at("fire")));
    cfg.blocks[0].comparators.back().source = 0;
    cfg.blocks[0].fsm.transitions.push_back(on_hit(0, brk));
    cfg.matrix = TriggerMatrix::identity(3);
    cfg.switches.delay = 1;
    cfg.switches.entries.push_back({{Destination::Kind::kCore, 1}, 0x01, SwitchAction::kBreak});
    DebugSystem dbg(m, cfg);

    std::optional<std::uint64_t> fired;
    int after = 0;
    for (int c = 0; c < 200 && m.core(1).mode == CoreMode::kRunning; ++c) {
      const auto& ev = dbg.tick();
      for (const auto& r : ev.retires) {
        if (r.source == 0 && r.pc == img0.symbols.at("fire")) fired = ev.cycle;
        if (r.source == 1 && fired && ev.cycle > *fired) ++after;
      }
    }
    REQUIRE(fired.has_value());
    CHECK(m.core(1).mode == CoreMode::kHaltedBreak);
    CHECK(after <= 2);
  }
}

TEST_CASE("marks, trace windows and pin pulses") {
  auto image = straight_line_program(0, 60);
  Machine m;
  m.load(image);
  DebugConfig cfg;
  cfg.blocks.resize(2);
  auto& b = cfg.blocks[0];
  b.trace_enabled = false;
  b.comparators = {pc_eq(0, 40), pc_eq(1, 80)};
  ActionSet on;
  on.trace_on = true;
  on.mark = true;
  on.trigger_out = 0x02;
  ActionSet off;
  off.trace_off = true;
  b.fsm.transitions = {on_hit(0, on), on_hit(1, off)};
  cfg.matrix = TriggerMatrix::identity(2);
  cfg.switches.delay = 2;
  cfg.switches.entries.push_back({{Destination::Kind::kPin, 0}, 0x02, SwitchAction::kPulseOut});
  DebugSystem dbg(m, cfg);
  while (m.any_running()) dbg.tick();

  int marks = 0;
  for (const auto& msg : dbg.trace()) marks += msg.kind() == MessageKind::kMark;
  CHECK(marks == 1);
  auto flow = decode_program(of_source(dbg.trace(), 0), image, DecodeOptions{false});
  // The window holds pcs 40..76; with the stream not closed by an END the
  // decoder stops at the last message.
  auto closing = dbg.closing_messages();
  REQUIRE(closing.size() >= 1);
  std::vector<TraceMessage> all = of_source(dbg.trace(), 0);
  all.insert(all.end(), closing.begin(), closing.end());
  auto closed = decode_program(all, image);
  REQUIRE(closed.pcs.size() == 10);
  CHECK(closed.pcs.front() == 40u);
  CHECK(closed.pcs.back() == 76u);
  CHECK(flow.pcs.size() <= closed.pcs.size());

  REQUIRE(dbg.host_events().size() == 1);
  CHECK(dbg.host_events()[0].kind == HostEvent::Kind::kPinPulse);
  CHECK(dbg.host_events()[0].cycle == 10 + 2);
}

TEST_CASE("trace lands in the emulation buffer and fill-once drops whole frames") {
  auto s = random_scenario(4);
  auto m = build_machine(s);
  m.emu().set_segment_role(7, SegmentRole::kTrace);
  m.emu().set_trace_mode(TraceMode::kFillOnce);
  m.emu().set_trace_active(true);
  DebugSystem dbg(m, DebugConfig{});
  while (busy(m)) dbg.tick();
  CHECK(dbg.dropped_frames() == 0);
  CHECK(m.emu().trace_size() == dbg.trace_bytes());
  auto frames = dbg.export_frames();
  auto strict = deserialize(frames);
  CHECK(strict.size() >= dbg.trace().size());

  // A buffer too small for the run keeps a clean prefix of whole frames.
  // A data-heavy loop overruns one segment.
  Machine m3;
  m3.load(assemble("LDI R13, 6000\nLDI R14, 1\nLDI R15, 0x20000000\n"
                   "top: LD R1, [R15+0]\nST R1, [R15+4]\nSUB R13, R13, R14\n"
                   "BNE R13, R0, top\nHALT\n"));
  m3.emu().set_segment_role(0, SegmentRole::kTrace);
  m3.emu().set_trace_mode(TraceMode::kFillOnce);
  m3.emu().set_trace_active(true);
  DebugSystem dbg3(m3, DebugConfig{});
  while (m3.any_running()) dbg3.tick();
  REQUIRE(dbg3.trace_bytes() > EmuMemory::kSegmentSize);
  CHECK(dbg3.dropped_frames() > 0);
  auto kept = m3.emu().trace_read_all();
  CHECK(kept.size() <= EmuMemory::kSegmentSize);
  auto prefix = deserialize(kept);
  REQUIRE(!prefix.empty());
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    CAPTURE(i);
    CAPTURE(prefix.size());
    CHECK(same_on_wire(prefix[i], dbg3.trace()[i]));
  }
}

TEST_CASE("host halt stops every master at once and resume continues") {
  auto s = random_scenario(12);
  auto m = build_machine(s);
  DebugSystem dbg(m, DebugConfig{});
  for (int i = 0; i < 20; ++i) dbg.tick();
  dbg.halt_all();
  for (int i = 0; i < 5; ++i) dbg.tick();  // in-flight accesses may complete
  const auto frozen = dbg.tick();
  CHECK(frozen.retires.empty());
  CHECK(frozen.data.empty());
  for (const auto& c : m.cores()) CHECK(c.mode != CoreMode::kRunning);
  dbg.resume_all();
  while (busy(m)) dbg.tick();
  for (const auto& c : m.cores()) CHECK(c.mode == CoreMode::kDone);
}

TEST_CASE("configuration checks") {
  Machine m;
  DebugConfig cfg;
  cfg.blocks.resize(3);
  CHECK_THROWS_AS(DebugSystem(m, cfg), Error);
  cfg.blocks.resize(1);
  cfg.matrix = TriggerMatrix(5);
  CHECK_THROWS_AS(DebugSystem(m, cfg), Error);
  cfg.matrix = TriggerMatrix();
  cfg.blocks[0].comparators.push_back(Comparator{40});
  CHECK_THROWS_AS(DebugSystem(m, cfg), Error);
}
