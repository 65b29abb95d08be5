// Acceptance suite: one line per criterion, nonzero exit if any fails.
//
// Every check compares the system against something it did not compute
// itself: a debug-free machine, the independent reference model, the raw
// CycleEvents, or a checked-in golden file.
#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <random>
#include <sstream>
#include <string>

#include "mcds/codec.hpp"
#include "mcds/debug_system.hpp"
#include "mcds/emu_memory.hpp"
#include "mcds/error.hpp"
#include "mcds/session.hpp"
#include "mcds/xcp.hpp"
#include "random_program.hpp"
#include "reference_model.hpp"

using namespace mcds;
using namespace mcds::testing;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failures of a criterion.
class Verdict {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " failure(s): " + notes_};
  }

 private:
  int failures_ = 0;
  std::string notes_;
};

bool busy(const Machine& m) { return m.any_running() || m.dma().desc.active; }

std::vector<CycleEvents> run_plain(const Scenario& s) {
  Machine m = build_machine(s);
  std::vector<CycleEvents> out;
  while (busy(m)) out.push_back(m.tick());
  return out;
}

bool wire_equal(const std::vector<TraceMessage>& a, const std::vector<TraceMessage>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), same_on_wire);
}

std::vector<TraceMessage> of_source(std::span<const TraceMessage> msgs, int source) {
  std::vector<TraceMessage> out;
  for (const auto& m : msgs) {
    if (m.source == source) out.push_back(m);
  }
  return out;
}

int count_kind(std::span<const TraceMessage> msgs, MessageKind kind) {
  return static_cast<int>(std::count_if(msgs.begin(), msgs.end(),
                                        [&](const TraceMessage& m) { return m.kind() == kind; }));
}

Comparator comparator(int id, ComparatorKind kind, CompareOp op, std::uint32_t lo,
                      std::uint32_t hi, AccessFilter access, int source) {
  return Comparator{id, kind, op, lo, hi, access, source};
}

// Every block gets one comparator of each kind, two counters and a
// three-state FSM that toggles trace and raises trigger lines. No switch
// entry breaks or suspends anybody.
DebugConfig full_debug(int blocks) {
  DebugConfig cfg;
  cfg.blocks.resize(static_cast<std::size_t>(blocks));
  for (int b = 0; b < blocks; ++b) {
    auto& blk = cfg.blocks[static_cast<std::size_t>(b)];
    blk.comparators = {
        comparator(0, ComparatorKind::kPc, CompareOp::kInRange, 0, 0x40, AccessFilter::kExec, b),
        comparator(1, ComparatorKind::kDataAddr, CompareOp::kInRange, kRamBase, kRamBase + 0x800,
                   AccessFilter::kAny, kAnySource),
        comparator(2, ComparatorKind::kDataValue, CompareOp::kNeq, 0, 0, AccessFilter::kWrite, b),
        comparator(3, ComparatorKind::kBusMaster, CompareOp::kEq,
                   static_cast<std::uint32_t>(blocks - 1), 0, AccessFilter::kAny, kAnySource)};
    auto& fsm = blk.fsm;
    fsm.num_states = 3;
    fsm.counters = {CounterSpec{3, 1}, CounterSpec{5, 3}};
    Transition arm;
    arm.from_state = 0;
    arm.hits_all = 1u << 0;
    arm.next_state = 1;
    arm.actions.mark = true;
    arm.actions.trigger_out = static_cast<std::uint8_t>(1u << b);
    arm.counter_ops[0] = CounterOp::kInc;
    Transition fire;
    fire.from_state = 1;
    fire.elapsed_all = 0x1;
    fire.next_state = 2;
    fire.actions.trace_off = true;
    fire.actions.trigger_out = 0x80;
    fire.counter_ops[0] = CounterOp::kClear;
    Transition rearm;
    rearm.from_state = 2;
    rearm.hits_all = 1u << 2;
    rearm.hits_none = 1u << 3;
    rearm.next_state = 0;
    rearm.actions.trace_on = true;
    fsm.transitions = {arm, fire, rearm};
  }
  cfg.matrix = TriggerMatrix::identity(blocks);
  cfg.switches.delay = 1;
  cfg.switches.entries.push_back({{Destination::Kind::kPin, 0}, 0xFF, SwitchAction::kPulseOut});
  cfg.switches.entries.push_back({{Destination::Kind::kCore, 0}, 0xFF, SwitchAction::kNone});
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome transparency() {
  Verdict v;
  std::size_t total_cycles = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = random_scenario(seed, 2, true);
    const auto want = run_plain(s);
    v.expect(want.size() <= 5000, "seed " + std::to_string(seed) + " exceeds 5k cycles");
    v.expect(want == reference_run(s, 5000), "seed " + std::to_string(seed) + " machine vs reference");

    Machine m = build_machine(s);
    m.emu().set_segment_role(7, SegmentRole::kTrace);
    m.emu().set_trace_active(true);
    DebugSystem dbg(m, full_debug(3));
    xcp::Server daq(m, {xcp::DaqList{0, {{kRamBase, 8}, {kRamBase + 0x400, 4}}, 7, true}});
    daq.serve(xcp::Frame{0, {xcp::kConnect}});
    std::vector<CycleEvents> got;
    while (busy(m) && got.size() < want.size() + 10) {
      got.push_back(dbg.tick());
      daq.daq_tick(got.back().cycle);
      // Host polling between cycles through the debug port.
      daq.serve(xcp::Frame{1, {xcp::kShortUpload, 0x00, 0x00, 0x00, 0x20, 4}});
    }
    v.expect(got == want, "seed " + std::to_string(seed) + " events differ with debug attached");
    v.expect(!dbg.trace().empty() && daq.daq_frames() > 0,
             "seed " + std::to_string(seed) + " debug produced no output");
    total_cycles += want.size();
  }
  return v.done("20 seeds, " + std::to_string(total_cycles) + " cycles identical");
}

Outcome codec_roundtrip() {
  Verdict v;
  std::size_t retires = 0;
  std::size_t accesses = 0;
  std::size_t max_retires = 0;
  for (std::uint64_t seed = 1000; seed < 2000; ++seed) {
    const int statements = 20 + static_cast<int>(seed % 120);
    const auto s = random_scenario(seed, 2, true, statements);
    std::map<int, std::vector<RetireRecord>> by_core;
    std::map<int, std::vector<DataRecord>> by_source;
    for (const auto& ev : run_plain(s)) {
      for (const auto& r : ev.retires) by_core[r.source].push_back(r);
      for (const auto& d : ev.data) by_source[d.source].push_back(d);
    }
    const std::uint32_t every = 2 + static_cast<std::uint32_t>(seed % 63);
    for (const auto& [core, rs] : by_core) {
      max_retires = std::max(max_retires, rs.size());
      retires += rs.size();
      auto msgs = encode_program(rs, every);
      auto back = deserialize(serialize(msgs));
      v.expect(wire_equal(back, msgs), "seed " + std::to_string(seed) + " program frames");
      std::vector<std::uint32_t> pcs;
      for (const auto& r : rs) pcs.push_back(r.pc);
      try {
        auto flow = decode_program(back, s.images[static_cast<std::size_t>(core)]);
        v.expect(flow.pcs == pcs && flow.gaps.empty(),
                 "seed " + std::to_string(seed) + " core " + std::to_string(core) + " flow");
      } catch (const DecodeError& e) {
        v.expect(false, "seed " + std::to_string(seed) + ": " + e.what());
      }
    }
    for (const auto& [src, ds] : by_source) {
      accesses += ds.size();
      auto msgs = encode_data(ds, every);
      auto back = deserialize(serialize(msgs));
      v.expect(wire_equal(back, msgs), "seed " + std::to_string(seed) + " data frames");
      // Cycles are not on the wire; restore them from the originals.
      for (std::size_t i = 0; i < back.size() && i < ds.size(); ++i) back[i].cycle = ds[i].cycle;
      v.expect(decode_data(back) == ds, "seed " + std::to_string(seed) + " data records");
    }
  }
  v.expect(max_retires <= 10'000, "a program exceeded 10k retires");
  return v.done("1000 programs, " + std::to_string(retires) + " retires, " +
                std::to_string(accesses) + " accesses, max " + std::to_string(max_retires) +
                " retires/core");
}

Outcome temporal_order() {
  Verdict v;
  std::size_t checked = 0;
  for (std::uint64_t seed = 300; seed < 400; ++seed) {
    const auto s = random_scenario(seed, 2, true, 30 + static_cast<int>(seed % 50));
    const auto truth = run_plain(s);
    Machine m = build_machine(s);
    DebugConfig cfg;
    // Narrow counters on odd seeds so the ts field wraps many times.
    cfg.timestamps = seed % 2 ? TimestampConfig::with_width(8) : TimestampConfig{};
    DebugSystem dbg(m, cfg);
    while (busy(m)) dbg.tick();
    auto frames = dbg.export_frames();
    auto closing = dbg.closing_messages();
    auto tail = serialize(closing);
    frames.insert(frames.end(), tail.begin(), tail.end());
    const auto merged = reconstruct(frames, cfg.timestamps);
    const std::string tag = "seed " + std::to_string(seed);

    std::map<int, std::vector<RetireRecord>> retires;
    std::vector<DataRecord> accesses;
    for (const auto& ev : truth) {
      for (const auto& r : ev.retires) retires[r.source].push_back(r);
      accesses.insert(accesses.end(), ev.data.begin(), ev.data.end());
    }
    std::set<int> sources;
    for (const auto& msg : merged) sources.insert(msg.source);
    v.expect(sources.size() == 3, tag + " expected three sources");

    for (std::size_t i = 1; i < merged.size(); ++i) {
      v.expect(merged[i - 1].cycle <= merged[i].cycle, tag + " merged cycles decrease");
    }

    // True cycle of every data message: the k-th access of a source.
    std::map<int, std::vector<std::uint64_t>> data_truth;
    for (const auto& d : accesses) data_truth[d.source].push_back(d.cycle);
    std::map<int, std::size_t> data_seen;
    // True cycle of every program message, aligned through the decoder.
    std::map<const TraceMessage*, std::uint64_t> prog_truth;
    for (auto& [core, rs] : retires) {
      std::vector<const TraceMessage*> ptrs;
      std::vector<TraceMessage> own;
      for (const auto& msg : merged) {
        if (msg.source == core) {
          ptrs.push_back(&msg);
          own.push_back(msg);
        }
      }
      DecodedFlow flow;
      try {
        // Without the run-on to HALT, each message's pcs_after ends exactly
        // at the retire it describes.
        flow = decode_program(own, s.images[static_cast<std::size_t>(core)], DecodeOptions{false});
      } catch (const DecodeError& e) {
        v.expect(false, tag + ": " + e.what());
        continue;
      }
      std::size_t before = 0;
      for (std::size_t i = 0; i < own.size(); ++i) {
        const auto k = own[i].kind();
        if (k == MessageKind::kBranch) {
          prog_truth[ptrs[i]] = rs.at(flow.pcs_after[i] - 1).cycle;
        } else if (k == MessageKind::kProgSync &&
                   std::get<ProgSync>(own[i].payload).reason != SyncReason::kEnd) {
          prog_truth[ptrs[i]] = rs.at(before).cycle;
        }
        before = flow.pcs_after[i];
      }
    }

    // Along the merged order the true cycles never go backwards, so any two
    // messages from different cycles appear in their real order.
    std::uint64_t last_true = 0;
    for (const auto& msg : merged) {
      std::optional<std::uint64_t> real;
      if (msg.kind() == MessageKind::kData) {
        auto& idx = data_seen[msg.source];
        const auto& list = data_truth[msg.source];
        if (idx < list.size()) real = list[idx++];
      } else if (auto it = prog_truth.find(&msg); it != prog_truth.end()) {
        real = it->second;
      }
      if (!real) continue;
      v.expect(msg.cycle == *real, tag + " source " + std::to_string(msg.source) + " recovered cycle " + std::to_string(msg.cycle) +
                                       " vs true " + std::to_string(*real));
      v.expect(*real >= last_true, tag + " cross-source order violated");
      last_true = std::max(last_true, *real);
      ++checked;
    }
    for (const auto& [src, list] : data_truth) {
      v.expect(data_seen[src] == list.size(), tag + " data messages missing");
    }
  }
  return v.done("100 runs, " + std::to_string(checked) + " messages checked against true cycles");
}

Outcome slippage() {
  Verdict v;
  // The victim mixes single-cycle ALU work, flash loads and RAM stores so a
  // break request can land while an access is in flight.
  const char* victim =
      "LDI R15, 0x20000000\nLDI R14, 1\n"
      "top: ADD R1, R1, R14\nLD R3, [R0+data]\nST R1, [R15+0]\nJMP R0, top\n"
      "data: .word 7\n";
  int worst = 0;
  for (int offset = 0; offset < 100; ++offset) {
    std::string trigger;
    for (int i = 0; i < offset; ++i) trigger += i % 3 == 2 ? "LD R2, [R0+0]\n" : "NOP\n";
    trigger += "fire: NOP\nHALT\n";
    MachineConfig mc;
    mc.num_cores = 2;
    Machine m(mc);
    const auto img = assemble(trigger);
    const std::uint32_t fire = img.symbols.at("fire");
    m.load(img);
    m.load(assemble(victim, 0x1000));
    m.set_entry(1, 0x1000);

    DebugConfig cfg;
    cfg.blocks.resize(3);
    cfg.blocks[0].comparators.push_back(
        comparator(0, ComparatorKind::kPc, CompareOp::kEq, fire, 0, AccessFilter::kExec, 0));
    Transition t;
    t.hits_all = 1;
    t.actions.trigger_out = 0x01;
    cfg.blocks[0].fsm.transitions.push_back(t);
    cfg.matrix = TriggerMatrix::identity(3);
    cfg.switches.delay = 1;
    cfg.switches.entries.push_back({{Destination::Kind::kCore, 1}, 0x01, SwitchAction::kBreak});
    DebugSystem dbg(m, cfg);

    std::optional<std::uint64_t> fired;
    int after = 0;
    for (int c = 0; c < 2000 && m.core(1).mode == CoreMode::kRunning; ++c) {
      const auto& ev = dbg.tick();
      for (const auto& r : ev.retires) {
        if (r.source == 0 && r.pc == fire) fired = ev.cycle;
      }
      if (fired && ev.cycle > *fired) {
        for (const auto& r : ev.retires) after += r.source == 1;
      }
    }
    const std::string tag = "offset " + std::to_string(offset);
    v.expect(fired.has_value(), tag + " trigger never fired");
    v.expect(m.core(1).mode == CoreMode::kHaltedBreak, tag + " victim not halted");
    v.expect(after <= 2, tag + " slipped " + std::to_string(after));
    worst = std::max(worst, after);
  }
  return v.done("100 offsets, worst slippage " + std::to_string(worst) + " instruction(s)");
}

Outcome overlay_constants() {
  Verdict v;
  EmuMemory emu;
  v.expect(emu.size() == 512 * 1024 && emu.segment_count() == 8, "512 KiB is not 8 segments");

  emu.set_segment_role(0, SegmentRole::kOverlay);
  emu.set_segment_role(1, SegmentRole::kOverlay);
  int accepted = 0;
  for (int id = 0; id < 16; ++id) {
    OverlayRange r{id, 0x10000u + 0x1000u * id, 1024, 2048u * id, 2048u * id + 1024, true};
    try {
      emu.define_overlay_range(r);
      ++accepted;
    } catch (const Error&) {
    }
  }
  v.expect(accepted == 16, "only " + std::to_string(accepted) + " of 16 ranges accepted");
  bool seventeenth = false;
  try {
    emu.define_overlay_range(OverlayRange{16, 0x30000, 1024, 0x8000, 0x8400, true});
    seventeenth = true;
  } catch (const Error&) {
  }
  v.expect(!seventeenth, "17th range accepted");

  int size_errors = 0;
  for (std::uint32_t size = 0; size <= 64 * 1024; size += 256) {
    EmuMemory e;
    e.set_segment_role(0, SegmentRole::kOverlay);
    bool ok = true;
    try {
      e.define_overlay_range(OverlayRange{0, 0, size, 0, 32 * 1024, false});
    } catch (const Error&) {
      ok = false;
    }
    const bool legal = size >= 1024 && size <= 32 * 1024 && (size & (size - 1)) == 0;
    size_errors += ok != legal;
  }
  v.expect(size_errors == 0, std::to_string(size_errors) + " sizes judged wrongly");

  // Overlay-resident code and data run cycle for cycle like the flash copy.
  std::size_t cycles = 0;
  for (std::uint64_t seed = 500; seed < 520; ++seed) {
    const auto s = random_scenario(seed, 2, true);
    const auto flash_run = run_plain(s);
    Machine m = build_machine(s);
    EmuMemory& e = m.emu();
    e.set_segment_role(0, SegmentRole::kOverlay);
    for (int core = 0; core < 2; ++core) {
      const std::uint32_t base = s.entries[static_cast<std::size_t>(core)];
      const std::uint32_t page0 = 0x4000u * static_cast<std::uint32_t>(core);
      auto bytes = m.debug_read(base, 0x1000);
      for (std::uint32_t k = 0; k < bytes.size(); ++k) e.write(page0 + k, bytes[k]);
      e.define_overlay_range(OverlayRange{core, base, 0x1000, page0, page0 + 0x2000, true});
    }
    std::vector<CycleEvents> overlay_run;
    while (busy(m)) overlay_run.push_back(m.tick());
    v.expect(overlay_run == flash_run, "seed " + std::to_string(seed) + " overlay timing differs");
    cycles += flash_run.size();
  }
  return v.done("8 segments, 16/17 ranges, sizes checked, 20 overlay runs (" +
                std::to_string(cycles) + " cycles) match flash");
}

// Two cores read the two halves of a calibration tuple in the same cycle,
// forever. A page swap is mixed if any cycle sees one half from each page.
struct TupleRig {
  static constexpr std::uint32_t kTuple = 0x800;
  Machine m{MachineConfig{2}};
  xcp::Server xcp{m};

  TupleRig() {
    m.load(assemble("top: LD R1, [R0+0x800]\nJMP R0, top\n"));
    m.load(assemble("top: LD R1, [R0+0x804]\nJMP R0, top\n", 0x100));
    m.set_entry(1, 0x100);
    EmuMemory& e = m.emu();
    e.set_segment_role(0, SegmentRole::kOverlay);
    e.define_overlay_range(OverlayRange{0, kTuple, 1024, 0, 1024, true});
    m.debug_write32(kEmuRawBase + 0, 0x1111);
    m.debug_write32(kEmuRawBase + 4, 0x1111);
    m.debug_write32(kEmuRawBase + 1024, 0x2222);
    m.debug_write32(kEmuRawBase + 1028, 0x2222);
    xcp.serve(xcp::Frame{0, {xcp::kConnect}});
  }

  // Returns (mixed, page0 pairs, page1 pairs) after `cycles`, calling
  // `host(cycle)` between ticks.
  std::array<int, 3> run(int cycles, const std::function<void(int)>& host) {
    std::array<int, 3> seen{};
    for (int c = 0; c < cycles; ++c) {
      const auto& ev = m.tick();
      std::optional<std::uint32_t> a, b;
      for (const auto& d : ev.data) {
        if (d.addr == kTuple) a = d.value;
        if (d.addr == kTuple + 4) b = d.value;
      }
      if (a && b) {
        if (*a != *b) ++seen[0];
        else ++seen[*a == 0x1111 ? 1 : 2];
      }
      host(c);
    }
    return seen;
  }
};

Outcome atomic_swap() {
  Verdict v;
  int mixed = 0;
  int runs_with_both = 0;
  for (int offset = 0; offset < 1000; ++offset) {
    TupleRig rig;
    auto seen = rig.run(1000, [&](int c) {
      if (c == offset) {
        auto r = rig.xcp.serve(xcp::Frame{1, {xcp::kSetCalPage, 1}});
        v.expect(r.payload == std::vector<std::uint8_t>{xcp::kPositive}, "SET_CAL_PAGE refused");
      }
    });
    mixed += seen[0];
    runs_with_both += seen[1] > 0 && seen[2] > 0;
  }
  v.expect(mixed == 0, std::to_string(mixed) + " mixed tuples");
  // Interior offsets must observe both pages, or the sweep proved nothing.
  v.expect(runs_with_both >= 990, "only " + std::to_string(runs_with_both) + " runs saw both pages");

  // Control: patching the live page one word per cycle does tear tuples,
  // which shows the detector can see a mix when there is one.
  TupleRig naive;
  auto torn = naive.run(100, [&](int c) {
    if (c == 50) naive.m.debug_write32(kEmuRawBase + 0, 0x2222);
    if (c == 60) naive.m.debug_write32(kEmuRawBase + 4, 0x2222);
  });
  v.expect(torn[0] > 0, "control run shows no torn tuples");
  return v.done("1000 swap offsets, 0 mixed tuples (in-place control: " +
                std::to_string(torn[0]) + " torn)");
}

Outcome latency() {
  Verdict v;
  Machine m;
  xcp::Server s(m);
  xcp::Handler h = [&](const xcp::Frame& f) { return s.serve(f); };
  xcp::InProcessTransport jtag(h, xcp::TransportKind::kJtagLike);
  xcp::InProcessTransport usb(h, xcp::TransportKind::kUsbLike);
  const auto a = jtag.roundtrip(xcp::Frame{1, {xcp::kConnect}}).elapsed;
  const auto b = usb.roundtrip(xcp::Frame{2, {xcp::kGetCalPage}}).elapsed;
  v.expect(a == std::chrono::microseconds(4), "JTAG-like round trip is not 4 us");
  v.expect(b == std::chrono::milliseconds(6), "USB-like round trip is not 6 ms");
  v.expect(b.count() == 1500 * a.count(), "ratio is not 1500");
  std::ostringstream os;
  os << "JTAG-like " << a.count() << " ns, USB-like " << b.count() << " ns, ratio "
     << b.count() / a.count();
  return v.done(os.str());
}

Outcome persistence() {
  Verdict v;
  json doc{{"machine", {{"cores", 1}}},
           {"images", json::array({{{"path", "loop10.s"}, {"core", 0}}})},
           {"emu",
            {{"segments", {{"0", "OVERLAY"}, {"3", "TRACE"}}},
             {"ranges", json::array({{{"flash_base", 0},
                                      {"size", 1024},
                                      {"page0", 0},
                                      {"page1", 1024},
                                      {"fill_from_flash", true}}})}}}};
  Session s(parse_session_config(doc, MCDS_CONFIG_DIR));
  s.run(10'000);
  // Calibrate a value on the inactive page so page 1 differs from flash.
  std::vector<std::uint8_t> cal{0xDE, 0xAD, 0xBE, 0xEF};
  s.calibrate(kEmuRawBase + 1024 + 0x100, cal);
  const std::vector<std::uint8_t> before(s.machine().emu().raw().begin(),
                                         s.machine().emu().raw().end());
  const auto trace_before = s.machine().emu().trace_read_all();
  s.machine().debug_write32(kRamBase, 0x12345678);
  v.expect(!trace_before.empty(), "trace buffer empty before reset");

  s.reset();
  const std::vector<std::uint8_t> after(s.machine().emu().raw().begin(),
                                        s.machine().emu().raw().end());
  v.expect(after == before, "emulation RAM changed across reset");
  v.expect(s.machine().emu().trace_read_all() == trace_before, "trace buffer changed");
  v.expect(s.upload(0x100, 4) != cal && s.upload(kEmuRawBase + 1024 + 0x100, 4) == cal,
           "overlay pages changed");
  v.expect(s.machine().debug_read32(kRamBase) == 0, "system RAM survived reset");
  // The preserved trace still decodes against the program.
  auto flow = decode_program(deserialize(trace_before),
                             assemble(std::string(
                                 [] {
                                   auto b = read_file(MCDS_CONFIG_DIR "/loop10.s");
                                   return std::string(b.begin(), b.end());
                                 }())));
  v.expect(flow.pcs.size() == 41, "preserved trace does not decode to 41 retires");
  return v.done(std::to_string(before.size()) + " bytes of emulation RAM and " +
                std::to_string(trace_before.size()) + " trace bytes identical after reset");
}

Outcome qualification() {
  Verdict v;
  // Two long RAM loops around a short window that has its own loop with
  // loads, stores and taken branches, padded with single-cycle ADDs.
  auto build = [](int pad) {
    std::string src =
        "LDI R15, 0x20000000\nLDI R14, 1\nLDI R13, 1200\n"
        "a: LD R1, [R15+0]\nADD R1, R1, R14\nST R1, [R15+0]\nSUB R13, R13, R14\n"
        "BNE R13, R0, a\n"
        "window: LDI R12, 5\n"
        "w: LD R3, [R15+8]\nADD R3, R3, R14\nST R3, [R15+8]\nSUB R12, R12, R14\n"
        "BNE R12, R0, w\n";
    for (int i = 0; i < pad; ++i) src += "ADD R2, R2, R14\n";
    src +=
        "after: LDI R13, 1200\n"
        "b: LD R1, [R15+4]\nADD R1, R1, R14\nST R1, [R15+4]\nSUB R13, R13, R14\n"
        "BNE R13, R0, b\n"
        "HALT\n";
    return assemble(src);
  };
  // Cycles from the first window retire to the first retire after it.
  auto window_cycles = [](const ProgramImage& img) {
    Machine probe;
    probe.load(img);
    std::uint64_t s0 = 0;
    while (probe.any_running()) {
      const auto& ev = probe.tick();
      for (const auto& r : ev.retires) {
        if (r.pc == img.symbols.at("window")) s0 = ev.cycle;
        if (r.pc == img.symbols.at("after")) return ev.cycle - s0;
      }
    }
    return std::uint64_t{0};
  };
  const int pad = 100 - static_cast<int>(window_cycles(build(0)));
  v.expect(pad > 0, "window loop alone exceeds 100 cycles");
  const auto img = build(std::max(pad, 0));
  const std::uint32_t w0 = img.symbols.at("window");
  const std::uint32_t w1 = img.symbols.at("after");

  Machine m;
  m.load(img);
  DebugConfig cfg;
  cfg.blocks.resize(2);
  auto& b = cfg.blocks[0];
  b.trace_enabled = false;
  b.comparators = {comparator(0, ComparatorKind::kPc, CompareOp::kEq, w0, 0, AccessFilter::kExec, 0),
                   comparator(1, ComparatorKind::kPc, CompareOp::kEq, w1, 0, AccessFilter::kExec, 0)};
  Transition on;
  on.hits_all = 1;
  on.actions.trace_on = true;
  Transition off;
  off.hits_all = 2;
  off.actions.trace_off = true;
  b.fsm.transitions = {on, off};
  DebugSystem dbg(m, cfg);
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  std::uint64_t cycles = 0;
  std::size_t data_total = 0;
  std::vector<std::uint32_t> window_retires;
  while (m.any_running()) {
    const auto& ev = dbg.tick();
    for (const auto& r : ev.retires) {
      if (r.pc == w0) start = ev.cycle;
      if (r.pc == w1) end = ev.cycle;
      if (start && !end) window_retires.push_back(r.pc);
    }
    data_total += ev.data.size();
    cycles = ev.cycle + 1;
  }
  v.expect(cycles >= 10'000, "run is only " + std::to_string(cycles) + " cycles");
  v.expect(end - start == 100, "window is " + std::to_string(end - start) + " cycles");
  int outside = 0;
  int program = 0;
  for (const auto& msg : dbg.trace()) {
    if (msg.kind() == MessageKind::kTsSync) continue;
    ++program;
    outside += msg.cycle < start || msg.cycle >= end;
  }
  v.expect(outside == 0, std::to_string(outside) + " messages outside the window");
  v.expect(count_kind(dbg.trace(), MessageKind::kData) == 10,
           "expected the window's 10 accesses in the data trace");
  v.expect(count_kind(dbg.trace(), MessageKind::kBranch) == 4,
           "expected the window's 4 taken branches");
  v.expect(data_total > 10, "the loops made no data accesses");
  auto all = of_source(dbg.trace(), 0);
  auto closing = dbg.closing_messages();
  all.insert(all.end(), closing.begin(), closing.end());
  auto flow = decode_program(all, img);
  std::vector<std::uint32_t> want;
  for (const auto& r : window_retires) want.push_back(r);
  v.expect(flow.pcs == want, "decoded window is " + std::to_string(flow.pcs.size()) + " pcs");

  // Straight-line code: one start sync, no branches.
  Machine line;
  line.load(straight_line_program(0, 1000));
  DebugSystem dbg2(line, DebugConfig{});
  std::uint64_t line_cycles = 0;
  while (line.any_running()) line_cycles = dbg2.tick().cycle + 1;
  const auto& t = dbg2.trace();
  const int syncs = count_kind(t, MessageKind::kProgSync);
  const int branches = count_kind(t, MessageKind::kBranch);
  const int ts_syncs = count_kind(t, MessageKind::kTsSync);
  // One anchor, plus one periodic sync per (sync_every - 1) branches.
  const int sync_bound = 1 + branches / static_cast<int>(kDefaultSyncEvery - 1);
  const auto period = TimestampConfig{}.sync_period;
  const int ts_bound = 1 + static_cast<int>(line_cycles / period);
  v.expect(branches == 0, std::to_string(branches) + " BRANCH messages");
  v.expect(syncs >= 1 && syncs <= sync_bound, std::to_string(syncs) + " program syncs");
  v.expect(ts_syncs <= ts_bound, std::to_string(ts_syncs) + " timestamp syncs");
  v.expect(decode_program(t, straight_line_program(0, 1000)).pcs.size() == 1001,
           "straight line does not decode to 1001 retires");
  return v.done("window " + std::to_string(start) + ".." + std::to_string(end - 1) + " of " +
                std::to_string(cycles) + " cycles, " + std::to_string(program) +
                " messages all inside; straight line: " + std::to_string(syncs) + " sync, " +
                std::to_string(branches) + " BRANCH, " + std::to_string(t.size()) +
                " messages total");
}

Outcome replayability() {
  Verdict v;
  const auto golden = read_file(MCDS_TEST_DATA_DIR "/golden/loop10.mtrc");
  auto fresh = [] { return Session::load(MCDS_CONFIG_DIR "/loop10.json"); };
  auto a = fresh();
  a->run(10'000);
  auto b = fresh();
  b->run(10'000);
  const auto first = a->export_mtrc();
  v.expect(first == b->export_mtrc(), "two runs differ");
  v.expect(first == golden, "run differs from the golden file");

  // A scripted session with halts, steps and a pin toggle replays too.
  const json script = json::array({{{"cmd", "run"}, {"cycles", 17}},
                                   {{"cmd", "halt"}},
                                   {{"cmd", "step"}, {"cycles", 3}},
                                   {{"cmd", "set_pin"}, {"pin", 1}, {"level", true}},
                                   {{"cmd", "resume"}},
                                   {{"cmd", "run"}}});
  std::vector<std::uint8_t> scripted[2];
  for (auto& out : scripted) {
    auto s = fresh();
    for (const auto& c : script) s->control(c);
    out = s->export_mtrc();
  }
  v.expect(scripted[0] == scripted[1], "scripted runs differ");
  return v.done(std::to_string(first.size()) + "-byte trace matches golden; scripted replay " +
                std::to_string(scripted[0].size()) + " bytes identical");
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*check)();
  double limit_s;  // 0: no time bound
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "transparency", transparency, 10.0},
      {2, "codec round trip", codec_roundtrip, 60.0},
      {3, "temporal order", temporal_order, 0},
      {4, "slippage", slippage, 0},
      {5, "overlay constants", overlay_constants, 0},
      {6, "atomic swap", atomic_swap, 0},
      {7, "latency constants", latency, 0},
      {8, "persistence", persistence, 0},
      {9, "qualification and compression", qualification, 0},
      {10, "replayability", replayability, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      o.pass = false;
      o.detail += " (over the " + std::to_string(static_cast<int>(c.limit_s)) + " s limit)";
    }
    std::printf("criterion %2d: %s  %s: %s [%.2f s]\n", c.number, o.pass ? "PASS" : "FAIL",
                c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
