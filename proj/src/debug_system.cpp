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

#include "mcds/debug_system.hpp"

#include <algorithm>

#include "mcds/error.hpp"

namespace mcds {

DebugSystem::DebugSystem(Machine& machine, DebugConfig config)
    : machine_(machine), config_(std::move(config)) {
  const int sources = machine_.num_masters();
  if (static_cast<int>(config_.blocks.size()) > sources) {
    throw Error("more trigger blocks than bus masters");
  }
  config_.blocks.resize(sources);
  config_.timestamps.validate();
  if (config_.matrix.num_blocks() != sources) {
    if (config_.matrix.num_blocks() != 0) throw Error("trigger matrix block count mismatch");
    config_.matrix = TriggerMatrix(sources);
  }
  xtu_ = CrossTriggerUnit(config_.matrix, config_.switches);
  blocks_.reserve(sources);
  for (int s = 0; s < sources; ++s) {
    const auto& cfg = config_.blocks[s];
    for (const auto& c : cfg.comparators) c.validate();
    cfg.fsm.validate();
    blocks_.push_back(Block{s, cfg, FsmState{}, QualState{cfg.trace_enabled},
                            ProgramTraceEncoder(s, config_.sync_every),
                            DataTraceEncoder(s, config_.sync_every),
                            Stamper(s, config_.timestamps)});
  }
  actions_.resize(sources);
}

void DebugSystem::emit(Block& block, std::vector<TraceMessage>& raw) {
  std::vector<TraceMessage> stamped;
  for (auto& m : raw) block.stamper.push(std::move(m), stamped);
  raw.clear();
  EmuMemory& emu = machine_.emu();
  std::vector<std::uint8_t> frame;
  for (auto& m : stamped) {
    frame.clear();
    serialize_into(m, frame);
    trace_bytes_ += frame.size();
    frames_.insert(frames_.end(), frame.begin(), frame.end());
    if (emu.trace_active()) {
      // A partial frame would only add noise for the host-side resync.
      if (!emu.trace_append_frame(frame)) ++dropped_frames_;
    }
    trace_.push_back(std::move(m));
  }
}

const CycleEvents& DebugSystem::tick() {
  machine_.tick(events_);
  const std::uint64_t cycle = events_.cycle;
  std::vector<TraceMessage> raw;
  for (auto& b : blocks_) {
    std::uint32_t hits = 0;
    if (!b.cfg.comparators.empty()) hits = hit_mask(evaluate(events_, b.cfg.comparators));
    auto [fsm, actions] = step_fsm(b.cfg.fsm, b.fsm, hits);
    b.fsm = fsm;
    actions_[b.source] = actions;
    auto [qual, passed] = qualify(b.qual, actions, events_, b.source);
    b.qual = qual;

    if (b.cfg.program_trace) {
      if (passed.retires.empty()) {
        bool retired = std::any_of(events_.retires.begin(), events_.retires.end(),
                                   [&](const RetireRecord& r) { return r.source == b.source; });
        if (retired) b.program.mark_gap();
      }
      for (const auto& r : passed.retires) b.program.push(r, raw);
    }
    if (b.cfg.data_trace) {
      for (const auto& d : passed.data) b.data.push(d, raw);
    }
    if (passed.mark) {
      TraceMessage m;
      m.source = b.source;
      m.cycle = cycle;
      m.payload = Mark{b.marks++};
      raw.push_back(std::move(m));
    }
    if (!raw.empty()) emit(b, raw);
  }

  xtu_.process(actions_, pins_, cycle);
  for (auto& r : xtu_.apply_due(machine_, cycle)) {
    host_events_.push_back({r.kind == SwitchRecord::Kind::kPinPulse ? HostEvent::Kind::kPinPulse
                                                                     : HostEvent::Kind::kWarning,
                            r.cycle, r.dest.name() + ": " + r.detail});
  }
  return events_;
}

void DebugSystem::halt_all() {
  std::vector<PendingAction> now;
  for (int c = 0; c < machine_.num_cores(); ++c) {
    if (machine_.core(c).mode == CoreMode::kRunning) {
      now.push_back({{Destination::Kind::kCore, c}, SwitchAction::kBreak, machine_.cycle()});
    }
  }
  now.push_back({{Destination::Kind::kDma, 0}, SwitchAction::kSuspend, machine_.cycle()});
  apply(machine_, now, machine_.cycle());
}

void DebugSystem::resume_all() {
  for (int c = 0; c < machine_.num_cores(); ++c) machine_.resume_core(c);
  machine_.set_dma_suspended(false);
}

std::vector<TraceMessage> DebugSystem::closing_messages() const {
  std::vector<TraceMessage> out;
  for (const auto& b : blocks_) {
    if (!b.cfg.program_trace) continue;
    ProgramTraceEncoder enc = b.program;
    Stamper stamper = b.stamper;
    std::vector<TraceMessage> tail;
    enc.finish(tail);
    for (auto& m : tail) {
      m.cycle = std::max(m.cycle, stamper.last_cycle().value_or(0));
      stamper.push(std::move(m), out);
    }
  }
  return out;
}

std::vector<std::uint8_t> DebugSystem::export_frames() const {
  const EmuMemory& emu = machine_.emu();
  std::vector<std::uint8_t> out = emu.trace_active() ? emu.trace_read_all() : frames_;
  for (const auto& m : closing_messages()) serialize_into(m, out);
  return out;
}

}  // namespace mcds
