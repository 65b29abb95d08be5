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
#include <string>
#include <vector>

#include "mcds/codec.hpp"
#include "mcds/cross_trigger.hpp"
#include "mcds/machine.hpp"
#include "mcds/timestamp.hpp"
#include "mcds/trigger.hpp"

namespace mcds {

// Configuration of the trigger/trace block attached to one source.
struct TriggerBlockConfig {
  std::vector<Comparator> comparators;
  TriggerFsm fsm;
  bool trace_enabled = true;  // initial qualification state
  bool program_trace = true;
  bool data_trace = true;
};

struct DebugConfig {
  // One entry per core followed by the DMA; missing entries get defaults.
  std::vector<TriggerBlockConfig> blocks;
  TriggerMatrix matrix;
  SwitchConfig switches;
  TimestampConfig timestamps;
  std::uint32_t sync_every = kDefaultSyncEvery;
};

struct HostEvent {
  enum class Kind : std::uint8_t { kPinPulse, kWarning };
  Kind kind = Kind::kPinPulse;
  std::uint64_t cycle = 0;
  std::string detail;
};

// The on-chip debug side of the device: trigger blocks, cross-trigger unit
// and trace pipeline. It only observes the machine, except for break/suspend
// actions delivered through the switch.
class DebugSystem {
 public:
  DebugSystem(Machine& machine, DebugConfig config);

  const DebugConfig& config() const { return config_; }

  // One machine cycle followed by trigger evaluation, tracing and switching.
  const CycleEvents& tick();
  const CycleEvents& last_events() const { return events_; }

  void set_pin(int pin, bool level) { pins_.at(pin) = level; }
  bool pin(int pin) const { return pins_.at(pin); }

  // Host run control, delivered through the break/suspend switch outside the
  // trigger matrix.
  void halt_all();
  void resume_all();

  // Trace in emission order, which is also (cycle, source, seq) order.
  const std::vector<TraceMessage>& trace() const { return trace_; }
  std::uint64_t trace_bytes() const { return trace_bytes_; }
  std::uint64_t dropped_frames() const { return dropped_frames_; }
  // Closing program syncs for streams cut mid-run, computed on copies of
  // the encoders so the live trace is unaffected.
  std::vector<TraceMessage> closing_messages() const;
  // Raw frames: the emulation trace buffer when active, otherwise every
  // emitted frame. Closing messages are appended in both cases.
  std::vector<std::uint8_t> export_frames() const;

  const std::vector<HostEvent>& host_events() const { return host_events_; }
  const FsmState& fsm_state(int block) const { return blocks_.at(block).fsm; }
  bool trace_enabled(int block) const { return blocks_.at(block).qual.enabled; }
  const CrossTriggerUnit& cross_trigger() const { return xtu_; }

 private:
  struct Block {
    int source = 0;
    TriggerBlockConfig cfg;
    FsmState fsm;
    QualState qual;
    ProgramTraceEncoder program;
    DataTraceEncoder data;
    Stamper stamper;
    std::uint32_t marks = 0;
  };

  void emit(Block& block, std::vector<TraceMessage>& raw);

  Machine& machine_;
  DebugConfig config_;
  std::vector<Block> blocks_;
  CrossTriggerUnit xtu_;
  std::array<bool, kExternalPins> pins_{};
  CycleEvents events_;
  std::vector<ActionSet> actions_;
  std::vector<TraceMessage> trace_;
  std::vector<std::uint8_t> frames_;
  std::uint64_t trace_bytes_ = 0;
  std::uint64_t dropped_frames_ = 0;
  std::vector<HostEvent> host_events_;
};

}  // namespace mcds
