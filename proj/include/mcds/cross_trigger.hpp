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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcds/machine.hpp"
#include "mcds/trigger.hpp"

namespace mcds {

inline constexpr int kExternalPins = 2;

// Matrix rows. Each trigger block (one per core plus the DMA) contributes
// TRIGGER_OUT(0..7), BREAK_REQ and SUSPEND_REQ; the external input pins come
// after all blocks.
class TriggerMatrix {
 public:
  static constexpr int kRowsPerBlock = kTriggerLines + 2;

  TriggerMatrix() : TriggerMatrix(0) {}
  explicit TriggerMatrix(int num_blocks);

  int num_blocks() const { return num_blocks_; }
  int num_sources() const { return static_cast<int>(routes_.size()); }

  int trigger_out(int block, int line) const;
  int break_req(int block) const;
  int suspend_req(int block) const;
  int pin(int p) const;

  void connect(int source, int line);
  void set_routes(int source, std::uint8_t line_mask);
  std::uint8_t routes(int source) const { return routes_.at(source); }

  // Identity mapping of TRIGGER_OUT(n) onto line n for every block.
  static TriggerMatrix identity(int num_blocks);

  // Parses "core1.trig3", "core0.break", "dma.suspend", "pin1".
  std::optional<int> parse_source(const std::string& name, int num_cores) const;

 private:
  int num_blocks_;
  std::vector<std::uint8_t> routes_;
};

// Line state: bit L high iff some asserted source routes to L. Pure OR.
std::uint8_t route(std::span<const int> asserted_sources, const TriggerMatrix& matrix);

// Sources asserted by one cycle of block actions and pin levels.
std::vector<int> asserted_sources(std::span<const ActionSet> block_actions,
                                  std::span<const bool> pins, const TriggerMatrix& matrix);

struct Destination {
  enum class Kind : std::uint8_t { kCore, kDma, kPin };
  Kind kind = Kind::kCore;
  int index = 0;

  std::string name() const;
  friend bool operator==(const Destination&, const Destination&) = default;
};

enum class SwitchAction : std::uint8_t { kNone, kBreak, kSuspend, kPulseOut };

struct SwitchEntry {
  Destination dest;
  std::uint8_t line_mask = 0;
  SwitchAction action = SwitchAction::kNone;
};

struct SwitchConfig {
  std::vector<SwitchEntry> entries;
  int delay = 1;

  // BREAK only for cores, SUSPEND only for the DMA, PULSE_OUT only for pins.
  void validate() const;
};

struct PendingAction {
  Destination dest;
  SwitchAction action = SwitchAction::kNone;
  std::uint64_t due_cycle = 0;

  friend bool operator==(const PendingAction&, const PendingAction&) = default;
};

// Schedules every destination whose mask intersects `lines` at cycle + d.
// Destinations that already have a pending action of the same kind in
// `pending` are coalesced away.
std::vector<PendingAction> dispatch(std::uint8_t lines, const SwitchConfig& config,
                                    std::uint64_t cycle,
                                    std::span<const PendingAction> pending = {});

struct SwitchRecord {
  enum class Kind : std::uint8_t { kPinPulse, kIgnored };
  Kind kind = Kind::kPinPulse;
  Destination dest;
  std::uint64_t cycle = 0;
  std::string detail;
};

// Delivers due actions to the machine. BREAK halts at the next instruction
// boundary; SUSPEND stops the DMA from starting new transfers.
std::vector<SwitchRecord> apply(Machine& machine, std::span<const PendingAction> due,
                                std::uint64_t cycle);

// Pending queue plus dispatch/apply, owned by the debug system.
class CrossTriggerUnit {
 public:
  CrossTriggerUnit() = default;
  CrossTriggerUnit(TriggerMatrix matrix, SwitchConfig config);

  const TriggerMatrix& matrix() const { return matrix_; }
  const SwitchConfig& switch_config() const { return config_; }
  const std::vector<PendingAction>& pending() const { return pending_; }

  // Lines driven in this cycle; schedules their actions.
  std::uint8_t process(std::span<const ActionSet> block_actions, std::span<const bool> pins,
                       std::uint64_t cycle);
  // Host-originated action bypassing the matrix (run-control halt).
  void schedule(Destination dest, SwitchAction action, std::uint64_t cycle);
  // Applies and removes everything due at or before `cycle`.
  std::vector<SwitchRecord> apply_due(Machine& machine, std::uint64_t cycle);
  void clear() { pending_.clear(); }

 private:
  TriggerMatrix matrix_;
  SwitchConfig config_;
  std::vector<PendingAction> pending_;
};

}  // namespace mcds
