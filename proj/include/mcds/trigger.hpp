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
#include <span>
#include <utility>
#include <vector>

#include "mcds/machine.hpp"

namespace mcds {

inline constexpr int kAnySource = -1;
inline constexpr int kMaxComparators = 32;
inline constexpr int kMaxFsmStates = 4;
inline constexpr int kMaxCounters = 4;
inline constexpr int kTriggerLines = 8;

enum class ComparatorKind : std::uint8_t { kPc, kDataAddr, kDataValue, kBusMaster };
enum class CompareOp : std::uint8_t { kEq, kNeq, kInRange };
enum class AccessFilter : std::uint8_t { kRead, kWrite, kExec, kAny };

struct Comparator {
  int id = 0;
  ComparatorKind kind = ComparatorKind::kPc;
  CompareOp op = CompareOp::kEq;
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;  // IN_RANGE upper bound, inclusive
  AccessFilter access = AccessFilter::kExec;
  int source = kAnySource;

  // Throws Error on a broken invariant (lo > hi, PC without EXEC, bad id).
  void validate() const;
  bool matches(std::uint32_t value) const;
};

struct ComparatorHit {
  enum class Event : std::uint8_t { kRetire, kData, kGrant };
  int comparator = 0;
  Event event = Event::kRetire;
  std::size_t index = 0;  // into CycleEvents::retires / data; 0 for grants

  friend bool operator==(const ComparatorHit&, const ComparatorHit&) = default;
};

// Every matching (event, comparator) pair of one cycle.
std::vector<ComparatorHit> evaluate(const CycleEvents& events,
                                    std::span<const Comparator> comparators);
// Bit i set when comparator id i hit at least once.
std::uint32_t hit_mask(std::span<const ComparatorHit> hits);

struct ActionSet {
  bool break_req = false;
  bool suspend_req = false;
  bool trace_on = false;
  bool trace_off = false;
  bool mark = false;
  std::uint8_t trigger_out = 0;  // bit n drives TRIGGER_OUT(n)

  bool empty() const {
    return !break_req && !suspend_req && !trace_on && !trace_off && !mark && trigger_out == 0;
  }
  friend bool operator==(const ActionSet&, const ActionSet&) = default;
};

enum class CounterOp : std::uint8_t { kNone, kInc, kClear };

struct CounterSpec {
  std::uint32_t threshold = 1;
  int count_event = 0;  // comparator id whose hits advance the counter
};

// A transition fires when the FSM is in `from_state` (or any state when -1),
// every comparator in `hits_all` hit, none in `hits_none` hit and every
// counter in `elapsed_all` has reached its threshold.
struct Transition {
  int from_state = -1;
  std::uint32_t hits_all = 0;
  std::uint32_t hits_none = 0;
  std::uint8_t elapsed_all = 0;
  int next_state = 0;
  ActionSet actions;
  std::array<CounterOp, kMaxCounters> counter_ops{};
};

struct TriggerFsm {
  int num_states = 1;
  std::vector<CounterSpec> counters;
  std::vector<Transition> transitions;

  void validate() const;
};

struct FsmState {
  int state = 0;
  std::array<std::uint32_t, kMaxCounters> counters{};
  friend bool operator==(const FsmState&, const FsmState&) = default;
};

// Counters advance first, then the first matching transition (declaration
// order) fires. No match leaves the state alone and emits nothing.
std::pair<FsmState, ActionSet> step_fsm(const TriggerFsm& fsm, const FsmState& state,
                                        std::uint32_t hits);

struct QualState {
  bool enabled = false;
  friend bool operator==(const QualState&, const QualState&) = default;
};

struct QualifiedEvents {
  std::uint64_t cycle = 0;
  std::vector<RetireRecord> retires;
  std::vector<DataRecord> data;
  bool mark = false;
};

// Trace qualification for one source: TRACE_ON/OFF apply in the same cycle,
// then the source's events pass iff enabled. MARK always passes.
std::pair<QualState, QualifiedEvents> qualify(const QualState& state, const ActionSet& actions,
                                              const CycleEvents& events, int source);

}  // namespace mcds
