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

#include "mcds/trigger.hpp"

#include <algorithm>
#include <string>

#include "mcds/error.hpp"

namespace mcds {

void Comparator::validate() const {
  std::string tag = "comparator " + std::to_string(id);
  if (id < 0 || id >= kMaxComparators) throw Error(tag + ": id must be 0-31");
  if (op == CompareOp::kInRange && lo > hi) throw Error(tag + ": lo > hi");
  if (kind == ComparatorKind::kPc && access != AccessFilter::kExec) {
    throw Error(tag + ": PC comparators require EXEC access");
  }
  if (kind != ComparatorKind::kPc && access == AccessFilter::kExec) {
    throw Error(tag + ": EXEC access only applies to PC comparators");
  }
}

bool Comparator::matches(std::uint32_t v) const {
  switch (op) {
    case CompareOp::kEq: return v == lo;
    case CompareOp::kNeq: return v != lo;
    case CompareOp::kInRange: return v >= lo && v <= hi;
  }
  return false;
}

namespace {

bool source_ok(const Comparator& c, int source) {
  return c.source == kAnySource || c.source == source;
}

bool access_ok(const Comparator& c, AccessKind kind) {
  switch (c.access) {
    case AccessFilter::kAny: return true;
    case AccessFilter::kRead: return kind == AccessKind::kRead;
    case AccessFilter::kWrite: return kind == AccessKind::kWrite;
    case AccessFilter::kExec: return false;
  }
  return false;
}

}  // namespace

std::vector<ComparatorHit> evaluate(const CycleEvents& events,
                                    std::span<const Comparator> comparators) {
  std::vector<ComparatorHit> hits;
  for (const auto& c : comparators) {
    switch (c.kind) {
      case ComparatorKind::kPc:
        for (std::size_t i = 0; i < events.retires.size(); ++i) {
          const auto& r = events.retires[i];
          if (source_ok(c, r.source) && c.matches(r.pc)) {
            hits.push_back({c.id, ComparatorHit::Event::kRetire, i});
          }
        }
        break;
      case ComparatorKind::kDataAddr:
      case ComparatorKind::kDataValue:
        for (std::size_t i = 0; i < events.data.size(); ++i) {
          const auto& d = events.data[i];
          std::uint32_t v = c.kind == ComparatorKind::kDataAddr ? d.addr : d.value;
          if (source_ok(c, d.source) && access_ok(c, d.kind) && c.matches(v)) {
            hits.push_back({c.id, ComparatorHit::Event::kData, i});
          }
        }
        break;
      case ComparatorKind::kBusMaster:
        if (events.grant && source_ok(c, events.grant->master) &&
            c.matches(static_cast<std::uint32_t>(events.grant->master))) {
          hits.push_back({c.id, ComparatorHit::Event::kGrant, 0});
        }
        break;
    }
  }
  return hits;
}

std::uint32_t hit_mask(std::span<const ComparatorHit> hits) {
  std::uint32_t mask = 0;
  for (const auto& h : hits) mask |= 1u << h.comparator;
  return mask;
}

void TriggerFsm::validate() const {
  if (num_states < 1 || num_states > kMaxFsmStates) throw Error("FSM supports 1-4 states");
  if (counters.size() > kMaxCounters) throw Error("FSM supports at most 4 counters");
  for (std::size_t i = 0; i < counters.size(); ++i) {
    if (counters[i].threshold == 0) {
      throw Error("counter " + std::to_string(i) + ": threshold must be at least 1");
    }
    if (counters[i].count_event < 0 || counters[i].count_event >= kMaxComparators) {
      throw Error("counter " + std::to_string(i) + ": bad comparator id");
    }
  }
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& t = transitions[i];
    std::string tag = "transition " + std::to_string(i);
    if (t.from_state < -1 || t.from_state >= num_states) throw Error(tag + ": bad from state");
    if (t.next_state < 0 || t.next_state >= num_states) throw Error(tag + ": bad next state");
    if (t.actions.trace_on && t.actions.trace_off) {
      throw Error(tag + ": TRACE_ON and TRACE_OFF in one transition");
    }
    if ((t.elapsed_all >> counters.size()) != 0) throw Error(tag + ": unknown counter");
    for (std::size_t k = counters.size(); k < kMaxCounters; ++k) {
      if (t.counter_ops[k] != CounterOp::kNone) throw Error(tag + ": unknown counter");
    }
  }
}

std::pair<FsmState, ActionSet> step_fsm(const TriggerFsm& fsm, const FsmState& state,
                                        std::uint32_t hits) {
  FsmState next = state;
  std::uint8_t elapsed = 0;
  for (std::size_t i = 0; i < fsm.counters.size(); ++i) {
    const auto& spec = fsm.counters[i];
    if (hits & (1u << spec.count_event)) {
      next.counters[i] = std::min(next.counters[i] + 1, spec.threshold);
    }
    if (next.counters[i] >= spec.threshold) elapsed |= static_cast<std::uint8_t>(1u << i);
  }
  for (const auto& t : fsm.transitions) {
    if (t.from_state != -1 && t.from_state != state.state) continue;
    if ((hits & t.hits_all) != t.hits_all) continue;
    if (hits & t.hits_none) continue;
    if ((elapsed & t.elapsed_all) != t.elapsed_all) continue;
    next.state = t.next_state;
    for (std::size_t i = 0; i < fsm.counters.size(); ++i) {
      switch (t.counter_ops[i]) {
        case CounterOp::kNone: break;
        case CounterOp::kInc:
          next.counters[i] = std::min(next.counters[i] + 1, fsm.counters[i].threshold);
          break;
        case CounterOp::kClear: next.counters[i] = 0; break;
      }
    }
    return {next, t.actions};
  }
  return {next, ActionSet{}};
}

std::pair<QualState, QualifiedEvents> qualify(const QualState& state, const ActionSet& actions,
                                              const CycleEvents& events, int source) {
  QualState next = state;
  if (actions.trace_on) next.enabled = true;
  if (actions.trace_off) next.enabled = false;
  QualifiedEvents out;
  out.cycle = events.cycle;
  out.mark = actions.mark;
  if (next.enabled) {
    for (const auto& r : events.retires) {
      if (r.source == source) out.retires.push_back(r);
    }
    for (const auto& d : events.data) {
      if (d.source == source) out.data.push_back(d);
    }
  }
  return {next, out};
}

}  // namespace mcds
