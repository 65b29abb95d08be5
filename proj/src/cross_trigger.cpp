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

#include "mcds/cross_trigger.hpp"

#include <algorithm>
#include <charconv>

#include "mcds/error.hpp"

namespace mcds {

TriggerMatrix::TriggerMatrix(int num_blocks)
    : num_blocks_(num_blocks), routes_(num_blocks * kRowsPerBlock + kExternalPins, 0) {}

int TriggerMatrix::trigger_out(int block, int line) const {
  return block * kRowsPerBlock + line;
}
int TriggerMatrix::break_req(int block) const { return block * kRowsPerBlock + kTriggerLines; }
int TriggerMatrix::suspend_req(int block) const {
  return block * kRowsPerBlock + kTriggerLines + 1;
}
int TriggerMatrix::pin(int p) const { return num_blocks_ * kRowsPerBlock + p; }

void TriggerMatrix::connect(int source, int line) {
  if (line < 0 || line >= kTriggerLines) throw Error("trigger line must be 0-7");
  routes_.at(source) |= static_cast<std::uint8_t>(1u << line);
}

void TriggerMatrix::set_routes(int source, std::uint8_t line_mask) {
  routes_.at(source) = line_mask;
}

TriggerMatrix TriggerMatrix::identity(int num_blocks) {
  TriggerMatrix m(num_blocks);
  for (int b = 0; b < num_blocks; ++b) {
    for (int l = 0; l < kTriggerLines; ++l) m.connect(m.trigger_out(b, l), l);
  }
  return m;
}

std::optional<int> TriggerMatrix::parse_source(const std::string& name, int num_cores) const {
  auto number = [](std::string_view s) -> std::optional<int> {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
  };
  if (name.rfind("pin", 0) == 0) {
    auto p = number(std::string_view(name).substr(3));
    if (!p || *p < 0 || *p >= kExternalPins) return std::nullopt;
    return pin(*p);
  }
  auto dot = name.find('.');
  if (dot == std::string::npos) return std::nullopt;
  std::string block_name = name.substr(0, dot);
  std::string what = name.substr(dot + 1);
  int block = -1;
  if (block_name == "dma") {
    block = num_cores;
  } else if (block_name.rfind("core", 0) == 0) {
    auto b = number(std::string_view(block_name).substr(4));
    if (!b || *b < 0 || *b >= num_cores) return std::nullopt;
    block = *b;
  }
  if (block < 0 || block >= num_blocks_) return std::nullopt;
  if (what == "break") return break_req(block);
  if (what == "suspend") return suspend_req(block);
  if (what.rfind("trig", 0) == 0) {
    auto l = number(std::string_view(what).substr(4));
    if (!l || *l < 0 || *l >= kTriggerLines) return std::nullopt;
    return trigger_out(block, *l);
  }
  return std::nullopt;
}

std::uint8_t route(std::span<const int> asserted_sources, const TriggerMatrix& matrix) {
  std::uint8_t lines = 0;
  for (int s : asserted_sources) lines |= matrix.routes(s);
  return lines;
}

std::vector<int> asserted_sources(std::span<const ActionSet> block_actions,
                                  std::span<const bool> pins, const TriggerMatrix& matrix) {
  std::vector<int> out;
  for (std::size_t b = 0; b < block_actions.size(); ++b) {
    const ActionSet& a = block_actions[b];
    int block = static_cast<int>(b);
    for (int l = 0; l < kTriggerLines; ++l) {
      if (a.trigger_out & (1u << l)) out.push_back(matrix.trigger_out(block, l));
    }
    if (a.break_req) out.push_back(matrix.break_req(block));
    if (a.suspend_req) out.push_back(matrix.suspend_req(block));
  }
  for (std::size_t p = 0; p < pins.size() && p < kExternalPins; ++p) {
    if (pins[p]) out.push_back(matrix.pin(static_cast<int>(p)));
  }
  return out;
}

std::string Destination::name() const {
  switch (kind) {
    case Kind::kCore: return "core" + std::to_string(index);
    case Kind::kDma: return "dma";
    case Kind::kPin: return "pin" + std::to_string(index);
  }
  return "?";
}

void SwitchConfig::validate() const {
  if (delay < 0) throw Error("switch delay must be >= 0");
  for (const auto& e : entries) {
    bool ok = true;
    switch (e.action) {
      case SwitchAction::kNone: break;
      case SwitchAction::kBreak: ok = e.dest.kind == Destination::Kind::kCore; break;
      case SwitchAction::kSuspend: ok = e.dest.kind == Destination::Kind::kDma; break;
      case SwitchAction::kPulseOut: ok = e.dest.kind == Destination::Kind::kPin; break;
    }
    if (!ok) throw Error("switch entry " + e.dest.name() + ": action not valid for destination");
    if (e.dest.kind == Destination::Kind::kPin &&
        (e.dest.index < 0 || e.dest.index >= kExternalPins)) {
      throw Error("switch entry " + e.dest.name() + ": no such pin");
    }
  }
}

std::vector<PendingAction> dispatch(std::uint8_t lines, const SwitchConfig& config,
                                    std::uint64_t cycle, std::span<const PendingAction> pending) {
  std::vector<PendingAction> out;
  if (lines == 0) return out;
  for (const auto& e : config.entries) {
    if (e.action == SwitchAction::kNone || (e.line_mask & lines) == 0) continue;
    auto same = [&](const PendingAction& p) { return p.dest == e.dest && p.action == e.action; };
    if (std::any_of(pending.begin(), pending.end(), same) ||
        std::any_of(out.begin(), out.end(), same)) {
      continue;
    }
    out.push_back({e.dest, e.action, cycle + static_cast<std::uint64_t>(config.delay)});
  }
  return out;
}

std::vector<SwitchRecord> apply(Machine& machine, std::span<const PendingAction> due,
                                std::uint64_t cycle) {
  std::vector<SwitchRecord> records;
  for (const auto& a : due) {
    switch (a.action) {
      case SwitchAction::kNone:
        break;
      case SwitchAction::kBreak:
        if (!machine.request_break(a.dest.index)) {
          records.push_back({SwitchRecord::Kind::kIgnored, a.dest, cycle,
                             "BREAK ignored: core already done"});
        }
        break;
      case SwitchAction::kSuspend:
        machine.set_dma_suspended(true);
        break;
      case SwitchAction::kPulseOut:
        records.push_back({SwitchRecord::Kind::kPinPulse, a.dest, a.due_cycle, "PULSE_OUT"});
        break;
    }
  }
  return records;
}

CrossTriggerUnit::CrossTriggerUnit(TriggerMatrix matrix, SwitchConfig config)
    : matrix_(std::move(matrix)), config_(std::move(config)) {
  config_.validate();
}

std::uint8_t CrossTriggerUnit::process(std::span<const ActionSet> block_actions,
                                       std::span<const bool> pins, std::uint64_t cycle) {
  auto sources = asserted_sources(block_actions, pins, matrix_);
  std::uint8_t lines = route(sources, matrix_);
  auto fresh = dispatch(lines, config_, cycle, pending_);
  pending_.insert(pending_.end(), fresh.begin(), fresh.end());
  return lines;
}

void CrossTriggerUnit::schedule(Destination dest, SwitchAction action, std::uint64_t cycle) {
  PendingAction a{dest, action, cycle + static_cast<std::uint64_t>(config_.delay)};
  for (const auto& p : pending_) {
    if (p.dest == dest && p.action == action) return;
  }
  pending_.push_back(a);
}

std::vector<SwitchRecord> CrossTriggerUnit::apply_due(Machine& machine, std::uint64_t cycle) {
  std::vector<PendingAction> due;
  auto it = std::stable_partition(pending_.begin(), pending_.end(),
                                  [&](const PendingAction& p) { return p.due_cycle > cycle; });
  due.assign(it, pending_.end());
  pending_.erase(it, pending_.end());
  return apply(machine, due, cycle);
}

}  // namespace mcds
