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
#include <vector>

#include "mcds/trace_message.hpp"

namespace mcds {

struct TimestampConfig {
  int width = 16;
  std::uint64_t sync_period = std::uint64_t{1} << 14;

  static TimestampConfig with_width(int width) {
    return {width, std::uint64_t{1} << (width - 2)};
  }
  std::uint64_t modulus() const { return std::uint64_t{1} << width; }
  std::uint64_t mask() const { return modulus() - 1; }
  // Throws Error unless 2 <= width <= 32 and 1 <= sync_period < 2^(width-1).
  void validate() const;
};

// Online per-source stamper: assigns seq and truncated ts, and injects a
// TS_SYNC before the first message and whenever sync_period cycles have passed
// since the previous sync.
class Stamper {
 public:
  Stamper(int source, TimestampConfig config);

  void push(TraceMessage msg, std::vector<TraceMessage>& out);
  std::optional<std::uint64_t> last_cycle() const { return last_cycle_; }
  std::uint64_t next_seq() const { return seq_; }

 private:
  int source_;
  TimestampConfig config_;
  std::optional<std::uint64_t> last_sync_;
  std::optional<std::uint64_t> last_cycle_;
  std::uint64_t seq_ = 0;
};

// Stamps one source's cycle-ordered messages.
std::vector<TraceMessage> stamp(std::span<const TraceMessage> messages,
                                const TimestampConfig& config);

// Rebuilds full cycles for one source's stream. The stream must open with a
// TS_SYNC (DecodeError otherwise) unless `skip_to_first_sync` is set, in which
// case leading messages are dropped. A message more than 2^(W-1) cycles ahead
// of its predecessor is unrecoverable: an OVERFLOW is emitted in its place and
// messages are dropped until the next TS_SYNC.
std::vector<TraceMessage> recover_cycles(std::span<const TraceMessage> stream,
                                         const TimestampConfig& config,
                                         bool skip_to_first_sync = false);

// Single stream ordered by (cycle, source, seq); stable.
std::vector<TraceMessage> merge(std::span<const std::vector<TraceMessage>> streams);

}  // namespace mcds
