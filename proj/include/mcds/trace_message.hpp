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
#include <string_view>
#include <variant>

namespace mcds {

enum class MessageKind : std::uint8_t {
  kProgSync = 1,
  kBranch = 2,
  kData = 3,
  kMark = 4,
  kTsSync = 5,
  kOverflow = 6,
};

std::string_view kind_name(MessageKind kind);

enum class SyncReason : std::uint8_t {
  kStart = 0,     // first program message of a stream
  kPeriodic = 1,  // continuity check; decoder verifies the walked pc
  kResume = 2,    // retires were not observed since the previous message
  kEnd = 3,       // stream cut without a HALT; pc is the next un-traced pc
};

// Full pc plus the count of retires since the previous program message that
// have not been reported yet (they precede `pc`).
struct ProgSync {
  std::uint32_t pc = 0;
  std::uint32_t icnt = 0;
  SyncReason reason = SyncReason::kStart;
  friend bool operator==(const ProgSync&, const ProgSync&) = default;
};

// Taken discontinuity. `icnt` retires since the previous program message, the
// last of which is the branch; `delta` is target minus fall-through pc.
struct Branch {
  std::uint32_t icnt = 0;
  std::int64_t delta = 0;
  friend bool operator==(const Branch&, const Branch&) = default;
};

struct DataAccess {
  bool absolute = false;
  std::int64_t addr = 0;  // absolute address, or delta from previous DATA
  std::uint8_t size = 4;
  bool write = false;
  std::uint32_t value = 0;
  friend bool operator==(const DataAccess&, const DataAccess&) = default;
};

struct Mark {
  std::uint32_t id = 0;
  friend bool operator==(const Mark&, const Mark&) = default;
};

struct TsSync {
  std::uint64_t cycle = 0;
  friend bool operator==(const TsSync&, const TsSync&) = default;
};

enum class OverflowReason : std::uint8_t {
  kTimestampGap = 0,
  kBufferDrop = 1,
  kLostFrames = 2,
};

struct Overflow {
  OverflowReason reason = OverflowReason::kTimestampGap;
  std::uint64_t count = 0;
  friend bool operator==(const Overflow&, const Overflow&) = default;
};

using Payload = std::variant<ProgSync, Branch, DataAccess, Mark, TsSync, Overflow>;

struct TraceMessage {
  int source = 0;
  std::uint64_t seq = 0;
  std::uint64_t ts = 0;
  // Full cycle. Never serialized; the decoder rebuilds it from ts + TS_SYNC.
  std::uint64_t cycle = 0;
  Payload payload;

  MessageKind kind() const { return static_cast<MessageKind>(payload.index() + 1); }
  bool is_program() const {
    return kind() == MessageKind::kProgSync || kind() == MessageKind::kBranch;
  }

  friend bool operator==(const TraceMessage&, const TraceMessage&) = default;
};

// Equality over the fields that travel on the wire (everything but cycle).
inline bool same_on_wire(const TraceMessage& a, const TraceMessage& b) {
  return a.source == b.source && a.seq == b.seq && a.ts == b.ts && a.payload == b.payload;
}

}  // namespace mcds
