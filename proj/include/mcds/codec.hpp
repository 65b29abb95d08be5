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

#include "json.hpp"
#include "mcds/isa.hpp"
#include "mcds/machine.hpp"
#include "mcds/timestamp.hpp"
#include "mcds/trace_message.hpp"

namespace mcds {

// Unsigned LEB128.
void put_uvarint(std::vector<std::uint8_t>& out, std::uint64_t v);
// Advances `pos`; nullopt on truncation or an over-long encoding.
std::optional<std::uint64_t> get_uvarint(std::span<const std::uint8_t> in, std::size_t& pos);

inline std::uint64_t zigzag_encode(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}
inline std::int64_t zigzag_decode(std::uint64_t v) {
  return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
}

// CRC-8, polynomial 0x07, init 0x00, no reflection, no final xor.
std::uint8_t crc8(std::span<const std::uint8_t> bytes);

inline constexpr std::uint32_t kDefaultSyncEvery = 64;

// Emits program trace for one source: PROG_SYNC at stream start and before
// the first retire after every (sync_every - 1) BRANCH messages, BRANCH for
// taken discontinuities only. Sequential execution emits nothing.
class ProgramTraceEncoder {
 public:
  explicit ProgramTraceEncoder(int source, std::uint32_t sync_every = kDefaultSyncEvery);

  void push(const RetireRecord& retire, std::vector<TraceMessage>& out);
  // Retires were filtered out since the last push (trace qualification).
  void mark_gap() { gap_ = true; }
  // Closes the stream; emits an END sync only when retires are pending and the
  // last one was not a HALT.
  void finish(std::vector<TraceMessage>& out);

  std::uint32_t messages_since_sync() const { return since_sync_; }
  std::optional<std::uint32_t> last_pc() const { return last_pc_; }
  std::uint64_t last_cycle() const { return last_cycle_; }

 private:
  TraceMessage make(std::uint64_t cycle, Payload p) const;
  void sync(std::uint32_t pc, SyncReason reason, std::uint64_t cycle,
            std::vector<TraceMessage>& out);

  int source_;
  std::uint32_t sync_every_;
  bool anchored_ = false;
  bool gap_ = false;
  bool need_sync_ = false;
  bool last_halt_ = false;
  std::uint32_t expected_ = 0;
  std::uint32_t tail_ = 0;
  std::uint32_t since_sync_ = 0;
  std::optional<std::uint32_t> last_pc_;
  std::uint64_t last_cycle_ = 0;
};

std::vector<TraceMessage> encode_program(std::span<const RetireRecord> retires,
                                         std::uint32_t sync_every = kDefaultSyncEvery);

struct DecodedFlow {
  std::vector<std::uint32_t> pcs;
  // Positions in `pcs` where the flow is discontinuous (lost or filtered
  // trace); decoding restarted at the next PROG_SYNC.
  std::vector<std::size_t> gaps;
  // pcs.size() after each input message, for per-message attribution.
  std::vector<std::size_t> pcs_after;
};

struct DecodeOptions {
  // When set, an anchored stream without an END sync runs on to the next HALT.
  // Clear it for traces of a still-running target.
  bool stream_complete = true;
};

// Replays `image` from each PROG_SYNC. Non-program messages are ignored and
// OVERFLOW marks a discontinuity. Throws DecodeError (message index) when the
// messages and the image disagree.
DecodedFlow decode_program(std::span<const TraceMessage> messages, const ProgramImage& image,
                           DecodeOptions options = {});

// Absolute address on the first message and every sync_every messages,
// zigzag delta from the previous access otherwise.
class DataTraceEncoder {
 public:
  explicit DataTraceEncoder(int source, std::uint32_t sync_every = kDefaultSyncEvery);
  void push(const DataRecord& access, std::vector<TraceMessage>& out);

 private:
  int source_;
  std::uint32_t sync_every_;
  std::uint32_t count_ = 0;
  std::uint32_t prev_addr_ = 0;
};

std::vector<TraceMessage> encode_data(std::span<const DataRecord> accesses,
                                      std::uint32_t sync_every = kDefaultSyncEvery);
// Inverse of encode_data; source and cycle come from each message. Throws
// DecodeError on a delta without a preceding absolute address or a bad size.
// After an OVERFLOW, deltas are skipped until the next absolute address.
std::vector<DataRecord> decode_data(std::span<const TraceMessage> messages);

// Frame: source u8 | kind u8 | len uvarint | payload | crc8(header+payload).
// Payload: ts uvarint | seq uvarint | kind-specific fields.
void serialize_into(const TraceMessage& msg, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> serialize(std::span<const TraceMessage> messages);
// Throws DecodeError carrying the byte offset of the offending frame.
std::vector<TraceMessage> deserialize(std::span<const std::uint8_t> bytes);

struct LenientFrames {
  std::vector<TraceMessage> messages;
  std::size_t skipped_bytes = 0;
  std::size_t resyncs = 0;
};
// Skips undecodable bytes and resumes at the next valid frame.
LenientFrames deserialize_lenient(std::span<const std::uint8_t> bytes);

// Splits a mixed stream per source (ascending id) and inserts an OVERFLOW
// wherever a source's seq numbers jump.
std::vector<std::vector<TraceMessage>> split_sources(std::span<const TraceMessage> messages);

// .mtrc container: "MCDS" | version 0x01 | frames.
inline constexpr std::uint8_t kMtrcVersion = 0x01;
std::vector<std::uint8_t> make_mtrc(std::span<const TraceMessage> messages);
std::vector<TraceMessage> parse_mtrc(std::span<const std::uint8_t> bytes);
// Frame bytes after a validated .mtrc header; throws DecodeError otherwise.
std::span<const std::uint8_t> mtrc_body(std::span<const std::uint8_t> bytes);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

// Host-side pipeline for captured frames: lenient deserialize, per-source
// split, cycle recovery from the first TS_SYNC, merge.
std::vector<TraceMessage> reconstruct(std::span<const std::uint8_t> frames,
                                      const TimestampConfig& config);

nlohmann::json to_json(const TraceMessage& msg);
std::string to_jsonl(std::span<const TraceMessage> messages);

}  // namespace mcds
