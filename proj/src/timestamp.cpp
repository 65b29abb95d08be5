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

#include "mcds/timestamp.hpp"

#include <algorithm>
#include <string>

#include "mcds/error.hpp"

namespace mcds {

void TimestampConfig::validate() const {
  if (width < 2 || width > 32) throw Error("timestamp width must be 2-32 bits");
  if (sync_period < 1 || sync_period >= (std::uint64_t{1} << (width - 1))) {
    throw Error("sync_period must be in [1, 2^(width-1))");
  }
}

Stamper::Stamper(int source, TimestampConfig config) : source_(source), config_(config) {
  config_.validate();
}

void Stamper::push(TraceMessage msg, std::vector<TraceMessage>& out) {
  msg.source = source_;
  if (!last_sync_ || msg.cycle - *last_sync_ >= config_.sync_period) {
    TraceMessage sync;
    sync.source = source_;
    sync.seq = seq_++;
    sync.cycle = msg.cycle;
    sync.ts = msg.cycle & config_.mask();
    sync.payload = TsSync{msg.cycle};
    out.push_back(sync);
    last_sync_ = msg.cycle;
  }
  msg.seq = seq_++;
  msg.ts = msg.cycle & config_.mask();
  last_cycle_ = msg.cycle;
  out.push_back(std::move(msg));
}

std::vector<TraceMessage> stamp(std::span<const TraceMessage> messages,
                                const TimestampConfig& config) {
  std::vector<TraceMessage> out;
  if (messages.empty()) return out;
  Stamper stamper(messages.front().source, config);
  for (const auto& m : messages) stamper.push(m, out);
  return out;
}

std::vector<TraceMessage> recover_cycles(std::span<const TraceMessage> stream,
                                         const TimestampConfig& config,
                                         bool skip_to_first_sync) {
  std::vector<TraceMessage> out;
  out.reserve(stream.size());
  const std::uint64_t mask = config.mask();
  const std::uint64_t half = config.modulus() / 2;
  std::optional<std::uint64_t> prev;
  bool dropping = false;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    TraceMessage m = stream[i];
    if (const auto* sync = std::get_if<TsSync>(&m.payload)) {
      m.cycle = sync->cycle;
      prev = m.cycle;
      dropping = false;
      out.push_back(std::move(m));
      continue;
    }
    if (!prev) {
      if (skip_to_first_sync) continue;
      throw DecodeError(i, "stream does not start with TS_SYNC");
    }
    if (dropping) continue;
    std::uint64_t dist = (m.ts - *prev) & mask;
    if (dist >= half) {
      TraceMessage gap;
      gap.source = m.source;
      gap.seq = m.seq;
      gap.cycle = *prev;
      gap.ts = *prev & mask;
      gap.payload = Overflow{OverflowReason::kTimestampGap, 1};
      out.push_back(gap);
      dropping = true;
      continue;
    }
    m.cycle = *prev + dist;
    prev = m.cycle;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<TraceMessage> merge(std::span<const std::vector<TraceMessage>> streams) {
  std::vector<TraceMessage> out;
  std::size_t total = 0;
  for (const auto& s : streams) total += s.size();
  out.reserve(total);
  for (const auto& s : streams) out.insert(out.end(), s.begin(), s.end());
  std::stable_sort(out.begin(), out.end(), [](const TraceMessage& a, const TraceMessage& b) {
    if (a.cycle != b.cycle) return a.cycle < b.cycle;
    if (a.source != b.source) return a.source < b.source;
    return a.seq < b.seq;
  });
  return out;
}

}  // namespace mcds
