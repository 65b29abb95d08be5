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

#include "mcds/codec.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <map>

#include "mcds/error.hpp"

namespace mcds {

std::string_view kind_name(MessageKind kind) {
  switch (kind) {
    case MessageKind::kProgSync: return "PROG_SYNC";
    case MessageKind::kBranch: return "BRANCH";
    case MessageKind::kData: return "DATA";
    case MessageKind::kMark: return "MARK";
    case MessageKind::kTsSync: return "TS_SYNC";
    case MessageKind::kOverflow: return "OVERFLOW";
  }
  return "UNKNOWN";
}

void put_uvarint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

std::optional<std::uint64_t> get_uvarint(std::span<const std::uint8_t> in, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (pos >= in.size()) return std::nullopt;
    std::uint8_t b = in[pos++];
    // The tenth byte may only carry the top bit of a 64-bit value.
    if (shift == 63 && b > 1) return std::nullopt;
    v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
    if (!(b & 0x80)) {
      // Reject padded encodings so every value has exactly one byte form.
      if (b == 0 && shift != 0) return std::nullopt;
      return v;
    }
  }
  return std::nullopt;
}

namespace {

constexpr std::array<std::uint8_t, 256> make_crc_table() {
  std::array<std::uint8_t, 256> t{};
  for (int i = 0; i < 256; ++i) {
    std::uint8_t c = static_cast<std::uint8_t>(i);
    for (int k = 0; k < 8; ++k) c = static_cast<std::uint8_t>((c & 0x80) ? (c << 1) ^ 0x07 : c << 1);
    t[i] = c;
  }
  return t;
}

constexpr auto kCrcTable = make_crc_table();

}  // namespace

std::uint8_t crc8(std::span<const std::uint8_t> bytes) {
  std::uint8_t c = 0;
  for (std::uint8_t b : bytes) c = kCrcTable[c ^ b];
  return c;
}

// ---------------------------------------------------------------------------
// Program trace

ProgramTraceEncoder::ProgramTraceEncoder(int source, std::uint32_t sync_every)
    : source_(source), sync_every_(sync_every) {
  if (sync_every_ < 2) throw Error("sync_every must be at least 2");
}

TraceMessage ProgramTraceEncoder::make(std::uint64_t cycle, Payload p) const {
  TraceMessage m;
  m.source = source_;
  m.cycle = cycle;
  m.payload = std::move(p);
  return m;
}

void ProgramTraceEncoder::sync(std::uint32_t pc, SyncReason reason, std::uint64_t cycle,
                               std::vector<TraceMessage>& out) {
  out.push_back(make(cycle, ProgSync{pc, tail_, reason}));
  tail_ = 0;
  since_sync_ = 0;
  need_sync_ = false;
}

void ProgramTraceEncoder::push(const RetireRecord& r, std::vector<TraceMessage>& out) {
  if (!anchored_) {
    tail_ = 0;
    sync(r.pc, SyncReason::kStart, r.cycle, out);
    anchored_ = true;
  } else if (gap_ || r.pc != expected_) {
    sync(r.pc, SyncReason::kResume, r.cycle, out);
  } else if (need_sync_) {
    sync(r.pc, SyncReason::kPeriodic, r.cycle, out);
  }
  gap_ = false;

  ++tail_;
  if (r.taken) {
    const std::int64_t delta = static_cast<std::int64_t>(r.target) -
                               (static_cast<std::int64_t>(r.pc) + 4);
    out.push_back(make(r.cycle, Branch{tail_, delta}));
    tail_ = 0;
    if (++since_sync_ >= sync_every_ - 1) need_sync_ = true;
  }
  expected_ = r.taken ? r.target : r.pc + 4;
  last_halt_ = r.halt;
  last_pc_ = r.pc;
  last_cycle_ = r.cycle;
}

void ProgramTraceEncoder::finish(std::vector<TraceMessage>& out) {
  if (!anchored_ || tail_ == 0 || last_halt_) return;
  sync(expected_, SyncReason::kEnd, last_cycle_, out);
}

std::vector<TraceMessage> encode_program(std::span<const RetireRecord> retires,
                                         std::uint32_t sync_every) {
  std::vector<TraceMessage> out;
  if (retires.empty()) return out;
  ProgramTraceEncoder enc(retires.front().source, sync_every);
  for (const auto& r : retires) enc.push(r, out);
  enc.finish(out);
  return out;
}

namespace {

class FlowWalker {
 public:
  FlowWalker(const ProgramImage& image, DecodedFlow& flow) : image_(image), flow_(flow) {}

  Instruction fetch(std::uint32_t pc, std::size_t index) const {
    if (!image_.contains(pc)) throw DecodeError(index, "pc outside program image");
    auto insn = try_decode(image_.word_at(pc));
    if (!insn) throw DecodeError(index, "undecodable word in program image");
    return *insn;
  }

  // Retires `n` sequential instructions. A JMP always produces a BRANCH, so
  // meeting one here means the stream and the image disagree. HALT ends a
  // stream and is accepted only as the final instruction.
  void walk(std::uint32_t& pc, std::uint64_t n, std::size_t index) {
    for (std::uint64_t k = 0; k < n; ++k) {
      Instruction insn = fetch(pc, index);
      if (insn.opcode == Opcode::kJmp) throw DecodeError(index, "walked through a JMP");
      if (insn.opcode == Opcode::kHalt && !insn.is_break() && k + 1 != n) {
        throw DecodeError(index, "walked through a HALT");
      }
      flow_.pcs.push_back(pc);
      pc += 4;
    }
  }

  // Sequential walk to the first HALT, for streams that end without a sync.
  void run_to_halt(std::uint32_t& pc, std::size_t index) {
    const std::size_t limit = image_.bytes.size() / 4 + 1;
    for (std::size_t k = 0; k < limit; ++k) {
      Instruction insn = fetch(pc, index);
      if (insn.opcode == Opcode::kJmp) throw DecodeError(index, "stream ends before a JMP");
      flow_.pcs.push_back(pc);
      if (insn.opcode == Opcode::kHalt && !insn.is_break()) return;
      pc += 4;
    }
    throw DecodeError(index, "no HALT after the last message");
  }

 private:
  const ProgramImage& image_;
  DecodedFlow& flow_;
};

}  // namespace

DecodedFlow decode_program(std::span<const TraceMessage> messages, const ProgramImage& image,
                           DecodeOptions options) {
  DecodedFlow flow;
  FlowWalker walker(image, flow);
  bool anchored = false;
  bool ended = false;
  bool seen_sync = false;
  std::uint32_t pc = 0;

  auto flag_gap = [&] {
    if (flow.gaps.empty() || flow.gaps.back() != flow.pcs.size()) flow.gaps.push_back(flow.pcs.size());
  };

  for (std::size_t i = 0; i < messages.size(); ++i) {
    const TraceMessage& m = messages[i];
    if (const auto* s = std::get_if<ProgSync>(&m.payload)) {
      if (anchored) {
        walker.walk(pc, s->icnt, i);
        if (s->reason == SyncReason::kPeriodic && pc != s->pc) {
          throw DecodeError(i, "periodic sync disagrees with the reconstructed pc");
        }
        if (s->reason == SyncReason::kResume) flag_gap();
      } else if (seen_sync) {
        flag_gap();
      }
      if (s->pc % 4 != 0) throw DecodeError(i, "unaligned sync pc");
      pc = s->pc;
      anchored = true;
      seen_sync = true;
      ended = s->reason == SyncReason::kEnd;
    } else if (const auto* b = std::get_if<Branch>(&m.payload)) {
      if (anchored) {
        if (b->icnt == 0) throw DecodeError(i, "branch with zero instruction count");
        walker.walk(pc, b->icnt - 1, i);
        Instruction insn = walker.fetch(pc, i);
        if (!insn.is_control_flow()) throw DecodeError(i, "branch message at a non-branch");
        const std::int64_t target = static_cast<std::int64_t>(pc) + 4 + b->delta;
        if (insn.opcode != Opcode::kJmp && target != static_cast<std::int64_t>(pc) + 4 + insn.offset()) {
          throw DecodeError(i, "branch delta does not match the static target");
        }
        if (target < 0 || target > 0xFFFFFFFFll || target % 4 != 0 ||
            !image.contains(static_cast<std::uint32_t>(target))) {
          throw DecodeError(i, "branch target outside program image");
        }
        flow.pcs.push_back(pc);
        pc = static_cast<std::uint32_t>(target);
        ended = false;
      }
    } else if (std::holds_alternative<Overflow>(m.payload)) {
      if (anchored) flag_gap();
      anchored = false;
    }
    flow.pcs_after.push_back(flow.pcs.size());
  }
  if (anchored && !ended && options.stream_complete) {
    walker.run_to_halt(pc, messages.empty() ? 0 : messages.size() - 1);
    if (!flow.pcs_after.empty()) flow.pcs_after.back() = flow.pcs.size();
  }
  return flow;
}

// ---------------------------------------------------------------------------
// Data trace

DataTraceEncoder::DataTraceEncoder(int source, std::uint32_t sync_every)
    : source_(source), sync_every_(sync_every) {
  if (sync_every_ < 1) throw Error("sync_every must be at least 1");
}

void DataTraceEncoder::push(const DataRecord& a, std::vector<TraceMessage>& out) {
  DataAccess d;
  d.absolute = count_ % sync_every_ == 0;
  d.addr = d.absolute ? static_cast<std::int64_t>(a.addr)
                      : static_cast<std::int64_t>(a.addr) - static_cast<std::int64_t>(prev_addr_);
  d.size = a.size;
  d.write = a.kind == AccessKind::kWrite;
  d.value = a.value;
  TraceMessage m;
  m.source = source_;
  m.cycle = a.cycle;
  m.payload = d;
  out.push_back(std::move(m));
  prev_addr_ = a.addr;
  ++count_;
}

std::vector<TraceMessage> encode_data(std::span<const DataRecord> accesses,
                                      std::uint32_t sync_every) {
  std::vector<TraceMessage> out;
  if (accesses.empty()) return out;
  DataTraceEncoder enc(accesses.front().source, sync_every);
  for (const auto& a : accesses) enc.push(a, out);
  return out;
}

std::vector<DataRecord> decode_data(std::span<const TraceMessage> messages) {
  struct Base {
    std::optional<std::uint32_t> addr;
    bool lost = false;
  };
  std::map<int, Base> bases;
  std::vector<DataRecord> out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const TraceMessage& m = messages[i];
    Base& base = bases[m.source];
    if (std::holds_alternative<Overflow>(m.payload)) {
      base.addr.reset();
      base.lost = true;
      continue;
    }
    const auto* d = std::get_if<DataAccess>(&m.payload);
    if (!d) continue;
    if (d->size != 1 && d->size != 2 && d->size != 4) throw DecodeError(i, "bad access size");
    std::uint32_t addr;
    if (d->absolute) {
      addr = static_cast<std::uint32_t>(d->addr);
    } else if (base.addr) {
      addr = *base.addr + static_cast<std::uint32_t>(d->addr);
    } else if (base.lost) {
      continue;
    } else {
      throw DecodeError(i, "address delta without a preceding absolute address");
    }
    base.addr = addr;
    out.push_back(DataRecord{m.source, m.cycle, addr, d->value, d->size,
                             d->write ? AccessKind::kWrite : AccessKind::kRead});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Framing

namespace {

int size_code(std::uint8_t size) {
  switch (size) {
    case 1: return 0;
    case 2: return 1;
    case 4: return 2;
  }
  throw Error("data access size must be 1, 2 or 4");
}

void put_payload(const TraceMessage& m, std::vector<std::uint8_t>& p) {
  put_uvarint(p, m.ts);
  put_uvarint(p, m.seq);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ProgSync>) {
          put_uvarint(p, v.pc);
          put_uvarint(p, v.icnt);
          p.push_back(static_cast<std::uint8_t>(v.reason));
        } else if constexpr (std::is_same_v<T, Branch>) {
          put_uvarint(p, v.icnt);
          put_uvarint(p, zigzag_encode(v.delta));
        } else if constexpr (std::is_same_v<T, DataAccess>) {
          std::uint8_t flags = static_cast<std::uint8_t>(size_code(v.size));
          if (v.write) flags |= 0x04;
          if (v.absolute) flags |= 0x08;
          p.push_back(flags);
          if (v.absolute) {
            put_uvarint(p, static_cast<std::uint32_t>(v.addr));
          } else {
            put_uvarint(p, zigzag_encode(v.addr));
          }
          for (int k = 0; k < v.size; ++k) p.push_back(static_cast<std::uint8_t>(v.value >> (8 * k)));
        } else if constexpr (std::is_same_v<T, Mark>) {
          put_uvarint(p, v.id);
        } else if constexpr (std::is_same_v<T, TsSync>) {
          put_uvarint(p, v.cycle);
        } else if constexpr (std::is_same_v<T, Overflow>) {
          p.push_back(static_cast<std::uint8_t>(v.reason));
          put_uvarint(p, v.count);
        }
      },
      m.payload);
}

// Parses one frame at `pos`. On failure returns an error string and leaves
// `pos` untouched.
std::optional<std::string> parse_frame(std::span<const std::uint8_t> in, std::size_t& pos,
                                       TraceMessage& m) {
  std::size_t at = pos;
  if (in.size() - at < 2) return "truncated frame header";
  const std::uint8_t source = in[at++];
  const std::uint8_t kind = in[at++];
  if (kind < 1 || kind > 6) return "unknown message kind";
  auto len = get_uvarint(in, at);
  if (!len) return "bad payload length";
  if (*len > in.size() - at || in.size() - at - *len < 1) return "truncated frame";
  const std::size_t payload_start = at;
  const std::size_t payload_end = at + static_cast<std::size_t>(*len);
  if (crc8(in.subspan(pos, payload_end - pos)) != in[payload_end]) return "crc mismatch";

  auto body = in.subspan(0, payload_end);
  std::size_t p = payload_start;
  auto uv = [&](std::uint64_t max) -> std::optional<std::uint64_t> {
    auto v = get_uvarint(body, p);
    if (!v || *v > max) return std::nullopt;
    return v;
  };
  auto byte = [&]() -> std::optional<std::uint8_t> {
    if (p >= body.size()) return std::nullopt;
    return body[p++];
  };
  constexpr std::uint64_t kU32 = 0xFFFFFFFFu;
  constexpr std::uint64_t kU64 = ~std::uint64_t{0};

  TraceMessage out;
  out.source = source;
  auto ts = uv(kU64);
  auto seq = uv(kU64);
  if (!ts || !seq) return "bad message prefix";
  out.ts = *ts;
  out.seq = *seq;
  switch (static_cast<MessageKind>(kind)) {
    case MessageKind::kProgSync: {
      auto pc = uv(kU32);
      auto icnt = uv(kU32);
      auto reason = byte();
      if (!pc || !icnt || !reason || *reason > 3) return "bad PROG_SYNC payload";
      out.payload = ProgSync{static_cast<std::uint32_t>(*pc), static_cast<std::uint32_t>(*icnt),
                             static_cast<SyncReason>(*reason)};
      break;
    }
    case MessageKind::kBranch: {
      auto icnt = uv(kU32);
      auto delta = uv(kU64);
      if (!icnt || !delta) return "bad BRANCH payload";
      out.payload = Branch{static_cast<std::uint32_t>(*icnt), zigzag_decode(*delta)};
      break;
    }
    case MessageKind::kData: {
      auto flags = byte();
      if (!flags || (*flags & 0xF0) || (*flags & 0x03) == 3) return "bad DATA flags";
      DataAccess d;
      d.size = static_cast<std::uint8_t>(1u << (*flags & 0x03));
      d.write = *flags & 0x04;
      d.absolute = *flags & 0x08;
      auto addr = uv(d.absolute ? kU32 : kU64);
      if (!addr) return "bad DATA address";
      d.addr = d.absolute ? static_cast<std::int64_t>(*addr) : zigzag_decode(*addr);
      if (body.size() - p < d.size) return "truncated DATA value";
      d.value = 0;
      for (int k = 0; k < d.size; ++k) d.value |= static_cast<std::uint32_t>(body[p++]) << (8 * k);
      out.payload = d;
      break;
    }
    case MessageKind::kMark: {
      auto id = uv(kU32);
      if (!id) return "bad MARK payload";
      out.payload = Mark{static_cast<std::uint32_t>(*id)};
      break;
    }
    case MessageKind::kTsSync: {
      auto cycle = uv(kU64);
      if (!cycle) return "bad TS_SYNC payload";
      out.payload = TsSync{*cycle};
      break;
    }
    case MessageKind::kOverflow: {
      auto reason = byte();
      auto count = uv(kU64);
      if (!reason || *reason > 2 || !count) return "bad OVERFLOW payload";
      out.payload = Overflow{static_cast<OverflowReason>(*reason), *count};
      break;
    }
  }
  if (p != payload_end) return "payload length mismatch";
  m = std::move(out);
  pos = payload_end + 1;
  return std::nullopt;
}

}  // namespace

void serialize_into(const TraceMessage& m, std::vector<std::uint8_t>& out) {
  if (m.source < 0 || m.source > 255) throw Error("source id must fit in one byte");
  std::vector<std::uint8_t> payload;
  put_payload(m, payload);
  const std::size_t start = out.size();
  out.push_back(static_cast<std::uint8_t>(m.source));
  out.push_back(static_cast<std::uint8_t>(m.kind()));
  put_uvarint(out, payload.size());
  out.insert(out.end(), payload.begin(), payload.end());
  out.push_back(crc8(std::span(out).subspan(start)));
}

std::vector<std::uint8_t> serialize(std::span<const TraceMessage> messages) {
  std::vector<std::uint8_t> out;
  for (const auto& m : messages) serialize_into(m, out);
  return out;
}

std::vector<TraceMessage> deserialize(std::span<const std::uint8_t> bytes) {
  std::vector<TraceMessage> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    TraceMessage m;
    if (auto err = parse_frame(bytes, pos, m)) throw DecodeError(pos, *err);
    out.push_back(std::move(m));
  }
  return out;
}

LenientFrames deserialize_lenient(std::span<const std::uint8_t> bytes) {
  LenientFrames r;
  std::size_t pos = 0;
  bool skipping = false;
  while (pos < bytes.size()) {
    TraceMessage m;
    if (parse_frame(bytes, pos, m)) {
      ++pos;
      ++r.skipped_bytes;
      skipping = true;
      continue;
    }
    if (skipping) ++r.resyncs;
    skipping = false;
    r.messages.push_back(std::move(m));
  }
  return r;
}

std::vector<std::vector<TraceMessage>> split_sources(std::span<const TraceMessage> messages) {
  std::map<int, std::vector<TraceMessage>> by_source;
  for (const auto& m : messages) {
    auto& s = by_source[m.source];
    if (!s.empty() && m.seq > s.back().seq + 1) {
      TraceMessage lost;
      lost.source = m.source;
      lost.seq = m.seq - 1;
      lost.ts = m.ts;
      lost.cycle = m.cycle;
      lost.payload = Overflow{OverflowReason::kLostFrames, m.seq - s.back().seq - 1};
      s.push_back(lost);
    }
    s.push_back(m);
  }
  std::vector<std::vector<TraceMessage>> out;
  out.reserve(by_source.size());
  for (auto& [id, s] : by_source) out.push_back(std::move(s));
  return out;
}

std::vector<TraceMessage> reconstruct(std::span<const std::uint8_t> frames,
                                      const TimestampConfig& config) {
  auto lenient = deserialize_lenient(frames);
  auto streams = split_sources(lenient.messages);
  for (auto& s : streams) s = recover_cycles(s, config, /*skip_to_first_sync=*/true);
  return merge(streams);
}

// ---------------------------------------------------------------------------
// Files

namespace {
constexpr std::array<std::uint8_t, 4> kMagic = {'M', 'C', 'D', 'S'};
}

std::vector<std::uint8_t> make_mtrc(std::span<const TraceMessage> messages) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.push_back(kMtrcVersion);
  for (const auto& m : messages) serialize_into(m, out);
  return out;
}

std::span<const std::uint8_t> mtrc_body(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw DecodeError(0, "not an .mtrc file");
  }
  if (bytes[4] != kMtrcVersion) throw DecodeError(4, "unsupported .mtrc version");
  return bytes.subspan(5);
}

std::vector<TraceMessage> parse_mtrc(std::span<const std::uint8_t> bytes) {
  auto body = mtrc_body(bytes);
  try {
    return deserialize(body);
  } catch (const DecodeError& e) {
    throw DecodeError(e.index() + 5, "corrupt frame in .mtrc file");
  }
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

nlohmann::json to_json(const TraceMessage& m) {
  nlohmann::json j;
  j["source"] = m.source;
  j["seq"] = m.seq;
  j["ts"] = m.ts;
  j["cycle"] = m.cycle;
  j["kind"] = std::string(kind_name(m.kind()));
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ProgSync>) {
          static constexpr const char* kReasons[] = {"start", "periodic", "resume", "end"};
          j["pc"] = v.pc;
          j["icnt"] = v.icnt;
          j["reason"] = kReasons[static_cast<int>(v.reason)];
        } else if constexpr (std::is_same_v<T, Branch>) {
          j["icnt"] = v.icnt;
          j["delta"] = v.delta;
        } else if constexpr (std::is_same_v<T, DataAccess>) {
          j[v.absolute ? "addr" : "addr_delta"] = v.addr;
          j["size"] = v.size;
          j["write"] = v.write;
          j["value"] = v.value;
        } else if constexpr (std::is_same_v<T, Mark>) {
          j["id"] = v.id;
        } else if constexpr (std::is_same_v<T, TsSync>) {
          j["full_cycle"] = v.cycle;
        } else if constexpr (std::is_same_v<T, Overflow>) {
          static constexpr const char* kReasons[] = {"timestamp_gap", "buffer_drop", "lost_frames"};
          j["reason"] = kReasons[static_cast<int>(v.reason)];
          j["count"] = v.count;
        }
      },
      m.payload);
  return j;
}

std::string to_jsonl(std::span<const TraceMessage> messages) {
  std::string out;
  for (const auto& m : messages) {
    out += to_json(m).dump();
    out += '\n';
  }
  return out;
}

}  // namespace mcds
