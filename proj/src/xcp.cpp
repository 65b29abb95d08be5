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

#include "mcds/xcp.hpp"

namespace mcds::xcp {
namespace {

std::uint32_t le32(std::span<const std::uint8_t> b) {
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::vector<std::uint8_t> negative(std::uint8_t code) { return {kNegative, code}; }

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  if (frame.payload.size() > 0xFFFF) throw Error("XCP payload exceeds 65535 bytes");
  const auto len = static_cast<std::uint16_t>(frame.payload.size());
  std::vector<std::uint8_t> out;
  out.reserve(4 + len);
  out.push_back(static_cast<std::uint8_t>(len));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(frame.ctr));
  out.push_back(static_cast<std::uint8_t>(frame.ctr >> 8));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

std::optional<Frame> take_frame(std::vector<std::uint8_t>& buffer) {
  if (buffer.size() < 4) return std::nullopt;
  const std::size_t len = buffer[0] | buffer[1] << 8;
  if (buffer.size() < 4 + len) return std::nullopt;
  Frame f;
  f.ctr = static_cast<std::uint16_t>(buffer[2] | buffer[3] << 8);
  f.payload.assign(buffer.begin() + 4, buffer.begin() + 4 + static_cast<std::ptrdiff_t>(len));
  buffer.erase(buffer.begin(), buffer.begin() + 4 + static_cast<std::ptrdiff_t>(len));
  return f;
}

void DaqList::validate() const {
  if (period == 0) throw Error("DAQ list " + std::to_string(id) + ": period must be positive");
  if (entries.empty()) throw Error("DAQ list " + std::to_string(id) + ": no entries");
  std::size_t total = 0;
  for (const auto& e : entries) {
    if (e.len < 1 || e.len > 8) {
      throw Error("DAQ list " + std::to_string(id) + ": entry length must be 1-8");
    }
    total += e.len;
  }
  if (total > 255) throw Error("DAQ list " + std::to_string(id) + ": more than 255 sample bytes");
}

Server::Server(Machine& machine, std::vector<DaqList> lists)
    : machine_(machine), lists_(std::move(lists)) {
  for (const auto& l : lists_) l.validate();
}

Frame Server::serve(const Frame& request) {
  return Frame{request.ctr, handle(request.payload)};
}

std::vector<std::uint8_t> Server::handle(std::span<const std::uint8_t> req) {
  if (req.empty()) return negative(kErrMalformed);
  const std::uint8_t cmd = req[0];
  switch (cmd) {
    case kConnect: case kDisconnect: case kGetStatus: case kShortUpload:
    case kDownload: case kSetCalPage: case kGetCalPage: case kStartStopDaq:
      break;
    default:
      return negative(kErrCmdUnknown);
  }
  if (!connected_ && cmd != kConnect) return negative(kErrSequence);

  try {
    switch (cmd) {
      case kConnect:
        if (req.size() > 2) return negative(kErrMalformed);
        connected_ = true;
        return {kPositive};
      case kDisconnect:
        if (req.size() != 1) return negative(kErrMalformed);
        connected_ = false;
        return {kPositive};
      case kGetStatus: {
        if (req.size() != 1) return negative(kErrMalformed);
        std::uint8_t active = 0;
        for (const auto& l : lists_) active += l.active ? 1 : 0;
        return {kPositive, 1, static_cast<std::uint8_t>(machine_.emu().cal_page()), active};
      }
      case kShortUpload: {
        if (req.size() != 6 || req[5] == 0) return negative(kErrMalformed);
        auto bytes = machine_.debug_read(le32(req.subspan(1, 4)), req[5]);
        std::vector<std::uint8_t> out{kPositive};
        out.insert(out.end(), bytes.begin(), bytes.end());
        return out;
      }
      case kDownload: {
        if (req.size() < 6) return negative(kErrMalformed);
        machine_.debug_write(le32(req.subspan(1, 4)), req.subspan(5));
        return {kPositive};
      }
      case kSetCalPage: {
        if (req.size() != 2) return negative(kErrMalformed);
        if (req[1] > 1) return negative(kErrOutOfRange);
        // One control access, exactly as the target would swap pages itself.
        machine_.debug_write32(kEmuControlBase + EmuMemory::kPageSelectReg, req[1]);
        return {kPositive};
      }
      case kGetCalPage:
        if (req.size() != 1) return negative(kErrMalformed);
        return {kPositive, static_cast<std::uint8_t>(machine_.emu().cal_page())};
      case kStartStopDaq: {
        if (req.size() != 3 || req[2] > 1) return negative(kErrMalformed);
        for (auto& l : lists_) {
          if (l.id == req[1]) {
            l.active = req[2] == 1;
            return {kPositive};
          }
        }
        return negative(kErrOutOfRange);
      }
    }
  } catch (const AccessError&) {
    return negative(kErrOutOfRange);
  }
  return negative(kErrCmdUnknown);
}

std::vector<Frame> Server::daq_tick(std::uint64_t cycle) {
  std::vector<Frame> out;
  for (const auto& l : lists_) {
    if (!l.active || (cycle + 1) % l.period != 0) continue;
    Frame f;
    f.ctr = daq_ctr_++;
    f.payload.push_back(l.id);
    for (const auto& e : l.entries) {
      try {
        auto bytes = machine_.debug_read(e.addr, e.len);
        f.payload.insert(f.payload.end(), bytes.begin(), bytes.end());
      } catch (const AccessError&) {
        // Unmapped entries sample as zero rather than stopping the list.
        f.payload.insert(f.payload.end(), e.len, 0);
      }
    }
    ++daq_frames_;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace mcds::xcp
