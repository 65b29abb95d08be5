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

#include "mcds/emu_memory.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "mcds/error.hpp"

namespace mcds {
namespace {

bool overlaps(std::uint32_t a, std::uint32_t alen, std::uint32_t b, std::uint32_t blen) {
  return a < b + blen && b < a + alen;
}

std::string range_tag(int id) { return "overlay range " + std::to_string(id); }

}  // namespace

EmuMemory::EmuMemory(std::uint32_t total_bytes, int flash_latency)
    : ram_(total_bytes, 0), flash_latency_(flash_latency) {
  if (total_bytes == 0 || total_bytes % kSegmentSize != 0) {
    throw Error("emulation memory size must be a non-zero multiple of 64 KiB");
  }
  roles_.assign(total_bytes / kSegmentSize, SegmentRole::kOff);
}

SegmentRole EmuMemory::segment_role(int segment) const {
  if (segment < 0 || segment >= segment_count()) {
    throw Error("segment " + std::to_string(segment) + " out of range");
  }
  return roles_[segment];
}

void EmuMemory::set_segment_role(int segment, SegmentRole role) {
  SegmentRole current = segment_role(segment);
  if (current == role) return;
  if (current == SegmentRole::kOverlay) {
    for (const auto& r : ranges_) {
      if (!r || !r->enabled) continue;
      for (std::uint32_t dest : {r->dest_page0, r->dest_page1}) {
        if (overlaps(dest, r->size, segment * kSegmentSize, kSegmentSize)) {
          throw Error("segment " + std::to_string(segment) + " backs enabled " +
                      range_tag(r->id));
        }
      }
    }
  }
  if (current == SegmentRole::kTrace && trace_active_) {
    throw Error("segment " + std::to_string(segment) + " backs the active trace buffer");
  }
  roles_[segment] = role;
  trace_segments_.clear();
  for (int i = 0; i < segment_count(); ++i) {
    if (roles_[i] == SegmentRole::kTrace) trace_segments_.push_back(i);
  }
  trace_clear();
}

bool EmuMemory::dest_in_overlay(std::uint32_t dest, std::uint32_t size) const {
  if (size == 0 || dest >= ram_.size() || ram_.size() - dest < size) return false;
  for (std::uint32_t s = dest / kSegmentSize; s <= (dest + size - 1) / kSegmentSize; ++s) {
    if (roles_[s] != SegmentRole::kOverlay) return false;
  }
  return true;
}

void EmuMemory::define_overlay_range(const OverlayRange& r) {
  if (r.id < 0 || r.id >= kMaxRanges) {
    throw Error(range_tag(r.id) + ": at most 16 ranges (ids 0-15)");
  }
  if (r.size < kMinRangeSize || r.size > kMaxRangeSize || !std::has_single_bit(r.size)) {
    throw Error(range_tag(r.id) + ": size " + std::to_string(r.size) +
                " must be a power of two from 1 KiB to 32 KiB");
  }
  if (r.flash_base % r.size != 0) {
    throw Error(range_tag(r.id) + ": flash base not aligned to size");
  }
  if (ranges_[r.id] && ranges_[r.id]->enabled) {
    throw Error(range_tag(r.id) + ": cannot redefine an enabled range");
  }
  if (overlaps(r.dest_page0, r.size, r.dest_page1, r.size)) {
    throw Error(range_tag(r.id) + ": page 0 and page 1 areas overlap");
  }
  for (const auto& other : ranges_) {
    if (!other || other->id == r.id) continue;
    for (std::uint32_t a : {r.dest_page0, r.dest_page1}) {
      for (std::uint32_t b : {other->dest_page0, other->dest_page1}) {
        if (overlaps(a, r.size, b, other->size)) {
          throw Error(range_tag(r.id) + ": destination overlaps " + range_tag(other->id));
        }
      }
    }
  }
  if (r.enabled) check_range_enable(r);
  ranges_[r.id] = r;
}

void EmuMemory::check_range_enable(const OverlayRange& r) const {
  if (!dest_in_overlay(r.dest_page0, r.size) || !dest_in_overlay(r.dest_page1, r.size)) {
    throw Error(range_tag(r.id) + ": destination must lie wholly in OVERLAY segments");
  }
  for (const auto& other : ranges_) {
    if (!other || other->id == r.id || !other->enabled) continue;
    if (overlaps(r.flash_base, r.size, other->flash_base, other->size)) {
      throw Error(range_tag(r.id) + ": flash area overlaps enabled " + range_tag(other->id));
    }
  }
}

void EmuMemory::set_range_enabled(int id, bool enabled) {
  if (id < 0 || id >= kMaxRanges || !ranges_[id]) {
    throw Error(range_tag(id) + " is not defined");
  }
  if (enabled) check_range_enable(*ranges_[id]);
  ranges_[id]->enabled = enabled;
}

void EmuMemory::remove_overlay_range(int id) {
  if (id < 0 || id >= kMaxRanges || !ranges_[id]) {
    throw Error(range_tag(id) + " is not defined");
  }
  if (ranges_[id]->enabled) throw Error(range_tag(id) + " is enabled");
  ranges_[id].reset();
}

const std::optional<OverlayRange>& EmuMemory::range(int id) const {
  static const std::optional<OverlayRange> kNone;
  if (id < 0 || id >= kMaxRanges) return kNone;
  return ranges_[id];
}

std::vector<OverlayRange> EmuMemory::ranges() const {
  std::vector<OverlayRange> out;
  for (const auto& r : ranges_) {
    if (r) out.push_back(*r);
  }
  return out;
}

RoutedAccess EmuMemory::translate(std::uint32_t flash_addr) const {
  for (const auto& r : ranges_) {
    if (r && r->enabled && r->covers(flash_addr)) {
      std::uint32_t dest = active_page_ == 0 ? r->dest_page0 : r->dest_page1;
      return {RoutedAccess::Target::kEmu, dest + (flash_addr - r->flash_base), flash_latency_};
    }
  }
  return {RoutedAccess::Target::kFlash, flash_addr, flash_latency_};
}

void EmuMemory::set_cal_page(int page) {
  if (page != 0 && page != 1) throw Error("calibration page must be 0 or 1");
  active_page_ = page;
  pending_page_.reset();
}

void EmuMemory::request_cal_page(int page) {
  if (page != 0 && page != 1) throw Error("calibration page must be 0 or 1");
  pending_page_ = page;
}

void EmuMemory::commit() {
  if (pending_page_) {
    active_page_ = *pending_page_;
    pending_page_.reset();
  }
}

std::uint32_t EmuMemory::control_read32(std::uint32_t reg) const {
  if (reg == kPageSelectReg) return static_cast<std::uint32_t>(active_page_);
  if (reg == kStatusReg) {
    return static_cast<std::uint32_t>(segment_count()) |
           (trace_wrapped() ? 1u << 8 : 0u) | (trace_active_ ? 1u << 9 : 0u);
  }
  if (reg >= kRangeRegBase && reg < kRangeRegBase + kMaxRanges * kRangeRegStride) {
    int id = static_cast<int>((reg - kRangeRegBase) / kRangeRegStride);
    const auto& r = ranges_[id];
    if (!r) return 0;
    switch ((reg - kRangeRegBase) % kRangeRegStride) {
      case 0x0: return r->flash_base | (r->enabled ? 1u : 0u);
      case 0x4: return r->size;
      case 0x8: return r->dest_page0;
      case 0xC: return r->dest_page1;
      default: return 0;
    }
  }
  return 0;
}

bool EmuMemory::control_write32(std::uint32_t reg, std::uint32_t value, bool deferred) {
  if (reg != kPageSelectReg) return false;
  int page = static_cast<int>(value & 1);
  if (deferred) {
    request_cal_page(page);
  } else {
    set_cal_page(page);
  }
  return true;
}

void EmuMemory::set_trace_mode(TraceMode mode) {
  if (trace_active_ && mode != trace_mode_) {
    throw Error("cannot change trace mode while the trace buffer is active");
  }
  trace_mode_ = mode;
}

std::uint64_t EmuMemory::trace_capacity() const {
  return static_cast<std::uint64_t>(trace_segments_.size()) * kSegmentSize;
}

std::uint64_t EmuMemory::trace_size() const {
  return wrapped_ ? trace_capacity() : write_offset_;
}

std::uint32_t EmuMemory::trace_physical(std::uint64_t logical) const {
  return static_cast<std::uint32_t>(trace_segments_[logical / kSegmentSize] * kSegmentSize +
                                    logical % kSegmentSize);
}

void EmuMemory::trace_append(std::span<const std::uint8_t> bytes) {
  if (trace_segments_.empty()) throw Error("no TRACE segment configured");
  const std::uint64_t cap = trace_capacity();
  for (std::uint8_t b : bytes) {
    if (trace_mode_ == TraceMode::kFillOnce && write_offset_ == cap) {
      ++dropped_;
      continue;
    }
    ram_[trace_physical(write_offset_)] = b;
    ++write_offset_;
    if (write_offset_ == cap && trace_mode_ == TraceMode::kCircular) {
      write_offset_ = 0;
      wrapped_ = true;
    }
  }
}

bool EmuMemory::trace_append_frame(std::span<const std::uint8_t> frame) {
  if (trace_segments_.empty()) throw Error("no TRACE segment configured");
  if (trace_mode_ == TraceMode::kFillOnce &&
      (closed_ || write_offset_ + frame.size() > trace_capacity())) {
    closed_ = true;
    dropped_ += frame.size();
    return false;
  }
  trace_append(frame);
  return true;
}

std::vector<std::uint8_t> EmuMemory::trace_read_all() const {
  if (trace_segments_.empty()) throw Error("no TRACE segment configured");
  std::vector<std::uint8_t> out;
  out.reserve(trace_size());
  if (wrapped_) {
    for (std::uint64_t i = write_offset_; i < trace_capacity(); ++i) {
      out.push_back(ram_[trace_physical(i)]);
    }
  }
  for (std::uint64_t i = 0; i < write_offset_; ++i) out.push_back(ram_[trace_physical(i)]);
  return out;
}

void EmuMemory::trace_clear() {
  write_offset_ = 0;
  wrapped_ = false;
  dropped_ = 0;
  closed_ = false;
}

}  // namespace mcds
