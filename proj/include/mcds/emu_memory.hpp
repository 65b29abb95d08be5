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
#include <optional>
#include <span>
#include <vector>

namespace mcds {

enum class SegmentRole : std::uint8_t { kOff, kOverlay, kTrace };
enum class TraceMode : std::uint8_t { kCircular, kFillOnce };

struct OverlayRange {
  int id = 0;
  std::uint32_t flash_base = 0;
  std::uint32_t size = 0;
  // Offsets into emulation RAM; each must lie in OVERLAY segments.
  std::uint32_t dest_page0 = 0;
  std::uint32_t dest_page1 = 0;
  bool enabled = false;

  bool covers(std::uint32_t addr) const {
    return addr >= flash_base && addr - flash_base < size;
  }
  friend bool operator==(const OverlayRange&, const OverlayRange&) = default;
};

struct RoutedAccess {
  enum class Target : std::uint8_t { kFlash, kEmu };
  Target target = Target::kFlash;
  // Flash address for kFlash, emulation RAM offset for kEmu.
  std::uint32_t address = 0;
  int latency = 0;

  friend bool operator==(const RoutedAccess&, const RoutedAccess&) = default;
};

// Emulation memory living in its own power domain: a block of SRAM split into
// 64 KiB segments that serve either as calibration overlay or trace storage,
// plus the address-mapping block that redirects flash ranges into it.
class EmuMemory {
 public:
  static constexpr std::uint32_t kSegmentSize = 64 * 1024;
  static constexpr std::uint32_t kDefaultSize = 512 * 1024;
  static constexpr int kMaxRanges = 16;
  static constexpr std::uint32_t kMinRangeSize = 1024;
  static constexpr std::uint32_t kMaxRangeSize = 32 * 1024;

  // Control register layout, relative to the control window base.
  static constexpr std::uint32_t kPageSelectReg = 0x00;
  static constexpr std::uint32_t kStatusReg = 0x04;
  static constexpr std::uint32_t kRangeRegBase = 0x10;
  static constexpr std::uint32_t kRangeRegStride = 0x10;
  static constexpr std::uint32_t kControlWindowSize = 0x1000;

  explicit EmuMemory(std::uint32_t total_bytes = kDefaultSize, int flash_latency = 2);

  std::uint32_t size() const { return static_cast<std::uint32_t>(ram_.size()); }
  int segment_count() const { return static_cast<int>(roles_.size()); }
  int flash_latency() const { return flash_latency_; }

  SegmentRole segment_role(int segment) const;
  // Throws Error for a bad index or when the segment is still in use.
  void set_segment_role(int segment, SegmentRole role);

  // Validates and stores a range (disabled unless range.enabled is set, in
  // which case the enable checks run as well).
  void define_overlay_range(const OverlayRange& range);
  void set_range_enabled(int id, bool enabled);
  void remove_overlay_range(int id);
  const std::optional<OverlayRange>& range(int id) const;
  std::vector<OverlayRange> ranges() const;

  RoutedAccess translate(std::uint32_t flash_addr) const;

  // Host-side select: host commands run between ticks, so this is already a
  // cycle boundary and takes effect immediately.
  void set_cal_page(int page);
  // Target-side select from inside a tick; applied by commit().
  void request_cal_page(int page);
  void commit();
  int cal_page() const { return active_page_; }

  std::uint8_t read(std::uint32_t offset) const { return ram_.at(offset); }
  void write(std::uint32_t offset, std::uint8_t value) { ram_.at(offset) = value; }
  std::span<const std::uint8_t> raw() const { return ram_; }

  std::uint32_t control_read32(std::uint32_t reg) const;
  // Only the page select register is writable; `deferred` is set for writes
  // issued by a bus master inside a tick.
  bool control_write32(std::uint32_t reg, std::uint32_t value, bool deferred);

  // Trace buffer over all TRACE segments in index order.
  void set_trace_mode(TraceMode mode);
  TraceMode trace_mode() const { return trace_mode_; }
  void set_trace_active(bool active) { trace_active_ = active; }
  bool trace_active() const { return trace_active_; }
  std::uint64_t trace_capacity() const;
  std::uint64_t trace_size() const;
  bool trace_wrapped() const { return wrapped_; }
  std::uint64_t trace_dropped() const { return dropped_; }
  std::uint64_t trace_write_offset() const { return write_offset_; }
  // Throws Error when no TRACE segment exists.
  void trace_append(std::span<const std::uint8_t> bytes);
  // Appends a frame as a unit. In fill-once mode the first frame that does
  // not fit closes the buffer until trace_clear, so the kept bytes are a
  // gap-free prefix of the stream. Returns false when the frame was dropped.
  bool trace_append_frame(std::span<const std::uint8_t> frame);
  bool trace_closed() const { return closed_; }
  std::vector<std::uint8_t> trace_read_all() const;
  void trace_clear();

 private:
  std::uint32_t trace_physical(std::uint64_t logical) const;
  void check_range_enable(const OverlayRange& r) const;
  bool dest_in_overlay(std::uint32_t dest, std::uint32_t size) const;

  std::vector<std::uint8_t> ram_;
  std::vector<SegmentRole> roles_;
  std::array<std::optional<OverlayRange>, kMaxRanges> ranges_{};
  int flash_latency_;
  int active_page_ = 0;
  std::optional<int> pending_page_;

  std::vector<int> trace_segments_;
  TraceMode trace_mode_ = TraceMode::kCircular;
  bool trace_active_ = false;
  std::uint64_t write_offset_ = 0;
  bool wrapped_ = false;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

}  // namespace mcds
