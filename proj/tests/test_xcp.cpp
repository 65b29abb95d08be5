#include <cstring>

#include "doctest.h"
#include "mcds/debug_system.hpp"
#include "mcds/isa.hpp"
#include "mcds/xcp.hpp"

using namespace mcds;
using namespace mcds::xcp;

namespace {

std::vector<std::uint8_t> addr_bytes(std::uint32_t a) {
  return {static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(a >> 8),
          static_cast<std::uint8_t>(a >> 16), static_cast<std::uint8_t>(a >> 24)};
}

std::vector<std::uint8_t> upload(std::uint32_t a, std::uint8_t n) {
  auto v = addr_bytes(a);
  v.insert(v.begin(), kShortUpload);
  v.push_back(n);
  return v;
}

std::vector<std::uint8_t> download(std::uint32_t a, std::vector<std::uint8_t> data) {
  auto v = addr_bytes(a);
  v.insert(v.begin(), kDownload);
  v.insert(v.end(), data.begin(), data.end());
  return v;
}

std::vector<std::uint8_t> ask(Server& s, std::vector<std::uint8_t> payload) {
  return s.serve(Frame{7, std::move(payload)}).payload;
}

// One overlay range at flash 0x400, 1 KiB, page 0 at segment 0 and page 1
// right after it.
void overlay(Machine& m) {
  m.emu().set_segment_role(0, SegmentRole::kOverlay);
  OverlayRange r;
  r.id = 0;
  r.flash_base = 0x400;
  r.size = 0x400;
  r.dest_page0 = 0;
  r.dest_page1 = 0x400;
  r.enabled = true;
  m.emu().define_overlay_range(r);
}

}  // namespace

TEST_CASE("frames encode little endian and reassemble from a byte stream") {
  Frame f{0x1234, {0xFF, 0x00}};
  auto wire = encode_frame(f);
  CHECK(wire == std::vector<std::uint8_t>{0x02, 0x00, 0x34, 0x12, 0xFF, 0x00});

  std::vector<std::uint8_t> buf;
  for (std::size_t i = 0; i + 1 < wire.size(); ++i) {
    buf.push_back(wire[i]);
    CHECK_FALSE(take_frame(buf).has_value());
  }
  buf.push_back(wire.back());
  auto two = encode_frame(Frame{1, {}});
  buf.insert(buf.end(), two.begin(), two.end());
  CHECK(take_frame(buf) == f);
  auto empty = take_frame(buf);
  REQUIRE(empty.has_value());
  CHECK(empty->payload.empty());
  CHECK(buf.empty());
}

TEST_CASE("command errors") {
  Machine m;
  Server s(m);
  CHECK(ask(s, {kGetStatus}) == std::vector<std::uint8_t>{kNegative, kErrSequence});
  CHECK(ask(s, {0x42}) == std::vector<std::uint8_t>{kNegative, kErrCmdUnknown});
  CHECK(ask(s, {}) == std::vector<std::uint8_t>{kNegative, kErrMalformed});
  CHECK(ask(s, {kConnect, 0}) == std::vector<std::uint8_t>{kPositive});
  CHECK(s.connected());
  CHECK(ask(s, upload(kRamBase, 0)) == std::vector<std::uint8_t>{kNegative, kErrMalformed});
  CHECK(ask(s, upload(0x1000'0000, 4)) == std::vector<std::uint8_t>{kNegative, kErrOutOfRange});
  CHECK(ask(s, {kSetCalPage, 2}) == std::vector<std::uint8_t>{kNegative, kErrOutOfRange});
  CHECK(ask(s, {kStartStopDaq, 9, 1}) == std::vector<std::uint8_t>{kNegative, kErrOutOfRange});
  CHECK(ask(s, {kGetCalPage, 0}) == std::vector<std::uint8_t>{kNegative, kErrMalformed});
  CHECK(ask(s, {kDisconnect}) == std::vector<std::uint8_t>{kPositive});
  CHECK(ask(s, upload(kRamBase, 4)) == std::vector<std::uint8_t>{kNegative, kErrSequence});
  // The counter is echoed whatever the outcome.
  CHECK(s.serve(Frame{0xBEEF, {0x42}}).ctr == 0xBEEF);
}

TEST_CASE("calibrating the inactive page then swapping makes the new values visible") {
  Machine m;
  m.load(assemble(".word 0x11111111\n.word 0x22222222\n", 0x400));
  overlay(m);
  // Page 0 mirrors flash, page 1 gets new values while page 0 is live.
  m.debug_write32(kEmuRawBase + 0, 0x11111111);
  m.debug_write32(kEmuRawBase + 4, 0x22222222);
  Server s(m);
  ask(s, {kConnect});
  CHECK(ask(s, download(kEmuRawBase + 0x400, {0xAA, 0xBB, 0xCC, 0xDD})) ==
        std::vector<std::uint8_t>{kPositive});
  CHECK(ask(s, upload(0x400, 4)) == std::vector<std::uint8_t>{kPositive, 0x11, 0x11, 0x11, 0x11});
  CHECK(ask(s, {kSetCalPage, 1}) == std::vector<std::uint8_t>{kPositive});
  CHECK(ask(s, {kGetCalPage}) == std::vector<std::uint8_t>{kPositive, 1});
  CHECK(ask(s, upload(0x400, 4)) == std::vector<std::uint8_t>{kPositive, 0xAA, 0xBB, 0xCC, 0xDD});
  auto status = ask(s, {kGetStatus});
  REQUIRE(status.size() == 4);
  CHECK(status[2] == 1);
}

TEST_CASE("DAQ samples on its period without disturbing the target") {
  const char* src =
      "LDI R15, 0x20000000\nLDI R14, 1\nLDI R13, 300\n"
      "top: LD R1, [R15+0]\nADD R1, R1, R14\nST R1, [R15+0]\n"
      "SUB R13, R13, R14\nBNE R13, R0, top\nHALT\n";
  Machine plain;
  plain.load(assemble(src));
  std::vector<CycleEvents> want;
  for (int c = 0; c < 1000; ++c) want.push_back(plain.tick());

  Machine m;
  m.load(assemble(src));
  DebugSystem dbg(m, DebugConfig{});
  DaqList list{3, {{kRamBase, 4}, {0x0F00'0000, 2}}, 100, false};
  Server s(m, {list});
  ask(s, {kConnect});
  CHECK(ask(s, {kStartStopDaq, 3, 1}) == std::vector<std::uint8_t>{kPositive});
  std::vector<Frame> frames;
  for (int c = 0; c < 1000; ++c) {
    CHECK(dbg.tick() == want[static_cast<std::size_t>(c)]);
    for (auto& f : s.daq_tick(static_cast<std::uint64_t>(c))) {
      REQUIRE(f.payload.size() == 7);
      std::uint32_t v;
      std::memcpy(&v, f.payload.data() + 1, 4);
      CHECK(v == m.debug_read32(kRamBase));
      CHECK(f.payload[5] == 0);  // unmapped entry samples as zero
      frames.push_back(f);
    }
  }
  CHECK(frames.size() == 10);
  CHECK(s.daq_frames() == 10);
  CHECK(frames.front().ctr == 0);
  CHECK(frames.back().ctr == 9);

  CHECK_THROWS_AS(Server(m, {DaqList{1, {}, 10, false}}), Error);
  CHECK_THROWS_AS(Server(m, {DaqList{1, {{0, 4}}, 0, false}}), Error);
  CHECK_THROWS_AS(Server(m, {DaqList{1, {{0, 9}}, 1, false}}), Error);
}

TEST_CASE("round trip latency of the two link classes") {
  Machine m;
  Server s(m);
  Handler h = [&](const Frame& f) { return s.serve(f); };
  InProcessTransport jtag(h, TransportKind::kJtagLike);
  InProcessTransport usb(h, TransportKind::kUsbLike);
  auto a = jtag.roundtrip(Frame{1, {kConnect}});
  auto b = usb.roundtrip(Frame{2, {kGetStatus}});
  CHECK(a.response.payload == std::vector<std::uint8_t>{kPositive});
  CHECK(b.response.ctr == 2);
  CHECK(a.elapsed == std::chrono::microseconds(4));
  CHECK(b.elapsed == std::chrono::milliseconds(6));
  CHECK(b.elapsed / a.elapsed == 1500);
  jtag.roundtrip(Frame{3, {kGetCalPage}});
  CHECK(jtag.total_elapsed() == std::chrono::microseconds(8));
  jtag.close();
  CHECK_THROWS_AS(jtag.roundtrip(Frame{4, {kGetCalPage}}), TransportError);
  CHECK_THROWS_AS(InProcessTransport(h, TransportKind::kJtagLike, std::chrono::nanoseconds(0)),
                  Error);
}

TEST_CASE("the same commands work over TCP") {
  Machine m;
  m.debug_write32(kRamBase + 8, 0xCAFEF00D);
  Server s(m);
  TcpServer server("127.0.0.1", 0, [&](const Frame& f) { return s.serve(f); });
  REQUIRE(server.port() != 0);
  {
    TcpTransport client("127.0.0.1", server.port());
    CHECK(client.roundtrip(Frame{1, {kConnect}}).response.payload ==
          std::vector<std::uint8_t>{kPositive});
    auto r = client.roundtrip(Frame{2, upload(kRamBase + 8, 4)});
    CHECK(r.response.ctr == 2);
    CHECK(r.response.payload == std::vector<std::uint8_t>{kPositive, 0x0D, 0xF0, 0xFE, 0xCA});
    CHECK(r.elapsed == std::chrono::milliseconds(6));
    TcpTransport second("127.0.0.1", server.port(), TransportKind::kJtagLike);
    CHECK(second.roundtrip(Frame{9, {kGetCalPage}}).response.payload ==
          std::vector<std::uint8_t>{kPositive, 0});
    client.close();
    CHECK_THROWS_AS(client.roundtrip(Frame{3, {kGetCalPage}}), TransportError);
  }
  server.stop();
  CHECK_THROWS_AS(TcpTransport("127.0.0.1", server.port()), TransportError);
}
