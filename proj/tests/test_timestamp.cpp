#include <random>

#include "doctest.h"
#include "mcds/error.hpp"
#include "mcds/timestamp.hpp"

using namespace mcds;

namespace {

TraceMessage mark_at(std::uint64_t cycle, int source = 0, std::uint32_t id = 0) {
  TraceMessage m;
  m.source = source;
  m.cycle = cycle;
  m.payload = Mark{id};
  return m;
}

TraceMessage ts_sync(std::uint64_t cycle, const TimestampConfig& cfg) {
  TraceMessage m;
  m.cycle = cycle;
  m.ts = cycle & cfg.mask();
  m.payload = TsSync{cycle};
  return m;
}

TraceMessage truncated(std::uint64_t ts) {
  TraceMessage m;
  m.ts = ts;
  m.payload = Mark{};
  return m;
}

// Smallest cycle at or after `from` whose low bits equal `ts`, found by walking.
std::uint64_t walk_unwrap(std::uint64_t from, std::uint64_t ts, std::uint64_t mask) {
  std::uint64_t c = from;
  while ((c & mask) != ts) ++c;
  return c;
}

}  // namespace

TEST_CASE("timestamps are the low W bits of the cycle") {
  std::vector<TraceMessage> in{mark_at(70000)};
  auto out = stamp(in, TimestampConfig{});
  REQUIRE(out.size() == 2);
  CHECK(out[1].ts == 4464u);
}

TEST_CASE("every stream opens with a TS_SYNC and seq counts all messages") {
  std::vector<TraceMessage> in{mark_at(5), mark_at(6), mark_at(6)};
  auto out = stamp(in, TimestampConfig{});
  REQUIRE(out.size() == 4);
  CHECK(out[0].kind() == MessageKind::kTsSync);
  CHECK(std::get<TsSync>(out[0].payload).cycle == 5u);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].seq == i);
}

TEST_CASE("a busy source gets a TS_SYNC every sync period") {
  const auto cfg = TimestampConfig::with_width(8);  // period 64
  std::vector<TraceMessage> in;
  for (std::uint64_t c = 0; c < 3 * cfg.sync_period; ++c) in.push_back(mark_at(c));
  auto out = stamp(in, cfg);
  int syncs = 0;
  for (const auto& m : out) syncs += m.kind() == MessageKind::kTsSync;
  CHECK(syncs >= 3);
}

TEST_CASE("unwrap across the counter wrap") {
  TimestampConfig cfg;
  std::vector<TraceMessage> s{ts_sync(65530, cfg), truncated(2)};
  auto r = recover_cycles(s, cfg);
  REQUIRE(r.size() == 2);
  CHECK(r[0].cycle == 65530u);
  CHECK(r[1].cycle == 65538u);
}

TEST_CASE("unwrap matches a walking oracle at every wrap position") {
  const auto cfg = TimestampConfig::with_width(8);
  for (std::uint64_t sync = 0; sync < 3 * cfg.modulus(); ++sync) {
    for (std::uint64_t d = 0; d < cfg.modulus() / 2; ++d) {
      const std::uint64_t ts = (sync + d) & cfg.mask();
      std::vector<TraceMessage> s{ts_sync(sync, cfg), truncated(ts)};
      auto r = recover_cycles(s, cfg);
      REQUIRE(r.size() == 2);
      REQUIRE(r[1].cycle == walk_unwrap(sync, ts, cfg.mask()));
    }
  }
}

TEST_CASE("recover inverts stamp for any spacing of events") {
  std::mt19937_64 rng(3);
  for (int width : {8, 16, 32}) {
    CAPTURE(width);
    const auto cfg = TimestampConfig::with_width(width);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<TraceMessage> in;
      std::uint64_t c = rng() % 1000;
      for (int i = 0; i < 300; ++i) {
        // Mostly short steps, sometimes several wraps at once.
        c += rng() % 4 == 0 ? rng() % (4 * cfg.modulus()) : rng() % 5;
        in.push_back(mark_at(c, 0, static_cast<std::uint32_t>(i)));
      }
      auto stamped = stamp(in, cfg);
      for (auto& m : stamped) m.cycle = 0;  // only ts travels
      auto back = recover_cycles(stamped, cfg);
      std::vector<std::uint64_t> got, want;
      for (const auto& m : back) {
        if (m.kind() == MessageKind::kMark) got.push_back(m.cycle);
      }
      for (const auto& m : in) want.push_back(m.cycle);
      REQUIRE(got == want);
    }
  }
}

TEST_CASE("an unsynchronised gap beyond half the modulus becomes an OVERFLOW") {
  const auto cfg = TimestampConfig::with_width(16);
  const std::uint64_t gap = cfg.modulus() + cfg.modulus() / 2;
  std::vector<TraceMessage> s{ts_sync(100, cfg), truncated((100 + gap) & cfg.mask()),
                              truncated((101 + gap) & cfg.mask()), ts_sync(100 + gap + 5, cfg),
                              truncated((100 + gap + 6) & cfg.mask())};
  auto r = recover_cycles(s, cfg);
  REQUIRE(r.size() == 4);
  CHECK(r[1].kind() == MessageKind::kOverflow);
  CHECK(std::get<Overflow>(r[1].payload).reason == OverflowReason::kTimestampGap);
  CHECK(r[2].kind() == MessageKind::kTsSync);
  CHECK(r[3].cycle == 100 + gap + 6);
}

TEST_CASE("streams must start with a TS_SYNC unless told to skip") {
  TimestampConfig cfg;
  std::vector<TraceMessage> s{truncated(4), ts_sync(10, cfg), truncated(12)};
  CHECK_THROWS_AS(recover_cycles(s, cfg), DecodeError);
  auto r = recover_cycles(s, cfg, true);
  REQUIRE(r.size() == 2);
  CHECK(r[1].cycle == 12u);
}

TEST_CASE("merge orders by cycle, then source, then seq") {
  auto at = [](int src, std::uint64_t cycle, std::uint64_t seq) {
    TraceMessage m = mark_at(cycle, src);
    m.seq = seq;
    return m;
  };
  std::vector<std::vector<TraceMessage>> streams{{at(0, 1, 0), at(0, 3, 1)},
                                                 {at(1, 2, 0), at(1, 4, 1)}};
  auto out = merge(streams);
  std::vector<std::uint64_t> cycles;
  for (const auto& m : out) cycles.push_back(m.cycle);
  CHECK(cycles == std::vector<std::uint64_t>{1, 2, 3, 4});
  CHECK(out[0].source == 0);
  CHECK(out[1].source == 1);

  std::vector<std::vector<TraceMessage>> tie{{at(1, 5, 0)}, {at(0, 5, 3), at(0, 5, 2)}};
  auto t = merge(tie);
  CHECK(t[0].source == 0);
  CHECK(t[0].seq == 2u);
  CHECK(t[2].source == 1);
  CHECK(merge(std::vector<std::vector<TraceMessage>>{}).empty());
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS((TimestampConfig{1, 1}.validate()), Error);
  CHECK_THROWS_AS((TimestampConfig{8, 128}.validate()), Error);
  CHECK_THROWS_AS((TimestampConfig{8, 0}.validate()), Error);
  CHECK_NOTHROW(TimestampConfig::with_width(32).validate());
}
