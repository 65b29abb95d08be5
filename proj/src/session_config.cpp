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

#include "mcds/session_config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "mcds/error.hpp"

namespace mcds {
namespace {

using nlohmann::json;

// Collects violations while walking the document; every accessor reports
// problems against the JSON path it was handed and returns a fallback.
class Checker {
 public:
  std::vector<std::string> violations;

  void fail(const std::string& path, const std::string& what) {
    violations.push_back((path.empty() ? std::string("<root>") : path) + ": " + what);
  }

  bool object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    fail(path, "expected an object");
    return false;
  }

  bool array(const json& j, const std::string& path) {
    if (j.is_array()) return true;
    fail(path, "expected an array");
    return false;
  }

  void keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) fail(join(path, it.key()), "unknown key");
    }
  }

  // Non-negative integer from a JSON number or a "0x"-prefixed/decimal string.
  std::optional<std::uint64_t> uint(const json& j, const std::string& path,
                                    std::uint64_t max = 0xFFFFFFFFu) {
    std::optional<std::uint64_t> v;
    if (j.is_number_unsigned()) {
      v = j.get<std::uint64_t>();
    } else if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
      v = static_cast<std::uint64_t>(j.get<std::int64_t>());
    } else if (j.is_string()) {
      const std::string s = j.get<std::string>();
      try {
        std::size_t used = 0;
        std::uint64_t parsed = std::stoull(s, &used, 0);
        if (used == s.size() && !s.empty() && s[0] != '-') v = parsed;
      } catch (const std::exception&) {
      }
    }
    if (!v) {
      fail(path, "expected a non-negative integer");
      return std::nullopt;
    }
    if (*v > max) {
      fail(path, "value " + std::to_string(*v) + " exceeds " + std::to_string(max));
      return std::nullopt;
    }
    return v;
  }

  template <typename T>
  void get_uint(const json& parent, const char* key, const std::string& path, T& out,
                std::uint64_t max) {
    if (!parent.contains(key)) return;
    if (auto v = uint(parent[key], join(path, key), max)) out = static_cast<T>(*v);
  }

  void get_bool(const json& parent, const char* key, const std::string& path, bool& out) {
    if (!parent.contains(key)) return;
    if (!parent[key].is_boolean()) {
      fail(join(path, key), "expected true or false");
      return;
    }
    out = parent[key].get<bool>();
  }

  std::optional<std::string> string(const json& j, const std::string& path) {
    if (j.is_string()) return j.get<std::string>();
    fail(path, "expected a string");
    return std::nullopt;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
  }
};

template <typename E>
std::optional<E> lookup(const std::string& name,
                        std::initializer_list<std::pair<const char*, E>> table) {
  for (const auto& [n, e] : table) {
    if (name == n) return e;
  }
  return std::nullopt;
}

// "core<N>" or "dma"; returns the block (source) index.
std::optional<int> block_index(const std::string& name, int cores) {
  if (name == "dma") return cores;
  if (name.rfind("core", 0) == 0 && name.size() > 4) {
    try {
      std::size_t used = 0;
      int n = std::stoi(name.substr(4), &used);
      if (used == name.size() - 4 && n >= 0 && n < cores) return n;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

std::optional<Destination> parse_destination(const std::string& name, int cores) {
  if (name.rfind("pin", 0) == 0 && name.size() == 4 && name[3] >= '0' &&
      name[3] < '0' + kExternalPins) {
    return Destination{Destination::Kind::kPin, name[3] - '0'};
  }
  auto b = block_index(name, cores);
  if (!b) return std::nullopt;
  if (*b == cores) return Destination{Destination::Kind::kDma, 0};
  return Destination{Destination::Kind::kCore, *b};
}

std::uint32_t bit_list(Checker& c, const json& j, const std::string& path, int limit) {
  std::uint32_t mask = 0;
  if (!c.array(j, path)) return 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (auto v = c.uint(j[i], Checker::index(path, i), static_cast<std::uint64_t>(limit - 1))) {
      mask |= 1u << *v;
    }
  }
  return mask;
}

void parse_actions(Checker& c, const json& j, const std::string& path, ActionSet& a) {
  if (!c.array(j, path)) return;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = Checker::index(path, i);
    auto name = c.string(j[i], p);
    if (!name) continue;
    if (*name == "BREAK_REQ") {
      a.break_req = true;
    } else if (*name == "SUSPEND_REQ") {
      a.suspend_req = true;
    } else if (*name == "TRACE_ON") {
      a.trace_on = true;
    } else if (*name == "TRACE_OFF") {
      a.trace_off = true;
    } else if (*name == "MARK") {
      a.mark = true;
    } else if (name->rfind("TRIGGER_OUT:", 0) == 0 && name->size() == 13 &&
               (*name)[12] >= '0' && (*name)[12] <= '7') {
      a.trigger_out |= static_cast<std::uint8_t>(1u << ((*name)[12] - '0'));
    } else {
      c.fail(p, "unknown action '" + *name + "'");
    }
  }
}

void parse_fsm(Checker& c, const json& j, const std::string& path, TriggerFsm& fsm) {
  if (!c.object(j, path)) return;
  c.keys(j, path, {"states", "counters", "transitions"});
  c.get_uint(j, "states", path, fsm.num_states, kMaxFsmStates);
  if (j.contains("counters") && c.array(j["counters"], Checker::join(path, "counters"))) {
    for (std::size_t i = 0; i < j["counters"].size(); ++i) {
      const json& cj = j["counters"][i];
      const std::string p = Checker::index(Checker::join(path, "counters"), i);
      if (!c.object(cj, p)) continue;
      c.keys(cj, p, {"threshold", "event"});
      CounterSpec spec;
      c.get_uint(cj, "threshold", p, spec.threshold, 0xFFFFFFFFu);
      c.get_uint(cj, "event", p, spec.count_event, kMaxComparators - 1);
      fsm.counters.push_back(spec);
    }
  }
  if (j.contains("transitions") && c.array(j["transitions"], Checker::join(path, "transitions"))) {
    for (std::size_t i = 0; i < j["transitions"].size(); ++i) {
      const json& tj = j["transitions"][i];
      const std::string p = Checker::index(Checker::join(path, "transitions"), i);
      if (!c.object(tj, p)) continue;
      c.keys(tj, p, {"from", "when", "unless", "elapsed", "next", "actions", "counters"});
      Transition t;
      if (tj.contains("from")) {
        if (tj["from"] == "any") {
          t.from_state = -1;
        } else if (auto v = c.uint(tj["from"], Checker::join(p, "from"), kMaxFsmStates - 1)) {
          t.from_state = static_cast<int>(*v);
        }
      }
      if (tj.contains("when")) t.hits_all = bit_list(c, tj["when"], Checker::join(p, "when"), kMaxComparators);
      if (tj.contains("unless")) {
        t.hits_none = bit_list(c, tj["unless"], Checker::join(p, "unless"), kMaxComparators);
      }
      if (tj.contains("elapsed")) {
        t.elapsed_all = static_cast<std::uint8_t>(
            bit_list(c, tj["elapsed"], Checker::join(p, "elapsed"), kMaxCounters));
      }
      c.get_uint(tj, "next", p, t.next_state, kMaxFsmStates - 1);
      if (tj.contains("actions")) parse_actions(c, tj["actions"], Checker::join(p, "actions"), t.actions);
      if (tj.contains("counters")) {
        const std::string cp = Checker::join(p, "counters");
        if (c.object(tj["counters"], cp)) {
          for (auto it = tj["counters"].begin(); it != tj["counters"].end(); ++it) {
            const std::string kp = Checker::join(cp, it.key());
            auto idx = c.uint(json(it.key()), kp, kMaxCounters - 1);
            auto op = it.value().is_string()
                          ? lookup<CounterOp>(it.value().get<std::string>(),
                                              {{"inc", CounterOp::kInc}, {"clear", CounterOp::kClear},
                                               {"none", CounterOp::kNone}})
                          : std::nullopt;
            if (!op) c.fail(kp, "expected \"inc\", \"clear\" or \"none\"");
            if (idx && op) t.counter_ops[*idx] = *op;
          }
        }
      }
      fsm.transitions.push_back(t);
    }
  }
  try {
    fsm.validate();
  } catch (const Error& e) {
    c.fail(path, e.what());
  }
}

void parse_block(Checker& c, const json& j, const std::string& path, int source, int cores,
                 TriggerBlockConfig& b) {
  if (!c.object(j, path)) return;
  c.keys(j, path, {"trace", "program_trace", "data_trace", "comparators", "fsm"});
  c.get_bool(j, "trace", path, b.trace_enabled);
  c.get_bool(j, "program_trace", path, b.program_trace);
  c.get_bool(j, "data_trace", path, b.data_trace);
  if (j.contains("comparators") && c.array(j["comparators"], Checker::join(path, "comparators"))) {
    std::set<int> ids;
    for (std::size_t i = 0; i < j["comparators"].size(); ++i) {
      const json& cj = j["comparators"][i];
      const std::string p = Checker::index(Checker::join(path, "comparators"), i);
      if (!c.object(cj, p)) continue;
      c.keys(cj, p, {"id", "kind", "op", "lo", "hi", "access", "source"});
      Comparator cmp;
      cmp.id = static_cast<int>(i);
      c.get_uint(cj, "id", p, cmp.id, kMaxComparators - 1);
      if (!ids.insert(cmp.id).second) c.fail(Checker::join(p, "id"), "duplicate comparator id");
      if (cj.contains("kind")) {
        auto k = cj["kind"].is_string()
                     ? lookup<ComparatorKind>(cj["kind"].get<std::string>(),
                                              {{"PC", ComparatorKind::kPc},
                                               {"DATA_ADDR", ComparatorKind::kDataAddr},
                                               {"DATA_VALUE", ComparatorKind::kDataValue},
                                               {"BUS_MASTER", ComparatorKind::kBusMaster}})
                     : std::nullopt;
        if (k) cmp.kind = *k; else c.fail(Checker::join(p, "kind"), "unknown comparator kind");
      }
      cmp.access = cmp.kind == ComparatorKind::kPc ? AccessFilter::kExec : AccessFilter::kAny;
      if (cj.contains("op")) {
        auto o = cj["op"].is_string()
                     ? lookup<CompareOp>(cj["op"].get<std::string>(),
                                         {{"EQ", CompareOp::kEq}, {"NEQ", CompareOp::kNeq},
                                          {"IN_RANGE", CompareOp::kInRange}})
                     : std::nullopt;
        if (o) cmp.op = *o; else c.fail(Checker::join(p, "op"), "unknown comparator op");
      }
      c.get_uint(cj, "lo", p, cmp.lo, 0xFFFFFFFFu);
      c.get_uint(cj, "hi", p, cmp.hi, 0xFFFFFFFFu);
      if (cj.contains("access")) {
        auto a = cj["access"].is_string()
                     ? lookup<AccessFilter>(cj["access"].get<std::string>(),
                                            {{"READ", AccessFilter::kRead},
                                             {"WRITE", AccessFilter::kWrite},
                                             {"EXEC", AccessFilter::kExec},
                                             {"ANY", AccessFilter::kAny}})
                     : std::nullopt;
        if (a) cmp.access = *a; else c.fail(Checker::join(p, "access"), "unknown access filter");
      }
      // A block watches its own master unless told otherwise.
      cmp.source = source;
      if (cj.contains("source")) {
        if (cj["source"] == "any") {
          cmp.source = kAnySource;
        } else if (auto s = cj["source"].is_string()
                                ? block_index(cj["source"].get<std::string>(), cores)
                                : std::nullopt) {
          cmp.source = *s;
        } else {
          c.fail(Checker::join(p, "source"), "expected \"any\", \"dma\" or \"core<N>\"");
        }
      }
      try {
        cmp.validate();
      } catch (const Error& e) {
        c.fail(p, e.what());
      }
      b.comparators.push_back(cmp);
    }
  }
  if (j.contains("fsm")) parse_fsm(c, j["fsm"], Checker::join(path, "fsm"), b.fsm);
}

void parse_emu(Checker& c, const json& j, SessionConfig& cfg) {
  const std::string path = "emu";
  if (!c.object(j, path)) return;
  c.keys(j, path, {"segments", "trace_mode", "ranges", "page"});
  const int nseg = static_cast<int>(cfg.machine.emu_size / EmuMemory::kSegmentSize);
  cfg.segments.assign(nseg, SegmentRole::kOff);
  if (j.contains("segments")) {
    const json& s = j["segments"];
    const std::string sp = "emu.segments";
    auto role = [&](const json& r, const std::string& p) -> std::optional<SegmentRole> {
      auto v = r.is_string() ? lookup<SegmentRole>(r.get<std::string>(),
                                                   {{"OFF", SegmentRole::kOff},
                                                    {"OVERLAY", SegmentRole::kOverlay},
                                                    {"TRACE", SegmentRole::kTrace}})
                             : std::nullopt;
      if (!v) c.fail(p, "expected OFF, OVERLAY or TRACE");
      return v;
    };
    if (s.is_array()) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string p = Checker::index(sp, i);
        if (static_cast<int>(i) >= nseg) {
          c.fail(p, "segment " + std::to_string(i) + " out of range (device has " +
                        std::to_string(nseg) + ")");
        } else if (auto r = role(s[i], p)) {
          cfg.segments[i] = *r;
        }
      }
    } else if (s.is_object()) {
      for (auto it = s.begin(); it != s.end(); ++it) {
        const std::string p = Checker::join(sp, it.key());
        auto idx = c.uint(json(it.key()), p, 0xFFFF);
        if (!idx) continue;
        if (static_cast<int>(*idx) >= nseg) {
          c.fail(p, "segment " + std::to_string(*idx) + " out of range (device has " +
                        std::to_string(nseg) + ")");
        } else if (auto r = role(it.value(), p)) {
          cfg.segments[*idx] = *r;
        }
      }
    } else {
      c.fail(sp, "expected an array or an object keyed by segment index");
    }
  }
  if (j.contains("trace_mode")) {
    auto m = j["trace_mode"].is_string()
                 ? lookup<TraceMode>(j["trace_mode"].get<std::string>(),
                                     {{"CIRCULAR", TraceMode::kCircular},
                                      {"FILL_ONCE", TraceMode::kFillOnce}})
                 : std::nullopt;
    if (m) cfg.trace_mode = *m; else c.fail("emu.trace_mode", "expected CIRCULAR or FILL_ONCE");
  }
  c.get_uint(j, "page", path, cfg.initial_page, 1);
  if (j.contains("ranges") && c.array(j["ranges"], "emu.ranges")) {
    for (std::size_t i = 0; i < j["ranges"].size(); ++i) {
      const json& rj = j["ranges"][i];
      const std::string p = Checker::index("emu.ranges", i);
      if (!c.object(rj, p)) continue;
      c.keys(rj, p, {"id", "flash_base", "size", "page0", "page1", "enabled", "fill_from_flash"});
      OverlaySpec o;
      o.range.id = static_cast<int>(i);
      o.range.enabled = true;
      c.get_uint(rj, "id", p, o.range.id, 0xFFFF);
      c.get_uint(rj, "flash_base", p, o.range.flash_base, 0xFFFFFFFFu);
      c.get_uint(rj, "size", p, o.range.size, 0xFFFFFFFFu);
      c.get_uint(rj, "page0", p, o.range.dest_page0, 0xFFFFFFFFu);
      c.get_uint(rj, "page1", p, o.range.dest_page1, 0xFFFFFFFFu);
      c.get_bool(rj, "enabled", p, o.range.enabled);
      c.get_bool(rj, "fill_from_flash", p, o.fill_from_flash);
      cfg.overlays.push_back(o);
    }
  }

  // Replay the layout on a scratch memory so the rules live in one place.
  try {
    EmuMemory scratch(cfg.machine.emu_size, cfg.machine.flash_latency);
    for (int s = 0; s < nseg; ++s) scratch.set_segment_role(s, cfg.segments[s]);
    std::set<int> ids;
    for (std::size_t i = 0; i < cfg.overlays.size(); ++i) {
      const OverlayRange& r = cfg.overlays[i].range;
      const std::string p = Checker::index("emu.ranges", i);
      if (r.id >= 0 && r.id < EmuMemory::kMaxRanges && !ids.insert(r.id).second) {
        c.fail(Checker::join(p, "id"), "range id " + std::to_string(r.id) + " defined twice");
        continue;
      }
      try {
        scratch.define_overlay_range(r);
      } catch (const Error& e) {
        c.fail(p, e.what());
      }
    }
  } catch (const Error& e) {
    c.fail("machine.emu_size", e.what());
  }
}

}  // namespace

SessionConfig parse_session_config(const json& doc, const std::filesystem::path& base_dir) {
  Checker c;
  SessionConfig cfg;
  if (!c.object(doc, "")) throw ConfigError(c.violations);
  c.keys(doc, "", {"machine", "images", "dma", "triggers", "matrix", "switch", "timestamps",
                   "sync_every", "emu", "daq", "transports", "run"});

  if (doc.contains("machine") && c.object(doc["machine"], "machine")) {
    const json& m = doc["machine"];
    c.keys(m, "machine", {"cores", "flash_latency", "ram_latency", "emu_latency", "emu_size"});
    c.get_uint(m, "cores", "machine", cfg.machine.num_cores, 8);
    c.get_uint(m, "flash_latency", "machine", cfg.machine.flash_latency, 64);
    c.get_uint(m, "ram_latency", "machine", cfg.machine.ram_latency, 64);
    c.get_uint(m, "emu_latency", "machine", cfg.machine.emu_latency, 64);
    c.get_uint(m, "emu_size", "machine", cfg.machine.emu_size, 16u << 20);
    if (cfg.machine.num_cores < 1) c.fail("machine.cores", "at least one core required");
    for (const char* k : {"flash_latency", "ram_latency", "emu_latency"}) {
      if (m.contains(k) && m[k] == 0) c.fail(Checker::join("machine", k), "latency must be >= 1");
    }
    if (cfg.machine.emu_size == 0 || cfg.machine.emu_size % EmuMemory::kSegmentSize != 0) {
      c.fail("machine.emu_size", "must be a non-zero multiple of 65536");
      cfg.machine.emu_size = EmuMemory::kDefaultSize;
    }
  }
  const int cores = std::max(cfg.machine.num_cores, 1);

  if (!doc.contains("images")) {
    c.fail("images", "at least one image is required");
  } else if (c.array(doc["images"], "images")) {
    std::set<int> entry_cores;
    for (std::size_t i = 0; i < doc["images"].size(); ++i) {
      const json& ij = doc["images"][i];
      const std::string p = Checker::index("images", i);
      if (!c.object(ij, p)) continue;
      c.keys(ij, p, {"path", "base", "core", "entry"});
      ImageSpec spec;
      if (!ij.contains("path")) {
        c.fail(Checker::join(p, "path"), "missing");
        continue;
      }
      auto path = c.string(ij["path"], Checker::join(p, "path"));
      if (!path) continue;
      spec.path = *path;
      if (ij.contains("base")) {
        if (auto v = c.uint(ij["base"], Checker::join(p, "base"))) spec.base = static_cast<std::uint32_t>(*v);
      }
      if (ij.contains("core")) {
        if (auto v = c.uint(ij["core"], Checker::join(p, "core"), static_cast<std::uint64_t>(cores - 1))) {
          spec.core = static_cast<int>(*v);
          if (!entry_cores.insert(*spec.core).second) {
            c.fail(Checker::join(p, "core"), "core " + std::to_string(*spec.core) + " already has an image");
          }
        }
      }
      if (ij.contains("entry")) {
        if (auto v = c.uint(ij["entry"], Checker::join(p, "entry"))) spec.entry = static_cast<std::uint32_t>(*v);
      }
      std::filesystem::path file = spec.path;
      if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
      const std::string ext = file.extension().string();
      try {
        if (ext == ".s" || ext == ".asm") {
          std::ifstream in(file);
          if (!in) throw Error("cannot open " + file.string());
          std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
          spec.image = assemble(text, spec.base.value_or(0));
        } else {
          if (!std::filesystem::exists(file)) throw Error("cannot open " + file.string());
          spec.image = load_image(file.string(), spec.base);
        }
      } catch (const Error& e) {
        c.fail(Checker::join(p, "path"), e.what());
        continue;
      }
      const std::uint32_t entry = spec.entry.value_or(spec.image.base_address);
      if (entry % 4 != 0) c.fail(Checker::join(p, "entry"), "entry point not word aligned");
      cfg.images.push_back(std::move(spec));
    }
  }

  if (doc.contains("dma") && c.object(doc["dma"], "dma")) {
    const json& d = doc["dma"];
    c.keys(d, "dma", {"src", "dst", "words"});
    DmaDescriptor desc;
    c.get_uint(d, "src", "dma", desc.src, 0xFFFFFFFFu);
    c.get_uint(d, "dst", "dma", desc.dst, 0xFFFFFFFFu);
    c.get_uint(d, "words", "dma", desc.words, 0xFFFFFFFFu);
    desc.active = desc.words > 0;
    cfg.dma = desc;
  }

  cfg.debug.blocks.resize(cores + 1);
  if (doc.contains("triggers") && c.object(doc["triggers"], "triggers")) {
    for (auto it = doc["triggers"].begin(); it != doc["triggers"].end(); ++it) {
      const std::string p = Checker::join("triggers", it.key());
      auto b = block_index(it.key(), cores);
      if (!b) {
        c.fail(p, "unknown trigger block (expected core<N> or dma)");
        continue;
      }
      parse_block(c, it.value(), p, *b, cores, cfg.debug.blocks[*b]);
    }
  }

  cfg.debug.matrix = TriggerMatrix::identity(cores + 1);
  if (doc.contains("matrix") && c.object(doc["matrix"], "matrix")) {
    cfg.debug.matrix = TriggerMatrix(cores + 1);
    for (auto it = doc["matrix"].begin(); it != doc["matrix"].end(); ++it) {
      const std::string p = Checker::join("matrix", it.key());
      auto src = cfg.debug.matrix.parse_source(it.key(), cores);
      std::uint32_t lines = bit_list(c, it.value(), p, kTriggerLines);
      if (!src) {
        c.fail(p, "unknown trigger source");
        continue;
      }
      cfg.debug.matrix.set_routes(*src, static_cast<std::uint8_t>(lines));
    }
  }

  if (doc.contains("switch") && c.object(doc["switch"], "switch")) {
    const json& s = doc["switch"];
    c.keys(s, "switch", {"delay", "entries"});
    c.get_uint(s, "delay", "switch", cfg.debug.switches.delay, 1'000'000);
    if (s.contains("entries") && c.array(s["entries"], "switch.entries")) {
      for (std::size_t i = 0; i < s["entries"].size(); ++i) {
        const json& ej = s["entries"][i];
        const std::string p = Checker::index("switch.entries", i);
        if (!c.object(ej, p)) continue;
        c.keys(ej, p, {"dest", "lines", "action"});
        SwitchEntry e;
        auto dest = ej.contains("dest") && ej["dest"].is_string()
                        ? parse_destination(ej["dest"].get<std::string>(), cores)
                        : std::nullopt;
        if (!dest) {
          c.fail(Checker::join(p, "dest"), "expected core<N>, dma or pin<N>");
          continue;
        }
        e.dest = *dest;
        if (ej.contains("lines")) {
          e.line_mask = static_cast<std::uint8_t>(bit_list(c, ej["lines"], Checker::join(p, "lines"), kTriggerLines));
        }
        auto act = ej.contains("action") && ej["action"].is_string()
                       ? lookup<SwitchAction>(ej["action"].get<std::string>(),
                                              {{"NONE", SwitchAction::kNone},
                                               {"BREAK", SwitchAction::kBreak},
                                               {"SUSPEND", SwitchAction::kSuspend},
                                               {"PULSE_OUT", SwitchAction::kPulseOut}})
                       : std::nullopt;
        if (!act) {
          c.fail(Checker::join(p, "action"), "expected NONE, BREAK, SUSPEND or PULSE_OUT");
          continue;
        }
        e.action = *act;
        cfg.debug.switches.entries.push_back(e);
      }
    }
    try {
      cfg.debug.switches.validate();
    } catch (const Error& e) {
      c.fail("switch", e.what());
    }
  }

  if (doc.contains("timestamps") && c.object(doc["timestamps"], "timestamps")) {
    const json& t = doc["timestamps"];
    c.keys(t, "timestamps", {"width", "sync_period"});
    int width = 16;
    c.get_uint(t, "width", "timestamps", width, 64);
    if (width >= 2 && width <= 32) cfg.debug.timestamps = TimestampConfig::with_width(width);
    c.get_uint(t, "sync_period", "timestamps", cfg.debug.timestamps.sync_period, ~std::uint64_t{0});
    cfg.debug.timestamps.width = width;
    try {
      cfg.debug.timestamps.validate();
    } catch (const Error& e) {
      c.fail("timestamps", e.what());
    }
  }
  c.get_uint(doc, "sync_every", "", cfg.debug.sync_every, 1u << 20);
  if (cfg.debug.sync_every < 2) c.fail("sync_every", "must be at least 2");

  if (doc.contains("emu")) {
    parse_emu(c, doc["emu"], cfg);
  } else {
    cfg.segments.assign(cfg.machine.emu_size / EmuMemory::kSegmentSize, SegmentRole::kOff);
  }

  if (doc.contains("daq") && c.array(doc["daq"], "daq")) {
    std::set<int> ids;
    for (std::size_t i = 0; i < doc["daq"].size(); ++i) {
      const json& dj = doc["daq"][i];
      const std::string p = Checker::index("daq", i);
      if (!c.object(dj, p)) continue;
      c.keys(dj, p, {"id", "period", "active", "entries"});
      xcp::DaqList l;
      l.id = static_cast<std::uint8_t>(i);
      c.get_uint(dj, "id", p, l.id, 255);
      if (!ids.insert(l.id).second) c.fail(Checker::join(p, "id"), "duplicate DAQ list id");
      c.get_uint(dj, "period", p, l.period, ~std::uint64_t{0});
      c.get_bool(dj, "active", p, l.active);
      if (dj.contains("entries") && c.array(dj["entries"], Checker::join(p, "entries"))) {
        for (std::size_t k = 0; k < dj["entries"].size(); ++k) {
          const json& ej = dj["entries"][k];
          const std::string ep = Checker::index(Checker::join(p, "entries"), k);
          if (!c.object(ej, ep)) continue;
          c.keys(ej, ep, {"addr", "len"});
          xcp::DaqEntry e;
          c.get_uint(ej, "addr", ep, e.addr, 0xFFFFFFFFu);
          c.get_uint(ej, "len", ep, e.len, 255);
          l.entries.push_back(e);
        }
      }
      try {
        l.validate();
      } catch (const Error& e) {
        c.fail(p, e.what());
      }
      cfg.daq.push_back(l);
    }
  }

  if (doc.contains("transports") && c.object(doc["transports"], "transports")) {
    const json& t = doc["transports"];
    c.keys(t, "transports", {"jtag", "usb"});
    auto latency = [&](const json& j, const std::string& p, std::chrono::nanoseconds& out) {
      std::uint64_t ns = static_cast<std::uint64_t>(out.count());
      c.get_uint(j, "latency_ns", p, ns, 1'000'000'000'000ull);
      if (ns == 0) c.fail(Checker::join(p, "latency_ns"), "latency must be positive");
      out = std::chrono::nanoseconds(ns);
    };
    if (t.contains("jtag") && c.object(t["jtag"], "transports.jtag")) {
      c.keys(t["jtag"], "transports.jtag", {"latency_ns"});
      latency(t["jtag"], "transports.jtag", cfg.transports.jtag_latency);
    }
    if (t.contains("usb") && c.object(t["usb"], "transports.usb")) {
      const json& u = t["usb"];
      c.keys(u, "transports.usb", {"latency_ns", "host", "port"});
      latency(u, "transports.usb", cfg.transports.usb_latency);
      if (u.contains("host")) {
        if (auto h = c.string(u["host"], "transports.usb.host")) cfg.transports.usb_host = *h;
      }
      if (u.contains("port")) {
        std::uint16_t port = 0;
        c.get_uint(u, "port", "transports.usb", port, 65535);
        cfg.transports.usb_port = port;
      }
    }
  }

  if (doc.contains("run") && c.object(doc["run"], "run")) {
    c.keys(doc["run"], "run", {"max_cycles"});
    c.get_uint(doc["run"], "max_cycles", "run", cfg.max_cycles, ~std::uint64_t{0});
    if (cfg.max_cycles == 0) c.fail("run.max_cycles", "must be at least 1");
  }

  if (!c.violations.empty()) throw ConfigError(c.violations);
  return cfg;
}

SessionConfig load_session_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open config file"});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path.string() + ": " + e.what()});
  }
  return parse_session_config(doc, path.parent_path());
}

}  // namespace mcds
