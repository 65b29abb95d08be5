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

#include "mcds/mcds.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include "mcds/api_server.hpp"
#include "mcds/codec.hpp"
#include "mcds/error.hpp"
#include "mcds/isa.hpp"
#include "mcds/session.hpp"

struct mcds_session {
  std::unique_ptr<mcds::Session> impl;
};

struct mcds_server {
  std::unique_ptr<mcds::ApiServer> impl;
  int http_port = -1;
  int xcp_port = -1;
};

namespace {

thread_local std::string g_last_error;

struct BufferTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

mcds_status fail(mcds_status status, const std::string& what) {
  g_last_error = what;
  return status;
}

template <typename F>
mcds_status guard(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MCDS_OK;
  } catch (const mcds::ConfigError& e) {
    return fail(MCDS_ERR_CONFIG, e.what());
  } catch (const mcds::PhaseError& e) {
    return fail(MCDS_ERR_PHASE, e.what());
  } catch (const mcds::RequestError& e) {
    return fail(MCDS_ERR_REQUEST, e.what());
  } catch (const mcds::AssemblyError& e) {
    return fail(MCDS_ERR_REQUEST, e.what());
  } catch (const mcds::AccessError& e) {
    // Host-side reads and writes of unmapped addresses.
    return fail(MCDS_ERR_REQUEST, e.what());
  } catch (const mcds::DecodeError& e) {
    return fail(MCDS_ERR_DECODE, e.what());
  } catch (const BufferTooSmall& e) {
    return fail(MCDS_ERR_BUFFER, e.what());
  } catch (const std::exception& e) {
    return fail(MCDS_ERR_RUNTIME, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define MCDS_REQUIRE(cond, what) \
  do {                           \
    if (!(cond)) return fail(MCDS_ERR_REQUEST, what); \
  } while (0)

std::pair<std::string, int> split_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw mcds::RequestError("address must be host:port");
  std::string host = addr.substr(0, colon);
  int port = -1;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
  }
  if (port < 0 || port > 65535) throw mcds::RequestError("bad port in '" + addr + "'");
  return {host.empty() ? "127.0.0.1" : host, port};
}

mcds::ProgramImage load_any_image(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".s" || ext == ".asm") {
    auto bytes = mcds::read_file(path);
    return mcds::assemble(std::string(bytes.begin(), bytes.end()));
  }
  return mcds::load_image(path);
}

}  // namespace

extern "C" {

const char* mcds_version(void) { return "0.1.0"; }

const char* mcds_last_error(void) { return g_last_error.c_str(); }

void mcds_string_free(char* s) { std::free(s); }

mcds_status mcds_session_load(const char* config_path, mcds_session** out) {
  MCDS_REQUIRE(config_path && out, "null argument");
  return guard([&] { *out = new mcds_session{mcds::Session::load(config_path)}; });
}

mcds_status mcds_session_load_json(const char* config_json, const char* base_dir,
                                   mcds_session** out) {
  MCDS_REQUIRE(config_json && out, "null argument");
  return guard([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(config_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw mcds::ConfigError({e.what()});
    }
    auto cfg = mcds::parse_session_config(doc, base_dir ? base_dir : "");
    try {
      *out = new mcds_session{std::make_unique<mcds::Session>(std::move(cfg))};
    } catch (const mcds::ConfigError&) {
      throw;
    } catch (const mcds::Error& e) {
      throw mcds::ConfigError({e.what()});
    }
  });
}

void mcds_session_free(mcds_session* s) { delete s; }

mcds_status mcds_run(mcds_session* s, uint64_t cycles) {
  MCDS_REQUIRE(s, "null session");
  return guard([&] { s->impl->run(cycles); });
}

mcds_status mcds_halt(mcds_session* s) {
  MCDS_REQUIRE(s, "null session");
  return guard([&] { s->impl->halt(); });
}

mcds_status mcds_resume(mcds_session* s) {
  MCDS_REQUIRE(s, "null session");
  return guard([&] { s->impl->resume(); });
}

mcds_status mcds_step(mcds_session* s, uint64_t cycles) {
  MCDS_REQUIRE(s, "null session");
  return guard([&] { s->impl->step(cycles); });
}

mcds_status mcds_reset(mcds_session* s) {
  MCDS_REQUIRE(s, "null session");
  return guard([&] { s->impl->reset(); });
}

mcds_status mcds_set_pin(mcds_session* s, int pin, int level) {
  MCDS_REQUIRE(s, "null session");
  return guard([&] { s->impl->set_pin(pin, level != 0); });
}

mcds_status mcds_swbreak(mcds_session* s, uint32_t addr, int on) {
  MCDS_REQUIRE(s, "null session");
  return guard([&] { s->impl->swbreak(addr, on != 0); });
}

mcds_status mcds_phase_get(const mcds_session* s, mcds_phase* out) {
  MCDS_REQUIRE(s && out, "null argument");
  *out = static_cast<mcds_phase>(s->impl->phase());
  return MCDS_OK;
}

mcds_status mcds_cycle_get(const mcds_session* s, uint64_t* out) {
  MCDS_REQUIRE(s && out, "null argument");
  *out = s->impl->machine().cycle();
  return MCDS_OK;
}

mcds_status mcds_control_json(mcds_session* s, const char* command_json, char** state_out) {
  MCDS_REQUIRE(s && command_json, "null argument");
  return guard([&] {
    nlohmann::json cmd;
    try {
      cmd = nlohmann::json::parse(command_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw mcds::RequestError(std::string("malformed JSON: ") + e.what());
    }
    auto state = s->impl->control(cmd);
    if (state_out) *state_out = dup_string(state.dump());
  });
}

mcds_status mcds_state_json(const mcds_session* s, char** out) {
  MCDS_REQUIRE(s && out, "null argument");
  return guard([&] { *out = dup_string(s->impl->state_json().dump()); });
}

mcds_status mcds_read_memory(const mcds_session* s, uint32_t addr, uint8_t* out, size_t len) {
  MCDS_REQUIRE(s && (out || len == 0), "null argument");
  MCDS_REQUIRE(len <= 0xFFFFFFFFu, "length too large");
  return guard([&] {
    auto bytes = s->impl->machine().debug_read(addr, static_cast<std::uint32_t>(len));
    std::memcpy(out, bytes.data(), bytes.size());
  });
}

mcds_status mcds_calibrate(mcds_session* s, uint32_t addr, const uint8_t* bytes, size_t len,
                           uint64_t* elapsed_ns) {
  MCDS_REQUIRE(s && bytes, "null argument");
  return guard([&] {
    auto t = s->impl->calibrate(addr, std::span(bytes, len));
    if (elapsed_ns) *elapsed_ns = static_cast<uint64_t>(t.count());
  });
}

mcds_status mcds_cal_page_set(mcds_session* s, int page, uint64_t* elapsed_ns) {
  MCDS_REQUIRE(s, "null session");
  return guard([&] {
    auto t = s->impl->set_cal_page(page);
    if (elapsed_ns) *elapsed_ns = static_cast<uint64_t>(t.count());
  });
}

mcds_status mcds_cal_page_get(const mcds_session* s, int* page) {
  MCDS_REQUIRE(s && page, "null argument");
  *page = s->impl->machine().emu().cal_page();
  return MCDS_OK;
}

mcds_status mcds_xcp_request(mcds_session* s, uint16_t ctr, const uint8_t* payload,
                             size_t payload_len, uint8_t* resp, size_t resp_cap, size_t* resp_len,
                             uint64_t* elapsed_ns) {
  MCDS_REQUIRE(s && (payload || payload_len == 0) && resp_len, "null argument");
  return guard([&] {
    mcds::xcp::Frame req{ctr, std::vector<std::uint8_t>(payload, payload + payload_len)};
    auto r = s->impl->xcp_request(req);
    *resp_len = r.response.payload.size();
    if (elapsed_ns) *elapsed_ns = static_cast<uint64_t>(r.elapsed.count());
    if (r.response.payload.size() > resp_cap || !resp) {
      throw BufferTooSmall("response needs " + std::to_string(*resp_len) + " bytes");
    }
    std::memcpy(resp, r.response.payload.data(), r.response.payload.size());
  });
}

mcds_status mcds_export_trace(const mcds_session* s, const char* path, const char* format) {
  MCDS_REQUIRE(s && path && format, "null argument");
  const std::string f = format;
  MCDS_REQUIRE(f == "mtrc" || f == "jsonl", "format must be \"mtrc\" or \"jsonl\"");
  return guard([&] {
    s->impl->export_trace(path, f == "mtrc" ? mcds::TraceFormat::kMtrc : mcds::TraceFormat::kJsonl);
  });
}

mcds_status mcds_decode_file(const char* mtrc_path, const char* const* image_paths,
                             size_t image_count, int ts_width, const char* jsonl_out,
                             char** summary_json) {
  MCDS_REQUIRE(mtrc_path && jsonl_out, "null argument");
  MCDS_REQUIRE(image_count == 0 || image_paths, "null image list");
  MCDS_REQUIRE(ts_width == 0 || (ts_width >= 2 && ts_width <= 32), "ts_width must be 2-32");
  return guard([&] {
    const auto file = mcds::read_file(mtrc_path);
    const auto body = mcds::mtrc_body(file);
    const auto cfg = ts_width ? mcds::TimestampConfig::with_width(ts_width) : mcds::TimestampConfig{};
    const auto lenient = mcds::deserialize_lenient(body);
    const auto merged = mcds::reconstruct(body, cfg);

    std::map<int, std::vector<std::size_t>> by_source;  // merged indices
    for (std::size_t i = 0; i < merged.size(); ++i) by_source[merged[i].source].push_back(i);

    std::vector<nlohmann::json> lines;
    lines.reserve(merged.size());
    for (const auto& m : merged) lines.push_back(mcds::to_json(m));

    nlohmann::json summary;
    summary["messages"] = merged.size();
    summary["skipped_bytes"] = lenient.skipped_bytes;
    summary["resyncs"] = lenient.resyncs;
    summary["sources"] = nlohmann::json::object();
    for (const auto& [src, idx] : by_source) {
      nlohmann::json sj{{"messages", idx.size()}};
      const bool has_image = src >= 0 && static_cast<std::size_t>(src) < image_count &&
                             image_paths[src] && image_paths[src][0];
      if (has_image) {
        auto image = load_any_image(image_paths[src]);
        std::vector<mcds::TraceMessage> stream;
        for (auto i : idx) stream.push_back(merged[i]);
        auto flow = mcds::decode_program(stream, image);
        std::size_t prev = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) {
          const std::size_t upto = flow.pcs_after[k];
          if (upto > prev) {
            lines[idx[k]]["pcs"] = std::vector<std::uint32_t>(flow.pcs.begin() + prev,
                                                              flow.pcs.begin() + upto);
          }
          prev = upto;
        }
        sj["retires"] = flow.pcs.size();
        sj["gaps"] = flow.gaps.size();
      }
      summary["sources"][std::to_string(src)] = sj;
    }
    std::string text;
    for (const auto& l : lines) {
      text += l.dump();
      text += '\n';
    }
    mcds::write_file(jsonl_out, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    if (summary_json) *summary_json = dup_string(summary.dump());
  });
}

mcds_status mcds_assemble_file(const char* source_path, uint32_t base, const char* bin_out) {
  MCDS_REQUIRE(source_path && bin_out, "null argument");
  return guard([&] {
    auto bytes = mcds::read_file(source_path);
    auto image = mcds::assemble(std::string(bytes.begin(), bytes.end()), base);
    mcds::save_image(image, bin_out);
  });
}

mcds_status mcds_server_start(const char* config_path, const char* http_addr,
                              const char* xcp_addr, mcds_server** out) {
  MCDS_REQUIRE(config_path && http_addr && out, "null argument");
  return guard([&] {
    auto [host, port] = split_addr(http_addr);
    auto srv = std::make_unique<mcds_server>();
    srv->impl = std::make_unique<mcds::ApiServer>(mcds::Session::load(config_path));
    srv->http_port = srv->impl->start(host, port);
    if (xcp_addr) {
      auto [xhost, xport] = split_addr(xcp_addr);
      srv->xcp_port = srv->impl->start_xcp_tcp(xhost, static_cast<std::uint16_t>(xport));
    }
    *out = srv.release();
  });
}

int mcds_server_http_port(const mcds_server* srv) { return srv ? srv->http_port : -1; }

int mcds_server_xcp_port(const mcds_server* srv) { return srv ? srv->xcp_port : -1; }

void mcds_server_stop(mcds_server* srv) {
  if (!srv) return;
  srv->impl->stop();
  delete srv;
}

}  // extern "C"
