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
#ifndef MCDS_MCDS_H_
#define MCDS_MCDS_H_

/* C interface to the simulator and debug host. All handles are opaque.
 * Every function returning mcds_status leaves a description of the last
 * failure, per thread, in mcds_last_error(). Strings handed out by the
 * library are released with mcds_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(MCDS_BUILDING_LIBRARY)
#define MCDS_API __attribute__((visibility("default")))
#else
#define MCDS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mcds_status {
  MCDS_OK = 0,
  MCDS_ERR_CONFIG = 1,   /* session config rejected */
  MCDS_ERR_RUNTIME = 2,  /* simulation, I/O or transport failure */
  MCDS_ERR_PHASE = 3,    /* command not allowed in the current phase */
  MCDS_ERR_REQUEST = 4,  /* malformed command or argument */
  MCDS_ERR_DECODE = 5,   /* trace or image decode failure */
  MCDS_ERR_BUFFER = 6    /* caller buffer too small */
} mcds_status;

typedef enum mcds_phase {
  MCDS_PHASE_IDLE = 0,
  MCDS_PHASE_RUNNING = 1,
  MCDS_PHASE_BROKEN = 2,
  MCDS_PHASE_DONE = 3
} mcds_phase;

typedef struct mcds_session mcds_session;
typedef struct mcds_server mcds_server;

MCDS_API const char* mcds_version(void);
MCDS_API const char* mcds_last_error(void);
MCDS_API void mcds_string_free(char* s);

/* Sessions */
MCDS_API mcds_status mcds_session_load(const char* config_path, mcds_session** out);
/* Relative image paths in `config_json` resolve against `base_dir` (may be NULL). */
MCDS_API mcds_status mcds_session_load_json(const char* config_json, const char* base_dir,
                                            mcds_session** out);
MCDS_API void mcds_session_free(mcds_session* s);

MCDS_API mcds_status mcds_run(mcds_session* s, uint64_t cycles);
MCDS_API mcds_status mcds_halt(mcds_session* s);
MCDS_API mcds_status mcds_resume(mcds_session* s);
MCDS_API mcds_status mcds_step(mcds_session* s, uint64_t cycles);
MCDS_API mcds_status mcds_reset(mcds_session* s);
MCDS_API mcds_status mcds_set_pin(mcds_session* s, int pin, int level);
MCDS_API mcds_status mcds_swbreak(mcds_session* s, uint32_t addr, int on);

MCDS_API mcds_status mcds_phase_get(const mcds_session* s, mcds_phase* out);
MCDS_API mcds_status mcds_cycle_get(const mcds_session* s, uint64_t* out);
/* JSON command as accepted by POST /api/control; *state_out receives the
 * resulting state JSON (optional). */
MCDS_API mcds_status mcds_control_json(mcds_session* s, const char* command_json,
                                       char** state_out);
MCDS_API mcds_status mcds_state_json(const mcds_session* s, char** out);

/* Zero-intrusion debug port. */
MCDS_API mcds_status mcds_read_memory(const mcds_session* s, uint32_t addr, uint8_t* out,
                                      size_t len);

/* Calibration through the in-process JTAG-like XCP link. elapsed_ns
 * (optional) receives the simulated link time. */
MCDS_API mcds_status mcds_calibrate(mcds_session* s, uint32_t addr, const uint8_t* bytes,
                                    size_t len, uint64_t* elapsed_ns);
MCDS_API mcds_status mcds_cal_page_set(mcds_session* s, int page, uint64_t* elapsed_ns);
MCDS_API mcds_status mcds_cal_page_get(const mcds_session* s, int* page);
/* Raw XCP packet (payload[0] = command) with counter `ctr`. */
MCDS_API mcds_status mcds_xcp_request(mcds_session* s, uint16_t ctr, const uint8_t* payload,
                                      size_t payload_len, uint8_t* resp, size_t resp_cap,
                                      size_t* resp_len, uint64_t* elapsed_ns);

/* format: "mtrc" or "jsonl". */
MCDS_API mcds_status mcds_export_trace(const mcds_session* s, const char* path,
                                       const char* format);

/* Offline tools */
/* Decodes an .mtrc file into JSONL. image_paths[i] (may be NULL entries)
 * is the program image of source i; program messages then carry the
 * reconstructed pcs. ts_width 0 selects the default. */
MCDS_API mcds_status mcds_decode_file(const char* mtrc_path, const char* const* image_paths,
                                      size_t image_count, int ts_width, const char* jsonl_out,
                                      char** summary_json);
MCDS_API mcds_status mcds_assemble_file(const char* source_path, uint32_t base,
                                        const char* bin_out);

/* HTTP API plus optional XCP TCP listener on background threads. Addresses
 * are "host:port"; port 0 picks a free one. xcp_addr may be NULL. */
MCDS_API mcds_status mcds_server_start(const char* config_path, const char* http_addr,
                                       const char* xcp_addr, mcds_server** out);
MCDS_API int mcds_server_http_port(const mcds_server* srv);
MCDS_API int mcds_server_xcp_port(const mcds_server* srv);
MCDS_API void mcds_server_stop(mcds_server* srv);

#ifdef __cplusplus
}
#endif

#endif /* MCDS_MCDS_H_ */
