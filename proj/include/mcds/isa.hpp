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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcds {

enum class Opcode : std::uint8_t {
  kNop = 0x00,
  kLdi = 0x01,
  kAdd = 0x02,
  kSub = 0x03,
  kLd = 0x04,
  kSt = 0x05,
  kBeq = 0x06,
  kBne = 0x07,
  kJmp = 0x08,
  kHalt = 0x09,
};

inline constexpr int kNumRegisters = 16;

// One 32-bit instruction word: opcode<<24 | rd<<20 | ra<<16 | imm16.
//
//   LDI  rd <- imm16 (ra == 0) or imm16 << 16 (ra != 0)
//   ADD  rd <- ra + rb, SUB rd <- ra - rb   (rb = imm16 bits 3:0)
//   LD   rd <- mem32[ra + sext(imm16)]
//   ST   mem32[ra + sext(imm16)] <- rd
//   BEQ/BNE  if (rd ==/!= ra) pc <- pc + 4 + sext(imm16)
//   JMP  pc <- ra + imm16
//   HALT core done; with imm16 bit 0 set it is a software breakpoint (BRK)
struct Instruction {
  Opcode opcode = Opcode::kNop;
  std::uint8_t rd = 0;
  std::uint8_t ra = 0;
  std::uint16_t imm16 = 0;

  std::uint8_t rb() const { return imm16 & 0xF; }
  std::int32_t offset() const { return static_cast<std::int16_t>(imm16); }
  bool is_break() const { return opcode == Opcode::kHalt && (imm16 & 1); }
  bool is_control_flow() const {
    return opcode == Opcode::kBeq || opcode == Opcode::kBne ||
           opcode == Opcode::kJmp;
  }

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

inline constexpr std::uint32_t kBreakWord = 0x09000001;

std::uint32_t encode(const Instruction& insn);

// Throws Error on an opcode outside the table.
Instruction decode(std::uint32_t word);
std::optional<Instruction> try_decode(std::uint32_t word);

std::string disassemble(const Instruction& insn);

struct ProgramImage {
  std::uint32_t base_address = 0;
  std::vector<std::uint8_t> bytes;
  std::map<std::string, std::uint32_t> symbols;

  std::uint32_t end_address() const {
    return base_address + static_cast<std::uint32_t>(bytes.size());
  }
  bool contains(std::uint32_t addr, std::uint32_t len = 4) const {
    return addr >= base_address && addr - base_address + len <= bytes.size();
  }
  // Little-endian word at an absolute address; throws AccessError outside.
  std::uint32_t word_at(std::uint32_t addr) const;
};

// Line-oriented assembler. Supports `label:`, `; comment`, `# comment`,
// the ten mnemonics plus BRK, and `.word <value>` for data. Throws
// AssemblyError carrying the 1-based line number.
ProgramImage assemble(std::string_view source, std::uint32_t base_address = 0);

// Raw little-endian image plus JSON sidecar {base_address, symbols}.
void save_image(const ProgramImage& image, const std::string& bin_path);
ProgramImage load_image(const std::string& bin_path,
                        std::optional<std::uint32_t> base_override = {});
std::string sidecar_path(const std::string& bin_path);

}  // namespace mcds
