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

#include "mcds/isa.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mcds/error.hpp"

namespace mcds {
namespace {

constexpr std::uint8_t kMaxOpcode = static_cast<std::uint8_t>(Opcode::kHalt);

const char* mnemonic(Opcode op) {
  switch (op) {
    case Opcode::kNop: return "NOP";
    case Opcode::kLdi: return "LDI";
    case Opcode::kAdd: return "ADD";
    case Opcode::kSub: return "SUB";
    case Opcode::kLd: return "LD";
    case Opcode::kSt: return "ST";
    case Opcode::kBeq: return "BEQ";
    case Opcode::kBne: return "BNE";
    case Opcode::kJmp: return "JMP";
    case Opcode::kHalt: return "HALT";
  }
  return "?";
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::vector<std::string> split_operands(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

class LineAssembler {
 public:
  LineAssembler(const std::map<std::string, std::uint32_t>& symbols, int line,
                std::uint32_t pc)
      : symbols_(symbols), line_(line), pc_(pc) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw AssemblyError(line_, what);
  }

  std::uint8_t reg(const std::string& tok) const {
    std::string t = upper(trim(tok));
    if (t.size() < 2 || t[0] != 'R') fail("expected register, got '" + tok + "'");
    int n = 0;
    auto [p, ec] = std::from_chars(t.data() + 1, t.data() + t.size(), n);
    if (ec != std::errc() || p != t.data() + t.size()) {
      fail("bad register '" + tok + "'");
    }
    if (n < 0 || n >= kNumRegisters) fail("register out of range: " + tok);
    return static_cast<std::uint8_t>(n);
  }

  bool is_reg(const std::string& tok) const {
    std::string t = upper(trim(tok));
    return t.size() >= 2 && t[0] == 'R' &&
           std::all_of(t.begin() + 1, t.end(),
                       [](unsigned char c) { return std::isdigit(c); });
  }

  // Integer literal (dec/hex, optional sign) or symbol.
  std::int64_t value(const std::string& tok) const {
    std::string t = trim(tok);
    if (t.empty()) fail("missing operand");
    bool neg = false;
    std::size_t i = 0;
    if (t[0] == '-' || t[0] == '+') {
      neg = t[0] == '-';
      i = 1;
    }
    std::string body = trim(t.substr(i));
    if (!body.empty() && std::isdigit(static_cast<unsigned char>(body[0]))) {
      int base = 10;
      std::size_t start = 0;
      if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
        base = 16;
        start = 2;
      }
      std::string digits;
      for (char c : body.substr(start)) {
        if (c != '_') digits += c;
      }
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, base);
      if (ec != std::errc() || p != digits.data() + digits.size()) {
        fail("bad number '" + tok + "'");
      }
      return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
    }
    auto it = symbols_.find(body);
    if (it == symbols_.end()) fail("unknown symbol '" + body + "'");
    return neg ? -static_cast<std::int64_t>(it->second) : it->second;
  }

  // [Ra], [Ra+off], [Ra-off], [off]
  std::pair<std::uint8_t, std::uint16_t> mem_operand(const std::string& tok) const {
    std::string t = trim(tok);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
      fail("expected memory operand [Ra+off], got '" + tok + "'");
    }
    std::string inner = trim(t.substr(1, t.size() - 2));
    std::uint8_t base = 0;
    std::int64_t off = 0;
    std::size_t split = inner.find_first_of("+-", 1);
    std::string head = trim(inner.substr(0, split));
    if (is_reg(head)) {
      base = reg(head);
      if (split != std::string::npos) {
        off = value(inner.substr(split + 1));
        if (inner[split] == '-') off = -off;
      }
    } else {
      off = value(inner);
    }
    if (off < -32768 || off > 32767) {
      // Allow absolute 16-bit addresses with R0 as base.
      if (!(base == 0 && off >= 0 && off <= 0xFFFF)) {
        fail("memory offset not representable: " + std::to_string(off));
      }
    }
    return {base, static_cast<std::uint16_t>(off & 0xFFFF)};
  }

  std::uint16_t branch_offset(const std::string& tok) const {
    std::int64_t target = value(tok);
    std::int64_t off = target - (static_cast<std::int64_t>(pc_) + 4);
    if (target % 4 != 0) fail("branch target not word aligned");
    if (off < -32768 || off > 32767) {
      fail("branch offset not representable: " + std::to_string(off));
    }
    return static_cast<std::uint16_t>(off & 0xFFFF);
  }

  void expect_count(const std::vector<std::string>& ops, std::size_t n,
                    const std::string& m) const {
    if (ops.size() != n) {
      fail(m + " expects " + std::to_string(n) + " operand(s), got " +
           std::to_string(ops.size()));
    }
  }

  std::uint32_t assemble(const std::string& m, const std::vector<std::string>& ops) const {
    Instruction i;
    if (m == ".WORD") {
      expect_count(ops, 1, m);
      std::int64_t v = value(ops[0]);
      if (v < -2147483648LL || v > 0xFFFFFFFFLL) fail(".word value out of range");
      return static_cast<std::uint32_t>(v);
    }
    if (m == "NOP") {
      expect_count(ops, 0, m);
      i.opcode = Opcode::kNop;
    } else if (m == "HALT" || m == "BRK") {
      expect_count(ops, 0, m);
      i.opcode = Opcode::kHalt;
      i.imm16 = m == "BRK" ? 1 : 0;
    } else if (m == "LDI") {
      expect_count(ops, 2, m);
      i.opcode = Opcode::kLdi;
      i.rd = reg(ops[0]);
      std::int64_t v = value(ops[1]);
      if (v >= 0 && v <= 0xFFFF) {
        i.imm16 = static_cast<std::uint16_t>(v);
      } else if (v > 0xFFFF && v <= 0xFFFFFFFFLL && (v & 0xFFFF) == 0) {
        i.ra = 1;
        i.imm16 = static_cast<std::uint16_t>(v >> 16);
      } else {
        fail("LDI immediate not representable: " + ops[1]);
      }
    } else if (m == "ADD" || m == "SUB") {
      expect_count(ops, 3, m);
      i.opcode = m == "ADD" ? Opcode::kAdd : Opcode::kSub;
      i.rd = reg(ops[0]);
      i.ra = reg(ops[1]);
      i.imm16 = reg(ops[2]);
    } else if (m == "LD" || m == "ST") {
      expect_count(ops, 2, m);
      i.opcode = m == "LD" ? Opcode::kLd : Opcode::kSt;
      i.rd = reg(ops[0]);
      auto [base, off] = mem_operand(ops[1]);
      i.ra = base;
      i.imm16 = off;
    } else if (m == "BEQ" || m == "BNE") {
      expect_count(ops, 3, m);
      i.opcode = m == "BEQ" ? Opcode::kBeq : Opcode::kBne;
      i.rd = reg(ops[0]);
      i.ra = reg(ops[1]);
      i.imm16 = branch_offset(ops[2]);
    } else if (m == "JMP") {
      i.opcode = Opcode::kJmp;
      if (ops.size() == 1 && is_reg(ops[0])) {
        i.ra = reg(ops[0]);
      } else if (ops.size() == 1) {
        std::int64_t v = value(ops[0]);
        if (v < 0 || v > 0xFFFF) fail("JMP target not representable: " + ops[0]);
        i.imm16 = static_cast<std::uint16_t>(v);
      } else if (ops.size() == 2) {
        i.ra = reg(ops[0]);
        std::int64_t v = value(ops[1]);
        if (v < 0 || v > 0xFFFF) fail("JMP offset not representable: " + ops[1]);
        i.imm16 = static_cast<std::uint16_t>(v);
      } else {
        fail("JMP expects 1 or 2 operands");
      }
    } else {
      fail("unknown mnemonic '" + m + "'");
    }
    return encode(i);
  }

 private:
  const std::map<std::string, std::uint32_t>& symbols_;
  int line_;
  std::uint32_t pc_;
};

struct SourceLine {
  int number;
  std::string mnemonic;
  std::vector<std::string> operands;
  std::uint32_t address;
};

bool valid_label(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.';
  });
}

}  // namespace

std::uint32_t encode(const Instruction& insn) {
  return static_cast<std::uint32_t>(insn.opcode) << 24 |
         static_cast<std::uint32_t>(insn.rd & 0xF) << 20 |
         static_cast<std::uint32_t>(insn.ra & 0xF) << 16 | insn.imm16;
}

std::optional<Instruction> try_decode(std::uint32_t word) {
  std::uint8_t op = static_cast<std::uint8_t>(word >> 24);
  if (op > kMaxOpcode) return std::nullopt;
  Instruction i;
  i.opcode = static_cast<Opcode>(op);
  i.rd = (word >> 20) & 0xF;
  i.ra = (word >> 16) & 0xF;
  i.imm16 = word & 0xFFFF;
  return i;
}

Instruction decode(std::uint32_t word) {
  auto i = try_decode(word);
  if (!i) {
    std::ostringstream os;
    os << "unknown opcode 0x" << std::hex << (word >> 24);
    throw Error(os.str());
  }
  return *i;
}

std::string disassemble(const Instruction& i) {
  std::ostringstream os;
  auto r = [](int n) { return "R" + std::to_string(n); };
  if (i.is_break()) return "BRK";
  os << mnemonic(i.opcode);
  switch (i.opcode) {
    case Opcode::kNop:
    case Opcode::kHalt:
      break;
    case Opcode::kLdi:
      os << ' ' << r(i.rd) << ", 0x" << std::hex
         << (i.ra ? static_cast<std::uint32_t>(i.imm16) << 16 : i.imm16);
      break;
    case Opcode::kAdd:
    case Opcode::kSub:
      os << ' ' << r(i.rd) << ", " << r(i.ra) << ", " << r(i.rb());
      break;
    case Opcode::kLd:
    case Opcode::kSt:
      os << ' ' << r(i.rd) << ", [" << r(i.ra) << (i.offset() < 0 ? "-" : "+")
         << std::abs(i.offset()) << ']';
      break;
    case Opcode::kBeq:
    case Opcode::kBne:
      os << ' ' << r(i.rd) << ", " << r(i.ra) << ", " << (i.offset() < 0 ? "-" : "+")
         << std::abs(i.offset());
      break;
    case Opcode::kJmp:
      os << ' ' << r(i.ra) << ", 0x" << std::hex << i.imm16;
      break;
  }
  return os.str();
}

std::uint32_t ProgramImage::word_at(std::uint32_t addr) const {
  if (!contains(addr)) throw AccessError("address outside program image");
  std::size_t o = addr - base_address;
  return static_cast<std::uint32_t>(bytes[o]) |
         static_cast<std::uint32_t>(bytes[o + 1]) << 8 |
         static_cast<std::uint32_t>(bytes[o + 2]) << 16 |
         static_cast<std::uint32_t>(bytes[o + 3]) << 24;
}

ProgramImage assemble(std::string_view source, std::uint32_t base_address) {
  if (base_address % 4 != 0) throw AssemblyError(0, "base address not word aligned");
  ProgramImage image;
  image.base_address = base_address;

  // Pass 1: labels and addresses.
  std::vector<SourceLine> lines;
  std::istringstream in{std::string(source)};
  std::string raw;
  int number = 0;
  std::uint32_t pc = base_address;
  while (std::getline(in, raw)) {
    ++number;
    std::string text = raw.substr(0, raw.find_first_of(";#"));
    text = trim(text);
    while (true) {
      auto colon = text.find(':');
      if (colon == std::string::npos) break;
      std::string label = trim(text.substr(0, colon));
      if (!valid_label(label)) throw AssemblyError(number, "bad label '" + label + "'");
      if (image.symbols.count(label)) {
        throw AssemblyError(number, "duplicate label '" + label + "'");
      }
      image.symbols[label] = pc;
      text = trim(text.substr(colon + 1));
    }
    if (text.empty()) continue;
    std::size_t sp = text.find_first_of(" \t");
    SourceLine line;
    line.number = number;
    line.mnemonic = upper(text.substr(0, sp));
    if (sp != std::string::npos) line.operands = split_operands(trim(text.substr(sp)));
    line.address = pc;
    lines.push_back(std::move(line));
    pc += 4;
  }

  // Pass 2: encode.
  image.bytes.reserve(lines.size() * 4);
  for (const auto& line : lines) {
    LineAssembler la(image.symbols, line.number, line.address);
    std::uint32_t w = la.assemble(line.mnemonic, line.operands);
    for (int b = 0; b < 4; ++b) image.bytes.push_back(static_cast<std::uint8_t>(w >> (8 * b)));
  }
  return image;
}

std::string sidecar_path(const std::string& bin_path) {
  std::filesystem::path p(bin_path);
  p.replace_extension(".json");
  return p.string();
}

void save_image(const ProgramImage& image, const std::string& bin_path) {
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot write " + bin_path);
  bin.write(reinterpret_cast<const char*>(image.bytes.data()),
            static_cast<std::streamsize>(image.bytes.size()));
  nlohmann::json side;
  side["base_address"] = image.base_address;
  side["symbols"] = image.symbols;
  std::ofstream js(sidecar_path(bin_path));
  if (!js) throw Error("cannot write " + sidecar_path(bin_path));
  js << side.dump(2) << '\n';
}

ProgramImage load_image(const std::string& bin_path,
                        std::optional<std::uint32_t> base_override) {
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw Error("cannot open image " + bin_path);
  ProgramImage image;
  image.bytes.assign(std::istreambuf_iterator<char>(bin), {});
  std::string side = sidecar_path(bin_path);
  if (std::filesystem::exists(side)) {
    std::ifstream js(side);
    auto j = nlohmann::json::parse(js, nullptr, false);
    if (j.is_discarded()) throw Error("malformed sidecar " + side);
    image.base_address = j.value("base_address", 0u);
    if (j.contains("symbols")) {
      image.symbols = j["symbols"].get<std::map<std::string, std::uint32_t>>();
    }
  }
  if (base_override) image.base_address = *base_override;
  return image;
}

}  // namespace mcds
