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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcds {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AssemblyError : public Error {
 public:
  AssemblyError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Raised by memory-mapped accessors when an address range is not backed.
class AccessError : public Error {
 public:
  using Error::Error;
};

// Trace decode failure. `index` is the message index for program/data decode
// and the byte offset for frame deserialization.
class DecodeError : public Error {
 public:
  DecodeError(std::size_t index, const std::string& what)
      : Error(what + " (at " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Configuration rejected. Carries every violation, each prefixed with the
// JSON path it refers to.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }
  std::vector<std::string> violations_;
};

// Illegal run-control command for the current session phase.
class PhaseError : public Error {
 public:
  using Error::Error;
};

// Malformed host command (bad JSON shape, unknown command, bad argument).
class RequestError : public Error {
 public:
  using Error::Error;
};

}  // namespace mcds
