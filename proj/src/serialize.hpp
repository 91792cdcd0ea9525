// Copyright 2026 The popaudit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Token-level helpers for the text model dump. Doubles are written as
// hexadecimal floats so a save/load cycle is bit-exact.

#include <cstdlib>
#include <istream>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "popaudit/error.hpp"

namespace popaudit::detail {

inline std::string hex(double value) { return fmt::format("{:a}", value); }

inline std::string read_token(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw DataError("model dump truncated");
  return token;
}

inline void expect_token(std::istream& in, std::string_view expected) {
  const auto token = read_token(in);
  if (token != expected) {
    throw DataError(fmt::format("model dump: expected '{}', found '{}'",
                                expected, token));
  }
}

inline double read_double(std::istream& in) {
  const auto token = read_token(in);
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) {
    throw DataError(fmt::format("model dump: bad number '{}'", token));
  }
  return value;
}

inline unsigned long long read_unsigned(std::istream& in) {
  const auto token = read_token(in);
  char* end = nullptr;
  const auto value = std::strtoull(token.c_str(), &end, 10);
  if (token.empty() || token[0] == '-' ||
      end != token.c_str() + token.size()) {
    throw DataError(fmt::format("model dump: bad count '{}'", token));
  }
  return value;
}

}  // namespace popaudit::detail
