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

#include <compare>
#include <cstdint>
#include <functional>

namespace popaudit {

// Dataset identifiers are integers in every supported format. Distinct
// wrapper types keep user and item ids from being mixed up.
struct UserId {
  std::int64_t value = 0;
  auto operator<=>(const UserId&) const = default;
};

struct ItemId {
  std::int64_t value = 0;
  auto operator<=>(const ItemId&) const = default;
};

}  // namespace popaudit

template <>
struct std::hash<popaudit::UserId> {
  std::size_t operator()(popaudit::UserId id) const noexcept {
    return std::hash<std::int64_t>{}(id.value);
  }
};

template <>
struct std::hash<popaudit::ItemId> {
  std::size_t operator()(popaudit::ItemId id) const noexcept {
    return std::hash<std::int64_t>{}(id.value);
  }
};
