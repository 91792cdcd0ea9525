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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "popaudit/dataset.hpp"
#include "popaudit/ids.hpp"
#include "popaudit/metadata.hpp"

namespace popaudit {

// Parameters of a MovieLens-shaped random dataset: Zipf item popularity,
// per-user genre tastes and a per-user appetite for popular items.
struct SyntheticSpec {
  std::size_t users = 50;
  std::size_t items = 60;
  std::size_t genres = 6;
  std::size_t min_ratings = 8;
  // Mean number of ratings beyond min_ratings (geometric tail).
  double extra_ratings = 12.0;
  double zipf_exponent = 1.0;
  double female_fraction = 0.3;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  std::vector<Rating> ratings;
  std::map<ItemId, std::vector<std::string>> genres;
  std::map<UserId, Gender> gender;
};

// Deterministic in the spec. Throws UsageError for degenerate sizes.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Writes ratings.dat, movies.dat and users.dat in the MovieLens 1M layout.
void write_movielens(const std::filesystem::path& dir, const SyntheticData& data);

}  // namespace popaudit
