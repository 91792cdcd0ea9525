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
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "popaudit/cohorts.hpp"
#include "popaudit/dataset.hpp"
#include "popaudit/metadata.hpp"
#include "popaudit/recommend.hpp"

namespace popaudit {

// Hyperparameter grid for one algorithm: settings in declaration order,
// each with its candidate values. Grid points enumerate the cartesian
// product with the last setting varying fastest.
struct ParameterGrid {
  Algorithm algorithm = Algorithm::kMostPopular;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;

  std::size_t size() const;
  std::vector<AlgoConfig> expand(const AlgoConfig& base) const;
};

// Everything one experiment needs. Defaults:
// 10-item lists, an 80/20 split and 10 popularity groups.
//
// The file format is line-based `key = value` with `[section]` headers and
// `#` comments:
//
//   schema_version = 1
//   [data]       format, ratings, items, users, delimiter, user_column,
//                item_column, rating_column, timestamp_column, header,
//                rating_min, rating_max, catalog_delimiter,
//                catalog_item_column, catalog_genre_column,
//                genre_separator, catalog_header
//   [split]      min_user_ratings, min_item_ratings, ratio, seed, per_user
//   [evaluation] list_size, n_groups, grouping, relevance_threshold,
//                kl_epsilon, threads
//   [tuning]     validation_ratio
//   [output]     dir
//   [algorithm NAME]  any AlgoConfig setting
//   [grid NAME]       AlgoConfig setting = v1, v2, ...
//
// Relative paths resolve against the directory holding the config file.
struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  std::filesystem::path ratings_path;
  std::filesystem::path items_path;
  std::optional<std::filesystem::path> users_path;
  RatingsFormat ratings_format;
  CatalogFormat catalog_format;

  std::size_t min_user_ratings = 1;
  std::size_t min_item_ratings = 1;
  double split_ratio = 0.8;
  std::uint64_t seed = 42;
  bool per_user_split = false;

  int list_size = 10;
  int n_groups = 10;
  GroupingScheme grouping = GroupingScheme::kEqualWidth;
  std::optional<double> relevance_threshold;
  double kl_epsilon = 1e-6;
  unsigned threads = 0;

  double validation_ratio = 0.8;

  std::filesystem::path output_dir = "popaudit-out";

  std::vector<AlgoConfig> algorithms;
  std::vector<ParameterGrid> grids;

  // Throws UsageError for out-of-range values or duplicate algorithms, and
  // DataError when an input file is missing.
  void validate(bool check_paths = true) const;

  const AlgoConfig& algorithm(Algorithm a) const;
  const ParameterGrid* grid(Algorithm a) const;

  // Canonical rendering; parse_config of the output yields an equal config
  // (paths are written absolute).
  std::string render(bool include_output_dir = true) const;
};

ExperimentConfig parse_config(std::istream& in,
                              const std::filesystem::path& base_dir,
                              const std::string& source);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace popaudit
