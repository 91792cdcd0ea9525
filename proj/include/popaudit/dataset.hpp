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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popaudit/ids.hpp"

namespace popaudit {

struct RatingScale {
  double min = 1.0;
  double max = 5.0;
  bool operator==(const RatingScale&) const = default;
};

struct Rating {
  UserId user;
  ItemId item;
  double value = 0.0;
  // Parsed for completeness; no downstream computation reads it.
  std::int64_t timestamp = 0;
  bool operator==(const Rating&) const = default;
};

// One cell of a sparse row: the index of the other entity and the rating.
struct Entry {
  std::uint32_t index;
  double value;
};

// Immutable, validated collection of ratings with user- and item-major
// sparse indexes. Users and items are numbered densely in ascending id
// order, so index order and id order agree.
class RatingsDataset {
 public:
  // Throws DataError on an empty input, out-of-scale values or duplicate
  // (user, item) pairs.
  RatingsDataset(std::vector<Rating> ratings, RatingScale scale);

  std::span<const Rating> ratings() const { return ratings_; }
  const RatingScale& scale() const { return scale_; }
  std::size_t size() const { return ratings_.size(); }
  std::size_t num_users() const { return users_.size(); }
  std::size_t num_items() const { return items_.size(); }

  std::span<const UserId> users() const { return users_; }
  std::span<const ItemId> items() const { return items_; }
  UserId user_id(std::size_t index) const { return users_[index]; }
  ItemId item_id(std::size_t index) const { return items_[index]; }
  std::optional<std::size_t> user_index(UserId id) const;
  std::optional<std::size_t> item_index(ItemId id) const;

  // Items rated by user u, ascending item index.
  std::span<const Entry> user_row(std::size_t u) const {
    return {user_entries_.data() + user_offsets_[u],
            user_offsets_[u + 1] - user_offsets_[u]};
  }
  // Users who rated item i, ascending user index.
  std::span<const Entry> item_column(std::size_t i) const {
    return {item_entries_.data() + item_offsets_[i],
            item_offsets_[i + 1] - item_offsets_[i]};
  }

  std::optional<double> rating(UserId user, ItemId item) const;
  double mean_rating() const { return mean_; }

  // Order-independent FNV-1a digest of the (user, item, value) triples.
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  std::vector<Rating> ratings_;
  RatingScale scale_;
  std::vector<UserId> users_;
  std::vector<ItemId> items_;
  std::vector<std::size_t> user_offsets_;
  std::vector<Entry> user_entries_;
  std::vector<std::size_t> item_offsets_;
  std::vector<Entry> item_entries_;
  double mean_ = 0.0;
  std::uint64_t fingerprint_ = 0;
};

enum class FileFormat { kMovieLens1M, kDelimited };

// Column layout for delimited-generic rating files. Columns are 0-based;
// a negative timestamp column means there is none.
struct RatingsFormat {
  FileFormat kind = FileFormat::kMovieLens1M;
  std::string delimiter = ",";
  int user_column = 0;
  int item_column = 1;
  int rating_column = 2;
  int timestamp_column = 3;
  bool header = false;
  RatingScale scale;
};

RatingsDataset parse_ratings(const std::filesystem::path& path,
                             const RatingsFormat& format);
// `source` names the stream in error messages.
RatingsDataset read_ratings(std::istream& in, const RatingsFormat& format,
                            const std::string& source);
// Writes in the given format (header line included when the format has one);
// read_ratings of the output reproduces the dataset.
void write_ratings(std::ostream& out, const RatingsDataset& dataset,
                   const RatingsFormat& format);

// Repeatedly drops users and items below the thresholds until every
// remaining user and item meets them. Record order is preserved.
RatingsDataset core_filter(const RatingsDataset& dataset,
                           std::size_t min_user_ratings,
                           std::size_t min_item_ratings);

enum class Partition : std::uint8_t { kTrain, kTest };

struct TrainTestSplit {
  RatingsDataset train;
  RatingsDataset test;
  double ratio;
  std::uint64_t seed;
  // One entry per record of the source dataset, in record order.
  std::vector<Partition> assignment;
};

// Uniform random split over rating records. With `per_user` set, each
// user's ratings are split separately at the same ratio.
TrainTestSplit split(const RatingsDataset& dataset, double ratio,
                     std::uint64_t seed, bool per_user = false);

// Rebuilds a split from a persisted assignment.
TrainTestSplit apply_assignment(const RatingsDataset& dataset,
                                std::vector<Partition> assignment,
                                double ratio, std::uint64_t seed);

// Split manifest: CSV `record_index,partition` with partition train|test.
void write_manifest(std::ostream& out, std::span<const Partition> assignment);
std::vector<Partition> read_manifest(std::istream& in, std::size_t expected);

}  // namespace popaudit
