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

#include "popaudit/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <utility>

#include <fmt/format.h>

#include "popaudit/error.hpp"
#include "popaudit/random.hpp"
#include "text.hpp"

namespace popaudit {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t word) {
  for (int b = 0; b < 8; ++b) {
    h ^= (word >> (8 * b)) & 0xff;
    h *= kFnvPrime;
  }
}

}  // namespace

RatingsDataset::RatingsDataset(std::vector<Rating> ratings, RatingScale scale)
    : ratings_(std::move(ratings)), scale_(scale) {
  if (ratings_.empty()) throw DataError("empty dataset");
  if (!(scale_.min <= scale_.max)) {
    throw DataError(fmt::format("invalid rating scale [{}, {}]", scale_.min,
                                scale_.max));
  }
  for (const Rating& r : ratings_) {
    if (!std::isfinite(r.value) || r.value < scale_.min ||
        r.value > scale_.max) {
      throw DataError(fmt::format(
          "rating {} for (user {}, item {}) outside scale [{}, {}]", r.value,
          r.user.value, r.item.value, scale_.min, scale_.max));
    }
    users_.push_back(r.user);
    items_.push_back(r.item);
  }
  std::sort(users_.begin(), users_.end());
  users_.erase(std::unique(users_.begin(), users_.end()), users_.end());
  std::sort(items_.begin(), items_.end());
  items_.erase(std::unique(items_.begin(), items_.end()), items_.end());

  // Sort record indices by (user, item) to detect duplicates and build the
  // user-major index in one pass.
  std::vector<std::size_t> order(ratings_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Rating& x = ratings_[a];
    const Rating& y = ratings_[b];
    return std::tie(x.user, x.item) < std::tie(y.user, y.item);
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const Rating& prev = ratings_[order[k - 1]];
    const Rating& cur = ratings_[order[k]];
    if (prev.user == cur.user && prev.item == cur.item) {
      throw DataError(fmt::format("duplicate rating for (user {}, item {})",
                                  cur.user.value, cur.item.value));
    }
  }

  user_offsets_.assign(users_.size() + 1, 0);
  item_offsets_.assign(items_.size() + 1, 0);
  user_entries_.resize(ratings_.size());
  item_entries_.resize(ratings_.size());
  std::vector<std::uint32_t> user_of(ratings_.size());
  std::vector<std::uint32_t> item_of(ratings_.size());
  double sum = 0.0;
  std::uint64_t h = kFnvOffset;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Rating& r = ratings_[order[k]];
    const auto u = static_cast<std::uint32_t>(*user_index(r.user));
    const auto i = static_cast<std::uint32_t>(*item_index(r.item));
    user_of[k] = u;
    item_of[k] = i;
    ++user_offsets_[u + 1];
    ++item_offsets_[i + 1];
    sum += r.value;
    fnv_mix(h, static_cast<std::uint64_t>(r.user.value));
    fnv_mix(h, static_cast<std::uint64_t>(r.item.value));
    fnv_mix(h, std::bit_cast<std::uint64_t>(r.value));
  }
  mean_ = sum / static_cast<double>(ratings_.size());
  fingerprint_ = h;
  std::partial_sum(user_offsets_.begin(), user_offsets_.end(),
                   user_offsets_.begin());
  std::partial_sum(item_offsets_.begin(), item_offsets_.end(),
                   item_offsets_.begin());
  // `order` is (user, item) sorted, so filling rows in this order leaves
  // both indexes sorted by the other entity.
  std::vector<std::size_t> item_fill(item_offsets_.begin(),
                                     item_offsets_.end() - 1);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double value = ratings_[order[k]].value;
    user_entries_[k] = {item_of[k], value};
    item_entries_[item_fill[item_of[k]]++] = {user_of[k], value};
  }
}

std::optional<std::size_t> RatingsDataset::user_index(UserId id) const {
  const auto it = std::lower_bound(users_.begin(), users_.end(), id);
  if (it == users_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - users_.begin());
}

std::optional<std::size_t> RatingsDataset::item_index(ItemId id) const {
  const auto it = std::lower_bound(items_.begin(), items_.end(), id);
  if (it == items_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - items_.begin());
}

std::optional<double> RatingsDataset::rating(UserId user, ItemId item) const {
  const auto u = user_index(user);
  const auto i = item_index(item);
  if (!u || !i) return std::nullopt;
  const auto row = user_row(*u);
  const auto it = std::lower_bound(
      row.begin(), row.end(), *i,
      [](const Entry& e, std::size_t idx) { return e.index < idx; });
  if (it == row.end() || it->index != *i) return std::nullopt;
  return it->value;
}

namespace {

const char* delimiter_of(const RatingsFormat& format) {
  return format.kind == FileFormat::kMovieLens1M ? "::"
                                                 : format.delimiter.c_str();
}

}  // namespace

RatingsDataset read_ratings(std::istream& in, const RatingsFormat& format,
                            const std::string& source) {
  const bool movielens = format.kind == FileFormat::kMovieLens1M;
  const std::string delimiter = delimiter_of(format);
  if (delimiter.empty()) throw UsageError("empty delimiter");
  const int user_col = movielens ? 0 : format.user_column;
  const int item_col = movielens ? 1 : format.item_column;
  const int rating_col = movielens ? 2 : format.rating_column;
  const int time_col = movielens ? 3 : format.timestamp_column;
  const int needed = std::max({user_col, item_col, rating_col, time_col}) + 1;

  std::vector<Rating> ratings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (line_no == 1 && format.header && !movielens) continue;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, delimiter);
    if (static_cast<int>(fields.size()) < needed ||
        (movielens && fields.size() != 4)) {
      throw DataError(fmt::format("{}:{}: expected {} fields, found {}",
                                  source, line_no, movielens ? 4 : needed,
                                  fields.size()));
    }
    const auto user = text::parse_int(fields[user_col]);
    const auto item = text::parse_int(fields[item_col]);
    const auto value = text::parse_double(fields[rating_col]);
    std::optional<std::int64_t> ts = 0;
    if (time_col >= 0) ts = text::parse_int(fields[time_col]);
    if (!user || !item || !value || !ts) {
      throw DataError(fmt::format("{}:{}: malformed rating line '{}'", source,
                                  line_no, line));
    }
    ratings.push_back({UserId{*user}, ItemId{*item}, *value, *ts});
  }
  if (ratings.empty()) throw DataError(fmt::format("{}: empty dataset", source));
  return RatingsDataset(std::move(ratings), format.scale);
}

RatingsDataset parse_ratings(const std::filesystem::path& path,
                             const RatingsFormat& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return read_ratings(in, format, path.string());
}

void write_ratings(std::ostream& out, const RatingsDataset& dataset,
                   const RatingsFormat& format) {
  const bool movielens = format.kind == FileFormat::kMovieLens1M;
  if (movielens) {
    for (const Rating& r : dataset.ratings()) {
      out << fmt::format("{}::{}::{}::{}\n", r.user.value, r.item.value,
                         r.value, r.timestamp);
    }
    return;
  }
  const int width = std::max({format.user_column, format.item_column,
                              format.rating_column, format.timestamp_column}) +
                    1;
  std::vector<std::string> fields(static_cast<std::size_t>(width));
  auto emit = [&] {
    for (int c = 0; c < width; ++c) {
      if (c > 0) out << format.delimiter;
      out << fields[c];
    }
    out << '\n';
  };
  if (format.header) {
    std::fill(fields.begin(), fields.end(), "x");
    fields[format.user_column] = "user";
    fields[format.item_column] = "item";
    fields[format.rating_column] = "rating";
    if (format.timestamp_column >= 0) fields[format.timestamp_column] = "ts";
    emit();
  }
  for (const Rating& r : dataset.ratings()) {
    std::fill(fields.begin(), fields.end(), "");
    fields[format.user_column] = fmt::format("{}", r.user.value);
    fields[format.item_column] = fmt::format("{}", r.item.value);
    fields[format.rating_column] = fmt::format("{}", r.value);
    if (format.timestamp_column >= 0) {
      fields[format.timestamp_column] = fmt::format("{}", r.timestamp);
    }
    emit();
  }
}

RatingsDataset core_filter(const RatingsDataset& dataset,
                           std::size_t min_user_ratings,
                           std::size_t min_item_ratings) {
  if (min_user_ratings < 1 || min_item_ratings < 1) {
    throw UsageError("core filter thresholds must be >= 1");
  }
  const auto all = dataset.ratings();
  std::vector<bool> keep(all.size(), true);
  std::unordered_map<UserId, std::size_t> user_count;
  std::unordered_map<ItemId, std::size_t> item_count;
  for (const Rating& r : all) {
    ++user_count[r.user];
    ++item_count[r.item];
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k < all.size(); ++k) {
      if (!keep[k]) continue;
      const Rating& r = all[k];
      if (user_count[r.user] < min_user_ratings ||
          item_count[r.item] < min_item_ratings) {
        keep[k] = false;
        changed = true;
      }
    }
    // Recount after the sweep so one pass sees a consistent snapshot.
    if (changed) {
      user_count.clear();
      item_count.clear();
      for (std::size_t k = 0; k < all.size(); ++k) {
        if (!keep[k]) continue;
        ++user_count[all[k].user];
        ++item_count[all[k].item];
      }
    }
  }
  std::vector<Rating> kept;
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (keep[k]) kept.push_back(all[k]);
  }
  if (kept.empty()) throw DataError("filter removed all data");
  return RatingsDataset(std::move(kept), dataset.scale());
}

TrainTestSplit apply_assignment(const RatingsDataset& dataset,
                                std::vector<Partition> assignment,
                                double ratio, std::uint64_t seed) {
  if (assignment.size() != dataset.size()) {
    throw DataError(fmt::format(
        "split assignment covers {} records but the dataset has {}",
        assignment.size(), dataset.size()));
  }
  std::vector<Rating> train;
  std::vector<Rating> test;
  const auto all = dataset.ratings();
  for (std::size_t k = 0; k < all.size(); ++k) {
    (assignment[k] == Partition::kTrain ? train : test).push_back(all[k]);
  }
  if (train.empty() || test.empty()) {
    throw DataError("split produced an empty train or test partition");
  }
  return TrainTestSplit{RatingsDataset(std::move(train), dataset.scale()),
                        RatingsDataset(std::move(test), dataset.scale()),
                        ratio, seed, std::move(assignment)};
}

TrainTestSplit split(const RatingsDataset& dataset, double ratio,
                     std::uint64_t seed, bool per_user) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw UsageError(fmt::format("split ratio {} outside (0, 1)", ratio));
  }
  Rng rng(seed);
  std::vector<Partition> assignment(dataset.size(), Partition::kTest);
  auto assign = [&](std::vector<std::size_t>& records) {
    rng.shuffle(std::span<std::size_t>(records));
    const auto n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(records.size())));
    for (std::size_t k = 0; k < n_train; ++k) {
      assignment[records[k]] = Partition::kTrain;
    }
  };
  if (!per_user) {
    std::vector<std::size_t> records(dataset.size());
    std::iota(records.begin(), records.end(), std::size_t{0});
    assign(records);
  } else {
    std::vector<std::vector<std::size_t>> by_user(dataset.num_users());
    const auto all = dataset.ratings();
    for (std::size_t k = 0; k < all.size(); ++k) {
      by_user[*dataset.user_index(all[k].user)].push_back(k);
    }
    for (auto& records : by_user) assign(records);
  }
  return apply_assignment(dataset, std::move(assignment), ratio, seed);
}

void write_manifest(std::ostream& out, std::span<const Partition> assignment) {
  out << "record_index,partition\n";
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    out << k << ',' << (assignment[k] == Partition::kTrain ? "train" : "test")
        << '\n';
  }
}

std::vector<Partition> read_manifest(std::istream& in, std::size_t expected) {
  std::vector<Partition> assignment(expected);
  std::vector<bool> seen(expected, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (line_no == 1 || text::trim(line).empty()) continue;
    const auto fields = text::split(line, ",");
    const auto index = fields.size() == 2 ? text::parse_int(fields[0])
                                          : std::nullopt;
    const auto part = fields.size() == 2 ? text::trim(fields[1]) : "";
    if (!index || *index < 0 || static_cast<std::size_t>(*index) >= expected ||
        (part != "train" && part != "test")) {
      throw DataError(fmt::format("manifest:{}: malformed line '{}'", line_no,
                                  line));
    }
    assignment[*index] = part == "train" ? Partition::kTrain : Partition::kTest;
    seen[*index] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw DataError(fmt::format(
        "manifest does not cover all {} records of the dataset", expected));
  }
  return assignment;
}

}  // namespace popaudit
