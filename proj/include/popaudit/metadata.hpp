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
#include <map>
#include <string>
#include <vector>

#include "popaudit/dataset.hpp"
#include "popaudit/ids.hpp"

namespace popaudit {

// Item -> genre labels. Every item has at least one genre, and the
// vocabulary is the sorted union of all genre labels.
class ItemCatalog {
 public:
  explicit ItemCatalog(const std::map<ItemId, std::vector<std::string>>& genres);

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  std::size_t size() const { return features_.size(); }
  bool contains(ItemId item) const { return features_.contains(item); }

  // Vocabulary indices of the item's genres, ascending. Throws DataError
  // for an item not in the catalog.
  const std::vector<std::uint32_t>& features(ItemId item) const;
  const std::vector<std::uint32_t>* find(ItemId item) const;

 private:
  std::vector<std::string> vocabulary_;
  std::map<ItemId, std::vector<std::uint32_t>> features_;
};

struct CatalogFormat {
  FileFormat kind = FileFormat::kMovieLens1M;
  std::string delimiter = ",";
  int item_column = 0;
  int genre_column = 2;
  std::string genre_separator = "|";
  bool header = false;
};

ItemCatalog parse_item_catalog(const std::filesystem::path& path,
                               const CatalogFormat& format);
ItemCatalog read_item_catalog(std::istream& in, const CatalogFormat& format,
                              const std::string& source);

enum class Gender : std::uint8_t { kMale, kFemale, kUnknown };

struct UserDemographics {
  std::map<UserId, Gender> gender;
  // Lines whose gender code was neither M nor F.
  std::size_t unknown_codes = 0;
  std::vector<std::string> warnings;
};

// MovieLens 1M users file: UserID::Gender::Age::Occupation::Zip.
UserDemographics parse_demographics(const std::filesystem::path& path);
UserDemographics read_demographics(std::istream& in, const std::string& source);

// Drops users absent from the dataset, warning when nothing remains.
UserDemographics restrict_to(const UserDemographics& demographics,
                             const RatingsDataset& dataset);

}  // namespace popaudit
