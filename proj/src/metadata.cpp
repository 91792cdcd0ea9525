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

#include "popaudit/metadata.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>

#include <fmt/format.h>

#include "popaudit/error.hpp"
#include "text.hpp"

namespace popaudit {

ItemCatalog::ItemCatalog(
    const std::map<ItemId, std::vector<std::string>>& genres) {
  std::set<std::string> vocab;
  for (const auto& [item, labels] : genres) {
    if (labels.empty()) {
      throw DataError(fmt::format("item {} has no genres", item.value));
    }
    vocab.insert(labels.begin(), labels.end());
  }
  vocabulary_.assign(vocab.begin(), vocab.end());
  for (const auto& [item, labels] : genres) {
    std::vector<std::uint32_t> idx;
    for (const auto& label : labels) {
      idx.push_back(static_cast<std::uint32_t>(
          std::lower_bound(vocabulary_.begin(), vocabulary_.end(), label) -
          vocabulary_.begin()));
    }
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    features_.emplace(item, std::move(idx));
  }
}

const std::vector<std::uint32_t>& ItemCatalog::features(ItemId item) const {
  const auto* f = find(item);
  if (f == nullptr) {
    throw DataError(fmt::format("item {} not in catalog", item.value));
  }
  return *f;
}

const std::vector<std::uint32_t>* ItemCatalog::find(ItemId item) const {
  const auto it = features_.find(item);
  return it == features_.end() ? nullptr : &it->second;
}

ItemCatalog read_item_catalog(std::istream& in, const CatalogFormat& format,
                              const std::string& source) {
  const bool movielens = format.kind == FileFormat::kMovieLens1M;
  std::map<ItemId, std::vector<std::string>> genres;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (line_no == 1 && format.header && !movielens) continue;
    if (text::trim(line).empty()) continue;
    std::string_view id_field;
    std::string_view genre_field;
    if (movielens) {
      // Titles never contain "::", but take id and genres from the ends
      // anyway so an odd title cannot shift the fields.
      const auto first = line.find("::");
      const auto last = line.rfind("::");
      if (first == std::string::npos || first == last) {
        throw DataError(fmt::format("{}:{}: malformed item line '{}'", source,
                                    line_no, line));
      }
      id_field = std::string_view(line).substr(0, first);
      genre_field = std::string_view(line).substr(last + 2);
    } else {
      const auto fields = text::split(line, format.delimiter);
      const int needed = std::max(format.item_column, format.genre_column) + 1;
      if (static_cast<int>(fields.size()) < needed) {
        throw DataError(fmt::format("{}:{}: expected {} fields, found {}",
                                    source, line_no, needed, fields.size()));
      }
      id_field = fields[format.item_column];
      genre_field = fields[format.genre_column];
    }
    const auto id = text::parse_int(id_field);
    if (!id) {
      throw DataError(fmt::format("{}:{}: malformed item id '{}'", source,
                                  line_no, id_field));
    }
    std::vector<std::string> labels;
    for (auto g : text::split(genre_field, format.genre_separator)) {
      g = text::trim(g);
      if (!g.empty()) labels.emplace_back(g);
    }
    if (labels.empty()) {
      throw DataError(fmt::format("{}:{}: item {} has no genres", source,
                                  line_no, *id));
    }
    if (!genres.emplace(ItemId{*id}, std::move(labels)).second) {
      throw DataError(fmt::format("{}:{}: duplicate item {}", source, line_no,
                                  *id));
    }
  }
  if (genres.empty()) throw DataError(fmt::format("{}: empty catalog", source));
  return ItemCatalog(genres);
}

ItemCatalog parse_item_catalog(const std::filesystem::path& path,
                               const CatalogFormat& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return read_item_catalog(in, format, path.string());
}

UserDemographics read_demographics(std::istream& in,
                                   const std::string& source) {
  UserDemographics result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, "::");
    const auto id = fields.size() >= 2 ? text::parse_int(fields[0])
                                       : std::nullopt;
    if (!id) {
      throw DataError(fmt::format("{}:{}: malformed user line '{}'", source,
                                  line_no, line));
    }
    const auto code = text::trim(fields[1]);
    Gender g = Gender::kUnknown;
    if (code == "M") {
      g = Gender::kMale;
    } else if (code == "F") {
      g = Gender::kFemale;
    } else {
      ++result.unknown_codes;
      result.warnings.push_back(fmt::format(
          "{}:{}: unknown gender code '{}' for user {}", source, line_no, code,
          *id));
    }
    result.gender[UserId{*id}] = g;
  }
  return result;
}

UserDemographics parse_demographics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return read_demographics(in, path.string());
}

UserDemographics restrict_to(const UserDemographics& demographics,
                             const RatingsDataset& dataset) {
  UserDemographics result;
  result.warnings = demographics.warnings;
  for (const auto& [user, g] : demographics.gender) {
    if (!dataset.user_index(user)) continue;
    result.gender.emplace(user, g);
    if (g == Gender::kUnknown) ++result.unknown_codes;
  }
  if (result.gender.empty()) {
    result.warnings.push_back("demographics cover no dataset users");
  }
  return result;
}

}  // namespace popaudit
