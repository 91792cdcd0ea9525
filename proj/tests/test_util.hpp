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

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "oracle/brute_force.hpp"
#include "popaudit/dataset.hpp"
#include "popaudit/metadata.hpp"
#include "popaudit/recommend.hpp"

namespace testutil {

inline std::filesystem::path data_dir() { return POPAUDIT_TEST_DATA; }

// Fresh, empty directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(POPAUDIT_TEST_SCRATCH) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline popaudit::RatingsDataset make_dataset(
    const std::vector<std::tuple<long, long, double>>& cells) {
  std::vector<popaudit::Rating> ratings;
  for (const auto& [u, i, v] : cells) {
    ratings.push_back({popaudit::UserId{u}, popaudit::ItemId{i}, v, 0});
  }
  return popaudit::RatingsDataset(std::move(ratings), {});
}

inline std::shared_ptr<const popaudit::RatingsDataset> shared(
    popaudit::RatingsDataset d) {
  return std::make_shared<const popaudit::RatingsDataset>(std::move(d));
}

inline popaudit::ItemCatalog make_catalog(const oracle::Genres& genres) {
  std::map<popaudit::ItemId, std::vector<std::string>> g;
  for (const auto& [item, labels] : genres) g[popaudit::ItemId{item}] = labels;
  return popaudit::ItemCatalog(g);
}

inline std::vector<oracle::Triple> triples(const popaudit::RatingsDataset& d) {
  std::vector<oracle::Triple> out;
  for (const auto& r : d.ratings()) out.push_back({r.user.value, r.item.value, r.value});
  return out;
}

inline oracle::Lists lists(const popaudit::RecommendationSet& recs) {
  oracle::Lists out;
  for (const auto& [user, list] : recs.lists) {
    auto& items = out[user.value];
    for (const auto& r : list.items) items.push_back(r.item.value);
  }
  return out;
}

inline popaudit::RatingsDataset fixture_ratings(const std::string& name) {
  return popaudit::parse_ratings(data_dir() / name / "ratings.dat", {});
}

inline popaudit::ItemCatalog fixture_catalog(const std::string& name) {
  return popaudit::parse_item_catalog(data_dir() / name / "movies.dat", {});
}

inline oracle::Genres fixture_genres(const std::string& name) {
  oracle::Genres out;
  std::ifstream in(data_dir() / name / "movies.dat");
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find("::");
    const auto last = line.rfind("::");
    const long item = std::stol(line.substr(0, first));
    std::stringstream genres(line.substr(last + 2));
    std::string g;
    while (std::getline(genres, g, '|')) out[item].push_back(g);
  }
  return out;
}

// Random probability vector of length n with some exact zeros.
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n);
  double total = 0;
  for (auto& x : w) {
    x = u(rng) < 0.2 ? 0.0 : u(rng);
    total += x;
  }
  if (total == 0) {
    w[0] = 1;
    total = 1;
  }
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace testutil
