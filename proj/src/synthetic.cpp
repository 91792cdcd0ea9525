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

#include "popaudit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "popaudit/error.hpp"
#include "popaudit/random.hpp"

namespace popaudit {
namespace {

constexpr const char* kGenreNames[] = {
    "Action",    "Adventure", "Animation", "Children's", "Comedy",
    "Crime",     "Documentary", "Drama",   "Fantasy",    "Film-Noir",
    "Horror",    "Musical",   "Mystery",   "Romance",    "Sci-Fi",
    "Thriller",  "War",       "Western"};
constexpr std::size_t kMaxGenres = std::size(kGenreNames);

// Index into the cumulative weights by inverse-CDF lookup.
std::size_t draw(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.users < 2 || spec.items < 2) {
    throw UsageError("synthetic data needs at least 2 users and 2 items");
  }
  if (spec.genres < 1 || spec.genres > kMaxGenres) {
    throw UsageError(fmt::format("genres must be in [1, {}]", kMaxGenres));
  }
  if (spec.min_ratings < 1 || spec.min_ratings > spec.items / 2) {
    throw UsageError("min_ratings must be in [1, items / 2]");
  }
  Rng rng(spec.seed);
  SyntheticData data;

  // Items: 1-3 genres, a shuffled Zipf popularity rank and a quality offset.
  std::vector<std::vector<std::size_t>> item_genres(spec.items);
  std::vector<double> popularity(spec.items);
  std::vector<double> quality(spec.items);
  std::vector<std::size_t> rank(spec.items);
  std::iota(rank.begin(), rank.end(), std::size_t{1});
  rng.shuffle(std::span(rank));
  for (std::size_t i = 0; i < spec.items; ++i) {
    const std::size_t count = 1 + rng.below(std::min<std::size_t>(3, spec.genres));
    auto& g = item_genres[i];
    while (g.size() < count) {
      const std::size_t c = rng.below(spec.genres);
      if (std::find(g.begin(), g.end(), c) == g.end()) g.push_back(c);
    }
    std::sort(g.begin(), g.end());
    popularity[i] = 1.0 / std::pow(static_cast<double>(rank[i]), spec.zipf_exponent);
    quality[i] = rng.normal(0.0, 0.5);
    auto& names = data.genres[ItemId{static_cast<std::int64_t>(i + 1)}];
    for (const auto c : g) names.emplace_back(kGenreNames[c]);
  }

  for (std::size_t u = 0; u < spec.users; ++u) {
    const UserId user{static_cast<std::int64_t>(u + 1)};
    data.gender[user] =
        rng.uniform() < spec.female_fraction ? Gender::kFemale : Gender::kMale;

    std::vector<double> taste(spec.genres);
    for (auto& t : taste) t = std::pow(rng.uniform(), 3.0) + 0.02;
    const double total = std::accumulate(taste.begin(), taste.end(), 0.0);
    for (auto& t : taste) t /= total;
    // Below 1 flattens the popularity curve (niche users), above 1 sharpens it.
    const double mainstream = 0.3 + 1.2 * rng.uniform();

    std::vector<double> affinity(spec.items);
    std::vector<double> cumulative(spec.items);
    double running = 0.0;
    for (std::size_t i = 0; i < spec.items; ++i) {
      double a = 0.0;
      for (const auto c : item_genres[i]) a += taste[c];
      affinity[i] = a / static_cast<double>(item_genres[i].size());
      running += std::pow(popularity[i], mainstream) * (affinity[i] + 0.01);
      cumulative[i] = running;
    }

    std::size_t want = spec.min_ratings;
    const double stop = 1.0 / (1.0 + spec.extra_ratings);
    while (want < spec.items / 2 && rng.uniform() >= stop) ++want;

    std::vector<std::uint8_t> taken(spec.items, 0);
    const double mean_affinity = 1.0 / static_cast<double>(spec.genres);
    for (std::size_t k = 0; k < want;) {
      const std::size_t i = draw(cumulative, rng);
      if (taken[i]) continue;
      taken[i] = 1;
      ++k;
      const double raw = 3.4 + quality[i] +
                         4.0 * (affinity[i] - mean_affinity) +
                         rng.normal(0.0, 0.7);
      const double value = std::clamp(std::round(raw), 1.0, 5.0);
      data.ratings.push_back(Rating{user, ItemId{static_cast<std::int64_t>(i + 1)},
                                    value,
                                    static_cast<std::int64_t>(978300000 + k)});
    }
  }
  return data;
}

void write_movielens(const std::filesystem::path& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", (dir / name).string()));
    return out;
  };
  {
    auto out = open("ratings.dat");
    for (const auto& r : data.ratings) {
      out << fmt::format("{}::{}::{}::{}\n", r.user.value, r.item.value, r.value,
                         r.timestamp);
    }
  }
  {
    auto out = open("movies.dat");
    for (const auto& [item, genres] : data.genres) {
      out << item.value << "::Synthetic Movie " << item.value << " (2000)::";
      for (std::size_t g = 0; g < genres.size(); ++g) {
        out << (g ? "|" : "") << genres[g];
      }
      out << '\n';
    }
  }
  {
    auto out = open("users.dat");
    for (const auto& [user, gender] : data.gender) {
      out << user.value << "::" << (gender == Gender::kFemale ? 'F' : 'M')
          << "::25::0::00000\n";
    }
  }
}

}  // namespace popaudit
