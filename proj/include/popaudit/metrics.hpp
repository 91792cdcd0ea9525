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
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popaudit/dataset.hpp"
#include "popaudit/ids.hpp"
#include "popaudit/metadata.hpp"
#include "popaudit/recommend.hpp"

namespace popaudit {

// theta(i): fraction of training users who rated item i. Items that never
// occur in training have popularity 0.
class ItemPopularity {
 public:
  explicit ItemPopularity(std::map<ItemId, double> theta)
      : theta_(std::move(theta)) {}

  double operator()(ItemId item) const {
    const auto it = theta_.find(item);
    return it == theta_.end() ? 0.0 : it->second;
  }
  const std::map<ItemId, double>& values() const { return theta_; }

  // Same popularity with every value multiplied by `factor`.
  ItemPopularity scaled(double factor) const;

 private:
  std::map<ItemId, double> theta_;
};

ItemPopularity item_popularity(const RatingsDataset& train);

// Probability mass over a catalog vocabulary. A distribution built from no
// usable items is empty and cannot be compared.
class CategoricalDistribution {
 public:
  static constexpr double kTolerance = 1e-9;

  static CategoricalDistribution empty(std::size_t vocabulary_size);
  // Renormalizes non-negative weights; all-zero weights give an empty
  // distribution.
  static CategoricalDistribution from_weights(std::vector<double> weights);

  // Takes mass that must already sum to 1 within kTolerance. Throws
  // DataError otherwise.
  explicit CategoricalDistribution(std::vector<double> mass);

  bool is_empty() const { return empty_; }
  std::size_t size() const { return mass_.size(); }
  std::span<const double> mass() const { return mass_; }
  double operator[](std::size_t c) const { return mass_[c]; }

 private:
  CategoricalDistribution() = default;

  std::vector<double> mass_;
  bool empty_ = true;
};

// p(c|i): uniform over the item's genres. Throws DataError when the item is
// not in the catalog.
CategoricalDistribution item_feature_distribution(ItemId item,
                                                  const ItemCatalog& catalog);

// p_u(c|u): unweighted mean of p(c|i) over the user's training items that
// appear in the catalog.
CategoricalDistribution profile_distribution(UserId user,
                                             const RatingsDataset& train,
                                             const ItemCatalog& catalog);

// q_u(c|u): unweighted mean of p(c|i) over the user's recommended items.
CategoricalDistribution recommendation_distribution(
    UserId user, const RecommendationSet& recs, const ItemCatalog& catalog);

// ||sqrt(p) - sqrt(q)||_2 / sqrt(2). Throws DataError for empty inputs or
// mismatched vocabularies.
double hellinger(const CategoricalDistribution& p,
                 const CategoricalDistribution& q);

// KL(p || (1 - eps) q + eps * uniform). Diagnostic only.
double kl_miscalibration(const CategoricalDistribution& p,
                         const CategoricalDistribution& q,
                         double epsilon = 1e-6);

// Hellinger distance between p_u and q_u, or nullopt when either is empty.
std::optional<double> user_miscalibration(UserId user,
                                          const RatingsDataset& train,
                                          const RecommendationSet& recs,
                                          const ItemCatalog& catalog);

// Mean of the members' values. Members without a value were excluded
// upstream and are skipped; throws DataError when nothing remains.
double group_miscalibration(std::span<const UserId> group,
                            const std::map<UserId, double>& per_user_mc);

// Mean over members of the mean theta of their training profile.
double gap_profile(std::span<const UserId> group, const RatingsDataset& train,
                   const ItemPopularity& popularity);

// Mean over members of the mean theta of their recommendation list.
double gap_recs(std::span<const UserId> group, const RecommendationSet& recs,
                const ItemPopularity& popularity);

// (gap_q - gap_p) / gap_p, undefined (nullopt) when gap_p is 0.
std::optional<double> popularity_lift(double gap_p, double gap_q);

struct ItemExposureRow {
  ItemId item;
  std::size_t times_rated = 0;
  std::size_t times_recommended = 0;
  double mean_rating = 0.0;
};

// One row per training item, ascending item id.
std::vector<ItemExposureRow> rated_vs_recommended(const RatingsDataset& train,
                                                  const RecommendationSet& recs);

struct UserMetricRow {
  UserId user;
  double profile_avg_popularity = 0.0;
  double rec_avg_popularity = 0.0;
  double miscalibration = 0.0;
};

struct UserMetrics {
  // Users with a usable profile and list, ascending id.
  std::vector<UserMetricRow> rows;
  // Only users holding a list are visited; a list with no catalogued item
  // counts as empty.
  std::size_t excluded_empty_profile = 0;
  std::size_t excluded_empty_list = 0;

  std::map<UserId, double> miscalibration_by_user() const;
  std::vector<UserId> users() const;
};

UserMetrics user_metrics(const RatingsDataset& train,
                         const RecommendationSet& recs,
                         const ItemCatalog& catalog,
                         const ItemPopularity& popularity);

// Per-user lift (rec_avg - profile_avg) / profile_avg; nullopt when the
// profile average is 0.
std::optional<double> user_popularity_lift(const UserMetricRow& row);

// CSV `user_id,group,profile_avg_pop,rec_avg_pop,miscalibration`.
void write_user_metrics(std::ostream& out, const UserMetrics& metrics,
                        const std::map<UserId, std::string>& group_of);
// CSV `item_id,times_rated,times_recommended,mean_rating`.
void write_exposure(std::ostream& out, std::span<const ItemExposureRow> rows);

}  // namespace popaudit
