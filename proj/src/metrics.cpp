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

#include "popaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "popaudit/cohorts.hpp"
#include "popaudit/error.hpp"

namespace popaudit {
namespace {

// Adds p(c|i) to `weights`; returns false when the item has no catalog
// entry.
bool add_item(ItemId item, const ItemCatalog& catalog,
              std::vector<double>& weights) {
  const auto* features = catalog.find(item);
  if (features == nullptr) return false;
  const double share = 1.0 / static_cast<double>(features->size());
  for (const auto c : *features) weights[c] += share;
  return true;
}

double mean(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

}  // namespace

ItemPopularity ItemPopularity::scaled(double factor) const {
  std::map<ItemId, double> theta;
  for (const auto& [item, value] : theta_) theta.emplace(item, value * factor);
  return ItemPopularity(std::move(theta));
}

ItemPopularity item_popularity(const RatingsDataset& train) {
  std::map<ItemId, double> theta;
  const auto users = static_cast<double>(train.num_users());
  for (std::size_t i = 0; i < train.num_items(); ++i) {
    // Each (user, item) pair occurs once, so the column length counts
    // distinct raters.
    theta.emplace_hint(theta.end(), train.item_id(i),
                       static_cast<double>(train.item_column(i).size()) / users);
  }
  return ItemPopularity(std::move(theta));
}

CategoricalDistribution CategoricalDistribution::empty(
    std::size_t vocabulary_size) {
  CategoricalDistribution d;
  d.mass_.assign(vocabulary_size, 0.0);
  d.empty_ = true;
  return d;
}

CategoricalDistribution CategoricalDistribution::from_weights(
    std::vector<double> weights) {
  double total = 0.0;
  for (const double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DataError("distribution weights must be finite and non-negative");
    }
    total += w;
  }
  if (total <= 0.0) return empty(weights.size());
  for (double& w : weights) w /= total;
  CategoricalDistribution d;
  d.mass_ = std::move(weights);
  d.empty_ = false;
  return d;
}

CategoricalDistribution::CategoricalDistribution(std::vector<double> mass)
    : mass_(std::move(mass)), empty_(false) {
  double total = 0.0;
  for (const double m : mass_) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw DataError("distribution mass must be finite and non-negative");
    }
    total += m;
  }
  if (std::abs(total - 1.0) > kTolerance) {
    throw DataError(fmt::format("distribution sums to {}, not 1", total));
  }
}

CategoricalDistribution item_feature_distribution(ItemId item,
                                                  const ItemCatalog& catalog) {
  std::vector<double> weights(catalog.vocabulary().size(), 0.0);
  if (!add_item(item, catalog, weights)) {
    throw DataError(fmt::format("item {} not in catalog", item.value));
  }
  return CategoricalDistribution::from_weights(std::move(weights));
}

CategoricalDistribution profile_distribution(UserId user,
                                             const RatingsDataset& train,
                                             const ItemCatalog& catalog) {
  std::vector<double> weights(catalog.vocabulary().size(), 0.0);
  const auto u = train.user_index(user);
  if (!u) return CategoricalDistribution::empty(weights.size());
  for (const Entry& e : train.user_row(*u)) {
    add_item(train.item_id(e.index), catalog, weights);
  }
  return CategoricalDistribution::from_weights(std::move(weights));
}

CategoricalDistribution recommendation_distribution(
    UserId user, const RecommendationSet& recs, const ItemCatalog& catalog) {
  std::vector<double> weights(catalog.vocabulary().size(), 0.0);
  const auto it = recs.lists.find(user);
  if (it == recs.lists.end()) {
    return CategoricalDistribution::empty(weights.size());
  }
  for (const auto& rec : it->second.items) add_item(rec.item, catalog, weights);
  return CategoricalDistribution::from_weights(std::move(weights));
}

double hellinger(const CategoricalDistribution& p,
                 const CategoricalDistribution& q) {
  if (p.is_empty() || q.is_empty()) {
    throw DataError("hellinger distance of an empty distribution");
  }
  if (p.size() != q.size()) {
    throw DataError(fmt::format(
        "distributions over different vocabularies ({} vs {} labels)",
        p.size(), q.size()));
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double d = std::sqrt(p[c]) - std::sqrt(q[c]);
    sum += d * d;
  }
  // Rounding can push sqrt(sum / 2) a hair past 1 for disjoint supports.
  return std::min(1.0, std::sqrt(sum) / std::sqrt(2.0));
}

double kl_miscalibration(const CategoricalDistribution& p,
                         const CategoricalDistribution& q, double epsilon) {
  if (!(epsilon > 0.0) || epsilon >= 1.0) {
    throw UsageError(fmt::format("KL smoothing epsilon {} outside (0, 1)",
                                 epsilon));
  }
  if (p.is_empty() || q.is_empty()) {
    throw DataError("KL divergence of an empty distribution");
  }
  if (p.size() != q.size()) {
    throw DataError("distributions over different vocabularies");
  }
  const double uniform = 1.0 / static_cast<double>(q.size());
  double kl = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] == 0.0) continue;
    const double smoothed = (1.0 - epsilon) * q[c] + epsilon * uniform;
    kl += p[c] * std::log(p[c] / smoothed);
  }
  return kl;
}

std::optional<double> user_miscalibration(UserId user,
                                          const RatingsDataset& train,
                                          const RecommendationSet& recs,
                                          const ItemCatalog& catalog) {
  const auto p = profile_distribution(user, train, catalog);
  const auto q = recommendation_distribution(user, recs, catalog);
  if (p.is_empty() || q.is_empty()) return std::nullopt;
  return hellinger(p, q);
}

double group_miscalibration(std::span<const UserId> group,
                            const std::map<UserId, double>& per_user_mc) {
  std::vector<double> values;
  for (const UserId u : group) {
    const auto it = per_user_mc.find(u);
    if (it != per_user_mc.end()) values.push_back(it->second);
  }
  if (values.empty()) throw DataError("miscalibration of an empty group");
  return mean(values);
}

double gap_profile(std::span<const UserId> group, const RatingsDataset& train,
                   const ItemPopularity& popularity) {
  if (group.empty()) throw DataError("group average popularity of empty group");
  std::vector<double> per_user;
  per_user.reserve(group.size());
  for (const UserId u : group) {
    per_user.push_back(profile_avg_popularity(u, train, popularity));
  }
  return mean(per_user);
}

double gap_recs(std::span<const UserId> group, const RecommendationSet& recs,
                const ItemPopularity& popularity) {
  if (group.empty()) throw DataError("group average popularity of empty group");
  std::vector<double> per_user;
  per_user.reserve(group.size());
  for (const UserId u : group) {
    const auto it = recs.lists.find(u);
    if (it == recs.lists.end() || it->second.items.empty()) {
      throw DataError(fmt::format("user {} has no recommendations", u.value));
    }
    double s = 0.0;
    for (const auto& rec : it->second.items) s += popularity(rec.item);
    per_user.push_back(s / static_cast<double>(it->second.items.size()));
  }
  return mean(per_user);
}

std::optional<double> popularity_lift(double gap_p, double gap_q) {
  if (gap_p == 0.0) return std::nullopt;
  return (gap_q - gap_p) / gap_p;
}

std::vector<ItemExposureRow> rated_vs_recommended(
    const RatingsDataset& train, const RecommendationSet& recs) {
  std::vector<ItemExposureRow> rows(train.num_items());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto column = train.item_column(i);
    double sum = 0.0;
    for (const Entry& e : column) sum += e.value;
    rows[i].item = train.item_id(i);
    rows[i].times_rated = column.size();
    rows[i].mean_rating = sum / static_cast<double>(column.size());
  }
  for (const auto& [user, list] : recs.lists) {
    for (const auto& rec : list.items) {
      if (const auto i = train.item_index(rec.item)) {
        ++rows[*i].times_recommended;
      }
    }
  }
  return rows;
}

std::map<UserId, double> UserMetrics::miscalibration_by_user() const {
  std::map<UserId, double> mc;
  for (const auto& row : rows) mc.emplace_hint(mc.end(), row.user,
                                                row.miscalibration);
  return mc;
}

std::vector<UserId> UserMetrics::users() const {
  std::vector<UserId> users;
  users.reserve(rows.size());
  for (const auto& row : rows) users.push_back(row.user);
  return users;
}

UserMetrics user_metrics(const RatingsDataset& train,
                         const RecommendationSet& recs,
                         const ItemCatalog& catalog,
                         const ItemPopularity& popularity) {
  UserMetrics metrics;
  for (const auto& [user, list] : recs.lists) {
    const auto p = profile_distribution(user, train, catalog);
    if (p.is_empty()) {
      ++metrics.excluded_empty_profile;
      continue;
    }
    const auto q = recommendation_distribution(user, recs, catalog);
    if (q.is_empty()) {
      ++metrics.excluded_empty_list;
      continue;
    }
    UserMetricRow row;
    row.user = user;
    const UserId one[] = {user};
    row.profile_avg_popularity = gap_profile(one, train, popularity);
    row.rec_avg_popularity = gap_recs(one, recs, popularity);
    row.miscalibration = hellinger(p, q);
    metrics.rows.push_back(row);
  }
  return metrics;
}

std::optional<double> user_popularity_lift(const UserMetricRow& row) {
  return popularity_lift(row.profile_avg_popularity, row.rec_avg_popularity);
}

void write_user_metrics(std::ostream& out, const UserMetrics& metrics,
                        const std::map<UserId, std::string>& group_of) {
  out << "user_id,group,profile_avg_pop,rec_avg_pop,miscalibration\n";
  for (const auto& row : metrics.rows) {
    const auto it = group_of.find(row.user);
    out << fmt::format("{},{},{},{},{}\n", row.user.value,
                       it == group_of.end() ? "" : it->second,
                       row.profile_avg_popularity, row.rec_avg_popularity,
                       row.miscalibration);
  }
}

void write_exposure(std::ostream& out, std::span<const ItemExposureRow> rows) {
  out << "item_id,times_rated,times_recommended,mean_rating\n";
  for (const auto& row : rows) {
    out << fmt::format("{},{},{},{}\n", row.item.value, row.times_rated,
                       row.times_recommended, row.mean_rating);
  }
}

}  // namespace popaudit
