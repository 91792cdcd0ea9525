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

#include "popaudit/cohorts.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "popaudit/error.hpp"

namespace popaudit {
namespace {

void finish(Cohort& cohort, const std::map<UserId, double>& scores) {
  std::sort(cohort.members.begin(), cohort.members.end());
  if (cohort.members.empty()) return;
  double sum = 0.0;
  for (const UserId u : cohort.members) sum += scores.at(u);
  cohort.mean_profile_popularity =
      sum / static_cast<double>(cohort.members.size());
}

}  // namespace

std::string_view to_string(GroupingScheme scheme) {
  return scheme == GroupingScheme::kEqualWidth ? "equal-width" : "equal-count";
}

GroupingScheme parse_grouping_scheme(std::string_view name) {
  if (name == "equal-width") return GroupingScheme::kEqualWidth;
  if (name == "equal-count") return GroupingScheme::kEqualCount;
  throw UsageError(fmt::format(
      "unknown grouping scheme '{}' (valid: equal-width, equal-count)", name));
}

std::map<UserId, std::string> CohortPartition::label_of() const {
  std::map<UserId, std::string> labels;
  for (const auto& cohort : cohorts) {
    for (const UserId u : cohort.members) labels.emplace(u, cohort.label);
  }
  return labels;
}

double profile_avg_popularity(UserId user, const RatingsDataset& train,
                              const ItemPopularity& popularity) {
  const auto u = train.user_index(user);
  if (!u) {
    throw DataError(fmt::format("user {} has no training ratings", user.value));
  }
  const auto row = train.user_row(*u);
  double sum = 0.0;
  for (const Entry& e : row) sum += popularity(train.item_id(e.index));
  return sum / static_cast<double>(row.size());
}

CohortPartition group_by_popularity(const std::map<UserId, double>& scores,
                                    int n_groups, GroupingScheme scheme) {
  if (n_groups < 2) throw UsageError("n_groups must be >= 2");
  const auto n = static_cast<std::size_t>(n_groups);
  CohortPartition partition;
  partition.name = "popularity";
  partition.cohorts.resize(n);
  for (std::size_t g = 0; g < n; ++g) {
    partition.cohorts[g].label = fmt::format("G{}", g + 1);
  }
  std::set<double> distinct;
  for (const auto& [user, s] : scores) {
    if (!std::isfinite(s)) {
      throw DataError(fmt::format("non-finite score for user {}", user.value));
    }
    distinct.insert(s);
  }
  if (distinct.size() < n) {
    partition.warnings.push_back(fmt::format(
        "{} distinct scores for {} groups; some cohorts will be empty",
        distinct.size(), n));
  }

  if (!scores.empty() && scheme == GroupingScheme::kEqualWidth) {
    const double lo = *distinct.begin();
    const double hi = *distinct.rbegin();
    // b_k = lo + range * k / n; computing k / n last keeps grid values such
    // as 0.3 on their exact boundary.
    std::vector<double> bounds;
    for (std::size_t k = 1; k < n; ++k) {
      bounds.push_back(lo + (hi - lo) * static_cast<double>(k) /
                                static_cast<double>(n));
    }
    for (const auto& [user, s] : scores) {
      std::size_t g = 0;
      if (hi > lo) {
        g = static_cast<std::size_t>(
            std::upper_bound(bounds.begin(), bounds.end(), s) - bounds.begin());
      }
      partition.cohorts[g].members.push_back(user);
    }
  } else if (!scores.empty()) {
    std::vector<std::pair<double, UserId>> sorted;
    sorted.reserve(scores.size());
    for (const auto& [user, s] : scores) sorted.emplace_back(s, user);
    std::sort(sorted.begin(), sorted.end());
    std::size_t group = 0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      if (k == 0 || sorted[k].first != sorted[k - 1].first) {
        group = std::max(group, k * n / sorted.size());
      }
      partition.cohorts[group].members.push_back(sorted[k].second);
    }
  }
  for (auto& cohort : partition.cohorts) {
    finish(cohort, scores);
    if (cohort.members.empty()) partition.has_empty_cohort = true;
  }
  return partition;
}

CohortPartition group_by_gender(std::span<const UserId> users,
                                const UserDemographics& demographics) {
  CohortPartition partition;
  partition.name = "gender";
  partition.cohorts = {Cohort{"men", {}, {}}, Cohort{"women", {}, {}}};
  if (demographics.gender.empty()) {
    partition.warnings.push_back("no demographics available");
  }
  for (const UserId u : users) {
    const auto it = demographics.gender.find(u);
    if (it == demographics.gender.end() || it->second == Gender::kUnknown) {
      ++partition.excluded;
      continue;
    }
    partition.cohorts[it->second == Gender::kMale ? 0 : 1].members.push_back(u);
  }
  for (auto& cohort : partition.cohorts) {
    std::sort(cohort.members.begin(), cohort.members.end());
    if (cohort.members.empty()) partition.has_empty_cohort = true;
  }
  return partition;
}

void write_cohorts(std::ostream& out,
                   std::span<const CohortPartition> partitions) {
  out << "user_id,partition,label\n";
  for (const auto& partition : partitions) {
    for (const auto& [user, label] : partition.label_of()) {
      out << user.value << ',' << partition.name << ',' << label << '\n';
    }
  }
}

}  // namespace popaudit
