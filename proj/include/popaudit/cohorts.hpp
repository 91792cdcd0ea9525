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

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popaudit/dataset.hpp"
#include "popaudit/ids.hpp"
#include "popaudit/metadata.hpp"
#include "popaudit/metrics.hpp"

namespace popaudit {

struct Cohort {
  std::string label;
  // Ascending id.
  std::vector<UserId> members;
  // Mean of the members' scores; unset for an empty cohort.
  std::optional<double> mean_profile_popularity;
};

enum class GroupingScheme { kEqualWidth, kEqualCount };

std::string_view to_string(GroupingScheme scheme);
GroupingScheme parse_grouping_scheme(std::string_view name);

struct CohortPartition {
  std::string name;
  std::vector<Cohort> cohorts;
  // At least one cohort has no members.
  bool has_empty_cohort = false;
  // Users left out of every cohort (unknown gender).
  std::size_t excluded = 0;
  std::vector<std::string> warnings;

  std::map<UserId, std::string> label_of() const;
};

// Mean theta over the user's training profile. Throws DataError when the
// user has no training ratings.
double profile_avg_popularity(UserId user, const RatingsDataset& train,
                              const ItemPopularity& popularity);

// Splits users into G1..Gn by score. Equal-width cuts [min, max] into n
// intervals (the last closed); equal-count cuts the sorted users into n
// contiguous blocks and keeps tied scores in the lower block.
CohortPartition group_by_popularity(const std::map<UserId, double>& scores,
                                    int n_groups, GroupingScheme scheme);

// Cohorts "men" and "women"; users with unknown or missing gender are
// excluded and counted.
CohortPartition group_by_gender(std::span<const UserId> users,
                                const UserDemographics& demographics);

// CSV `user_id,partition,label`.
void write_cohorts(std::ostream& out,
                   std::span<const CohortPartition> partitions);

}  // namespace popaudit
