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

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "popaudit/cohorts.hpp"
#include "popaudit/error.hpp"
#include "test_util.hpp"

namespace popaudit {
namespace {

std::map<UserId, double> grid_scores(int n, double step) {
  std::map<UserId, double> scores;
  for (int k = 0; k < n; ++k) scores[UserId{k + 1}] = k * step;
  return scores;
}

std::vector<std::size_t> sizes(const CohortPartition& p) {
  std::vector<std::size_t> out;
  for (const auto& c : p.cohorts) out.push_back(c.members.size());
  return out;
}

void expect_partition(const CohortPartition& p, const std::map<UserId, double>& scores) {
  std::set<UserId> seen;
  for (const auto& c : p.cohorts) {
    for (const UserId u : c.members) EXPECT_TRUE(seen.insert(u).second) << u.value;
  }
  EXPECT_EQ(seen.size(), scores.size());
  std::optional<double> last;
  for (const auto& c : p.cohorts) {
    if (!c.mean_profile_popularity) continue;
    if (last) EXPECT_LE(*last, *c.mean_profile_popularity);
    last = c.mean_profile_popularity;
  }
}

TEST(ProfileAvgPopularity, MeanThetaOfProfile) {
  std::map<ItemId, double> m = {{ItemId{1}, 0.4}, {ItemId{2}, 0.1}, {ItemId{3}, 0.2},
                                {ItemId{4}, 0.3}, {ItemId{5}, 0.0}};
  const ItemPopularity theta(m);
  const auto train = testutil::make_dataset(
      {{1, 1, 5}, {2, 2, 3}, {2, 3, 3}, {2, 4, 3}, {3, 5, 1}});
  EXPECT_DOUBLE_EQ(profile_avg_popularity(UserId{1}, train, theta), 0.4);
  EXPECT_NEAR(profile_avg_popularity(UserId{2}, train, theta), 0.2, 1e-15);
  EXPECT_EQ(profile_avg_popularity(UserId{3}, train, theta), 0.0);
  EXPECT_THROW(profile_avg_popularity(UserId{9}, train, theta), DataError);
}

TEST(GroupByPopularity, EqualCountHundredUsers) {
  const auto p = group_by_popularity(grid_scores(100, 0.01), 10, GroupingScheme::kEqualCount);
  EXPECT_EQ(sizes(p), std::vector<std::size_t>(10, 10));
  EXPECT_EQ(p.cohorts.front().label, "G1");
  EXPECT_EQ(p.cohorts.back().label, "G10");
  EXPECT_FALSE(p.has_empty_cohort);
  EXPECT_TRUE(p.warnings.empty());
}

TEST(GroupByPopularity, EqualWidthBoundariesAtTenthSteps) {
  // Scores 0.00 .. 1.00; each interval is half-open except the last.
  std::map<UserId, double> exact;
  for (int k = 0; k <= 100; ++k) exact[UserId{k + 1}] = k / 100.0;
  const auto p = group_by_popularity(exact, 10, GroupingScheme::kEqualWidth);
  std::vector<std::size_t> expected(10, 10);
  expected.back() = 11;
  EXPECT_EQ(sizes(p), expected);
  const auto labels = p.label_of();
  for (int k = 1; k < 10; ++k) {
    EXPECT_EQ(labels.at(UserId{10 * k + 1}), "G" + std::to_string(k + 1)) << k;
    EXPECT_EQ(labels.at(UserId{10 * k}), "G" + std::to_string(k)) << k;
  }
  EXPECT_EQ(labels.at(UserId{101}), "G10");
  expect_partition(p, exact);
}

TEST(GroupByPopularity, EqualCountKeepsTiesInLowerBlock) {
  const std::map<UserId, double> scores = {{UserId{1}, 0.1}, {UserId{2}, 0.2},
                                           {UserId{3}, 0.2}, {UserId{4}, 0.2},
                                           {UserId{5}, 0.3}, {UserId{6}, 0.4}};
  const auto p = group_by_popularity(scores, 3, GroupingScheme::kEqualCount);
  EXPECT_EQ(sizes(p), (std::vector<std::size_t>{4, 0, 2}));
  EXPECT_TRUE(p.has_empty_cohort);
  EXPECT_FALSE(p.cohorts[1].mean_profile_popularity);
}

TEST(GroupByPopularity, FewDistinctScoresAreFlagged) {
  const std::map<UserId, double> scores = {{UserId{1}, 0.5}, {UserId{2}, 0.5}, {UserId{3}, 0.5}};
  for (auto scheme : {GroupingScheme::kEqualWidth, GroupingScheme::kEqualCount}) {
    const auto p = group_by_popularity(scores, 10, scheme);
    EXPECT_TRUE(p.has_empty_cohort);
    ASSERT_EQ(p.warnings.size(), 1u);
    EXPECT_EQ(p.cohorts[0].members.size(), 3u);
  }
}

TEST(GroupByPopularity, RejectsBadInput) {
  EXPECT_THROW(group_by_popularity(grid_scores(5, 0.1), 1, GroupingScheme::kEqualWidth),
               UsageError);
  EXPECT_THROW(group_by_popularity({{UserId{1}, std::nan("")}}, 2, GroupingScheme::kEqualWidth),
               DataError);
  EXPECT_THROW(parse_grouping_scheme("quantile"), UsageError);
  EXPECT_EQ(parse_grouping_scheme(to_string(GroupingScheme::kEqualCount)),
            GroupingScheme::kEqualCount);
}

TEST(GroupByPopularity, PartitionAndMonotoneOnRandomScores) {
  std::mt19937_64 rng(99);
  std::lognormal_distribution<double> d(-2.0, 0.6);
  for (int trial = 0; trial < 20; ++trial) {
    std::map<UserId, double> scores;
    for (int u = 1; u <= 500; ++u) scores[UserId{u}] = std::min(1.0, d(rng));
    for (auto scheme : {GroupingScheme::kEqualWidth, GroupingScheme::kEqualCount}) {
      expect_partition(group_by_popularity(scores, 10, scheme), scores);
    }
  }
}

TEST(GroupByPopularity, IndependentOfInsertionOrder) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::pair<UserId, double>> entries;
  for (int k = 1; k <= 200; ++k) entries.emplace_back(UserId{k}, std::round(u(rng) * 50) / 50);
  std::map<UserId, double> a(entries.begin(), entries.end());
  std::shuffle(entries.begin(), entries.end(), rng);
  std::map<UserId, double> b;
  for (const auto& e : entries) b.insert(e);
  for (auto scheme : {GroupingScheme::kEqualWidth, GroupingScheme::kEqualCount}) {
    EXPECT_EQ(group_by_popularity(a, 10, scheme).label_of(),
              group_by_popularity(b, 10, scheme).label_of());
  }
}

TEST(GroupByGender, UnknownAndMissingAreExcluded) {
  UserDemographics demo;
  demo.gender = {{UserId{1}, Gender::kMale}, {UserId{2}, Gender::kFemale},
                 {UserId{3}, Gender::kUnknown}, {UserId{5}, Gender::kFemale}};
  const std::vector<UserId> users = {UserId{5}, UserId{1}, UserId{2}, UserId{3}, UserId{4}};
  const auto p = group_by_gender(users, demo);
  ASSERT_EQ(p.cohorts.size(), 2u);
  EXPECT_EQ(p.cohorts[0].label, "men");
  EXPECT_EQ(p.cohorts[0].members, std::vector<UserId>{UserId{1}});
  EXPECT_EQ(p.cohorts[1].label, "women");
  EXPECT_EQ(p.cohorts[1].members, (std::vector<UserId>{UserId{2}, UserId{5}}));
  EXPECT_EQ(p.excluded, 2u);
  EXPECT_TRUE(p.warnings.empty());
}

TEST(GroupByGender, NoDemographicsGivesEmptyCohortsAndWarning) {
  const std::vector<UserId> users = {UserId{1}, UserId{2}};
  const auto p = group_by_gender(users, UserDemographics{});
  EXPECT_TRUE(p.cohorts[0].members.empty());
  EXPECT_TRUE(p.cohorts[1].members.empty());
  EXPECT_TRUE(p.has_empty_cohort);
  EXPECT_EQ(p.warnings.size(), 1u);
  EXPECT_EQ(p.excluded, 2u);
}

TEST(WriteCohorts, CsvRows) {
  const auto pop = group_by_popularity({{UserId{2}, 0.1}, {UserId{1}, 0.9}}, 2,
                                       GroupingScheme::kEqualWidth);
  UserDemographics demo;
  demo.gender = {{UserId{1}, Gender::kFemale}};
  const std::vector<UserId> users = {UserId{1}, UserId{2}};
  const std::vector<CohortPartition> parts = {pop, group_by_gender(users, demo)};
  std::ostringstream out;
  write_cohorts(out, parts);
  EXPECT_EQ(out.str(),
            "user_id,partition,label\n1,popularity,G2\n2,popularity,G1\n1,gender,women\n");
}

}  // namespace
}  // namespace popaudit
