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

#include <sstream>

#include <gtest/gtest.h>

#include "popaudit/config.hpp"
#include "popaudit/error.hpp"
#include "test_util.hpp"

namespace popaudit {
namespace {

const char* kBase = R"(schema_version = 1
[data]
format = movielens-1m
ratings = ratings.dat   # trailing comment
items = movies.dat

[split]
seed = 9
per_user = true

[evaluation]
list_size = 5
grouping = equal-count
relevance_threshold = 4

[algorithm ItemKNN]
neighborhood_size = 20
similarity = cosine

[algorithm BMF]
factors = 8

[grid BMF]
factors = 4, 8
learning_rate = 0.01, 0.02, 0.05
)";

ExperimentConfig parse(const std::string& text, const std::string& base = "/data") {
  std::istringstream in(text);
  return parse_config(in, base, "test.cfg");
}

std::string usage_message(const std::string& text) {
  try {
    parse(text);
  } catch (const UsageError& e) {
    return e.what();
  }
  return "<no error>";
}

TEST(ParseConfig, ReadsSectionsAndResolvesPaths) {
  const auto c = parse(kBase);
  EXPECT_EQ(c.ratings_path, std::filesystem::path("/data/ratings.dat"));
  EXPECT_EQ(c.items_path, std::filesystem::path("/data/movies.dat"));
  EXPECT_FALSE(c.users_path);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_TRUE(c.per_user_split);
  EXPECT_DOUBLE_EQ(c.split_ratio, 0.8);
  EXPECT_EQ(c.grouping, GroupingScheme::kEqualCount);
  EXPECT_EQ(c.relevance_threshold, 4.0);
  ASSERT_EQ(c.algorithms.size(), 2u);
  EXPECT_EQ(c.algorithm(Algorithm::kItemKNN).neighborhood_size, 20);
  // The evaluation list size reaches every algorithm.
  EXPECT_EQ(c.algorithm(Algorithm::kBMF).list_size, 5);
  EXPECT_EQ(c.grid(Algorithm::kItemKNN), nullptr);
  EXPECT_THROW(c.algorithm(Algorithm::kSVDpp), UsageError);
  EXPECT_NO_THROW(c.validate(false));
}

TEST(ParameterGrid, LastAxisVariesFastest) {
  const auto c = parse(kBase);
  const auto* grid = c.grid(Algorithm::kBMF);
  ASSERT_NE(grid, nullptr);
  EXPECT_EQ(grid->size(), 6u);
  const auto points = grid->expand(c.algorithm(Algorithm::kBMF));
  ASSERT_EQ(points.size(), 6u);
  EXPECT_EQ(points[0].factors, 4);
  EXPECT_DOUBLE_EQ(points[0].learning_rate, 0.01);
  EXPECT_DOUBLE_EQ(points[1].learning_rate, 0.02);
  EXPECT_EQ(points[3].factors, 8);
  EXPECT_DOUBLE_EQ(points[5].learning_rate, 0.05);
  for (const auto& p : points) EXPECT_EQ(p.list_size, 5);
}

TEST(RenderConfig, RoundTrips) {
  const auto c = parse(kBase);
  const std::string text = c.render();
  const auto again = parse(text, "/elsewhere");
  EXPECT_EQ(again.render(), text);
  EXPECT_EQ(again.ratings_path, c.ratings_path);
  EXPECT_EQ(again.algorithms, c.algorithms);
  EXPECT_EQ(c.render(false).find("[output]"), std::string::npos);
}

TEST(RenderConfig, DelimitedFormatRoundTrips) {
  const auto c = parse(R"(schema_version = 1
[data]
format = delimited-generic
ratings = r.tsv
delimiter = tab
header = true
rating_min = 0.5
rating_max = 5
items = items.csv
catalog_delimiter = comma
catalog_genre_column = 2
genre_separator = |
[algorithm MostPopular]
)");
  const std::string text = c.render();
  EXPECT_EQ(parse(text).render(), text);
}

TEST(ParseConfig, ErrorsCarryLineNumbers) {
  EXPECT_EQ(usage_message("schema_version = 1\n[data]\nbogus = 1\n"),
            "test.cfg:3: unknown [data] key 'bogus'");
  EXPECT_EQ(usage_message("schema_version = 1\n[algorithm BMF]\nfactors = many\n").rfind(
                "test.cfg:3:", 0),
            0u);
  EXPECT_EQ(usage_message("schema_version = 1\n[grid BMF]\nepochs = 5, x\n").rfind(
                "test.cfg:3:", 0),
            0u);
  EXPECT_EQ(usage_message("schema_version = 2\n").rfind("test.cfg:1:", 0), 0u);
  EXPECT_EQ(usage_message("[data]\nratings = r\n"), "test.cfg: missing schema_version");
  EXPECT_NE(usage_message("schema_version = 1\n[algorithm Nope]\n"), "<no error>");
  EXPECT_NE(usage_message("schema_version = 1\n[algorithm BMF]\n[algorithm BMF]\n"),
            "<no error>");
  EXPECT_NE(usage_message("schema_version = 1\n[data\n"), "<no error>");
  EXPECT_NE(usage_message("schema_version = 1\n[data]\njust text\n"), "<no error>");
}

TEST(ValidateConfig, RangeChecks) {
  auto c = parse(kBase);
  c.split_ratio = 1.0;
  EXPECT_THROW(c.validate(false), UsageError);
  c = parse(kBase);
  c.n_groups = 1;
  EXPECT_THROW(c.validate(false), UsageError);
  c = parse(kBase);
  c.kl_epsilon = 0;
  EXPECT_THROW(c.validate(false), UsageError);
  c = parse(kBase);
  c.algorithms.clear();
  EXPECT_THROW(c.validate(false), UsageError);
  c = parse(kBase);
  EXPECT_THROW(c.validate(true), DataError);
}

TEST(LoadConfig, ShippedFixtureConfigIsValid) {
  const auto c = load_config(std::filesystem::path(POPAUDIT_SOURCE_DIR) / "configs" /
                             "ci_fixture.cfg");
  EXPECT_NO_THROW(c.validate(true));
  EXPECT_TRUE(c.users_path);
  EXPECT_THROW(load_config("/nonexistent/x.cfg"), UsageError);
}

}  // namespace
}  // namespace popaudit
