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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "oracle/brute_force.hpp"
#include "popaudit/error.hpp"
#include "popaudit/experiment.hpp"
#include "test_util.hpp"

namespace popaudit {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig fixture_config(const std::string& out_name) {
  auto c = load_config(fs::path(POPAUDIT_SOURCE_DIR) / "configs" / "ci_fixture.cfg");
  c.output_dir = testutil::scratch_dir(out_name);
  return c;
}

AlgoConfig algo(Algorithm a) {
  AlgoConfig c;
  c.algorithm = a;
  c.neighborhood_size = 10;
  c.factors = 4;
  c.epochs = 15;
  return c;
}

ExperimentConfig all_algorithms(const std::string& out_name) {
  auto c = fixture_config(out_name);
  c.algorithms = {algo(Algorithm::kItemKNN), algo(Algorithm::kUserKNN),
                  algo(Algorithm::kBMF), algo(Algorithm::kSVDpp),
                  algo(Algorithm::kMostPopular)};
  return c;
}

// Per-user CSV columns keyed by user id.
struct UserCsv {
  std::map<long, double> profile_pop, rec_pop, mc;
  std::map<long, std::string> group;
};

UserCsv read_user_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  UserCsv out;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string user, group, a, b, c;
    std::getline(row, user, ',');
    std::getline(row, group, ',');
    std::getline(row, a, ',');
    std::getline(row, b, ',');
    std::getline(row, c, ',');
    const long u = std::stol(user);
    out.group[u] = group;
    out.profile_pop[u] = std::stod(a);
    out.rec_pop[u] = std::stod(b);
    out.mc[u] = std::stod(c);
  }
  return out;
}

double mean(const std::map<long, double>& m) {
  double s = 0;
  for (const auto& [k, v] : m) s += v;
  return s / static_cast<double>(m.size());
}

TEST(Experiment, FixtureRunIsFastAndByteDeterministic) {
  const auto start = std::chrono::steady_clock::now();
  const auto a = fixture_config("exp_det_a");
  run_experiment(a, null_logger());
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(seconds, 5.0);

  const auto b = fixture_config("exp_det_b");
  run_experiment(b, null_logger());
  for (const char* rel : {"report.json", "report.txt", "recs/MostPopular.csv",
                          "metrics/MostPopular.users.csv", "metrics/cohorts.csv",
                          "split/manifest.csv", "figures/fig8_group_lift.csv"}) {
    const auto left = slurp(a.output_dir / rel);
    EXPECT_FALSE(left.empty()) << rel;
    EXPECT_EQ(left, slurp(b.output_dir / rel)) << rel;
  }
  EXPECT_EQ(slurp(a.output_dir / "STATUS"), "ok export-fig\n");
  for (const auto& id : figure_ids()) {
    const auto table = export_figure_data(run_experiment(a, null_logger()), id);
    EXPECT_TRUE(fs::exists(a.output_dir / "figures" / table.file_name)) << id;
  }
}

TEST(Experiment, ReportMatchesBruteForceFromPersistedFiles) {
  const auto c = fixture_config("exp_oracle");
  const auto result = run_experiment(c, null_logger());
  const auto& report = result.report.algorithm(Algorithm::kMostPopular);

  // Rebuild train and the lists from what was written to disk.
  const auto dataset = testutil::fixture_ratings("ci_fixture");
  std::istringstream manifest(slurp(c.output_dir / "split" / "manifest.csv"));
  const auto train =
      apply_assignment(dataset, read_manifest(manifest, dataset.size()), 0.8, 42).train;
  std::istringstream recs_in(slurp(c.output_dir / "recs" / "MostPopular.csv"));
  const auto recs = read_recommendations(recs_in, 10, "recs");
  const auto t = testutil::triples(train);
  const auto lists = testutil::lists(recs);
  const auto genres = testutil::fixture_genres("ci_fixture");
  std::vector<long> users;
  for (const auto& [u, l] : lists) users.push_back(u);

  EXPECT_EQ(report.users_evaluated, users.size());
  EXPECT_NEAR(report.gap_p, oracle::gap_profile(t, users), 1e-9);
  EXPECT_NEAR(report.gap_q, oracle::gap_recs(t, lists, users), 1e-9);
  EXPECT_NEAR(*report.lift, oracle::popularity_lift(t, lists, users), 1e-9);
  EXPECT_NEAR(report.miscalibration, oracle::group_miscalibration(t, genres, lists, users),
              1e-9);

  // Per-user CSV re-parses to the same totals.
  const auto csv = read_user_csv(c.output_dir / "metrics" / "MostPopular.users.csv");
  EXPECT_EQ(csv.mc.size(), users.size());
  EXPECT_NEAR(mean(csv.profile_pop), report.gap_p, 1e-12);
  EXPECT_NEAR(mean(csv.rec_pop), report.gap_q, 1e-12);
  EXPECT_NEAR(mean(csv.mc), report.miscalibration, 1e-12);

  // Each popularity group's numbers follow from its members' rows.
  for (const auto& row : report.popularity_groups) {
    std::map<long, double> p, q, m;
    for (const auto& [u, g] : csv.group) {
      if (g != row.label) continue;
      p[u] = csv.profile_pop.at(u);
      q[u] = csv.rec_pop.at(u);
      m[u] = csv.mc.at(u);
    }
    ASSERT_EQ(row.size, p.size()) << row.label;
    if (p.empty()) {
      EXPECT_FALSE(row.gap_p);
      continue;
    }
    EXPECT_NEAR(*row.gap_p, mean(p), 1e-12);
    EXPECT_NEAR(*row.gap_q, mean(q), 1e-12);
    EXPECT_NEAR(*row.miscalibration, mean(m), 1e-12);
    EXPECT_NEAR(*row.lift, (mean(q) - mean(p)) / mean(p), 1e-12);
  }
}

TEST(Experiment, TotalMiscalibrationIsSizeWeightedGroupMean) {
  const auto result = run_experiment(all_algorithms("exp_all"), null_logger());
  ASSERT_EQ(result.report.algorithms.size(), 5u);
  for (const auto& a : result.report.algorithms) {
    double weighted = 0;
    std::size_t n = 0;
    for (const auto& row : a.popularity_groups) {
      if (row.miscalibration) weighted += *row.miscalibration * static_cast<double>(row.size);
      n += row.size;
    }
    EXPECT_EQ(n, a.users_evaluated);
    EXPECT_NEAR(weighted / static_cast<double>(n), a.miscalibration, 1e-12);
    EXPECT_GE(a.precision, 0.0);
    EXPECT_LE(a.precision, 1.0);
    std::size_t gender = 0;
    for (const auto& row : a.gender_groups) gender += row.size;
    EXPECT_LE(gender, a.users_evaluated);
    ASSERT_TRUE(a.gender_lift_test);
    EXPECT_EQ(a.gender_lift_test->n_a + a.gender_lift_test->n_b + a.lift_undefined, gender);
  }
  EXPECT_TRUE(result.report.lift_miscalibration_pearson);
  EXPECT_EQ(result.report.data.men + result.report.data.women +
                result.report.data.unknown_gender,
            result.report.data.train_users);
}

TEST(Experiment, StageByStageEqualsOneShotRun) {
  const auto whole = all_algorithms("exp_whole");
  run_experiment(whole, null_logger());

  auto staged = all_algorithms("exp_staged");
  // A new object per stage mimics separate CLI invocations.
  Experiment(staged, null_logger()).prepare();
  Experiment(staged, null_logger()).tune();
  Experiment(staged, null_logger()).train();
  Experiment(staged, null_logger()).recommend();
  Experiment(staged, null_logger()).evaluate();
  Experiment(staged, null_logger()).report();
  Experiment(staged, null_logger()).export_figures(figure_ids());
  for (const char* rel : {"report.json", "recs/SVDpp.csv", "recs/ItemKNN.csv",
                          "models/BMF.model", "figures/fig9_lift_vs_miscalibration.csv"}) {
    EXPECT_EQ(slurp(whole.output_dir / rel), slurp(staged.output_dir / rel)) << rel;
  }
}

TEST(Experiment, ChangedSeedInvalidatesPersistedSplit) {
  auto c = fixture_config("exp_seed");
  run_experiment(c, null_logger());
  const auto first = slurp(c.output_dir / "split" / "manifest.csv");
  c.seed = 43;
  run_experiment(c, null_logger());
  EXPECT_NE(slurp(c.output_dir / "split" / "manifest.csv"), first);
  EXPECT_NE(slurp(c.output_dir / "split" / "params.txt").find("seed = 43"), std::string::npos);
}

TEST(Experiment, FailedStageLeavesMarker) {
  auto c = fixture_config("exp_fail");
  const auto bad = c.output_dir / "bad_ratings.dat";
  std::ofstream(bad) << "1::2::5::0\nnot a rating line\n";
  c.ratings_path = bad;
  try {
    Experiment(c, null_logger()).prepare();
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("stage prepare failed: ", 0), 0u) << e.what();
  }
  EXPECT_EQ(slurp(c.output_dir / "STATUS").rfind("failed prepare: ", 0), 0u);
}

TEST(Experiment, UnknownFigureIdListsValidIds) {
  const auto result = run_experiment(fixture_config("exp_fig"), null_logger());
  try {
    export_figure_data(result, "fig42");
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("fig9"), std::string::npos);
  }
  const auto fig5 = export_figure_data(result, "fig5");
  EXPECT_EQ(fig5.csv, export_figure_data(result, "fig4").csv);
}

TEST(Tuning, GridSearchBehaviour) {
  const auto c = fixture_config("exp_tune");
  const auto train = testutil::shared(split(testutil::fixture_ratings("ci_fixture"), 0.8, 42).train);

  const auto popular = tune_algorithm(algo(Algorithm::kMostPopular), nullptr, train, c);
  EXPECT_EQ(popular.best, algo(Algorithm::kMostPopular));
  EXPECT_TRUE(popular.trials.empty());

  ParameterGrid single{Algorithm::kItemKNN, {{"neighborhood_size", {"7"}}}};
  const auto one = tune_algorithm(algo(Algorithm::kItemKNN), &single, train, c);
  EXPECT_EQ(one.best.neighborhood_size, 7);
  ASSERT_EQ(one.trials.size(), 1u);
  EXPECT_TRUE(one.trials[0].precision);

  ParameterGrid rates{Algorithm::kBMF, {{"learning_rate", {"5", "0.01"}}}};
  const auto skipped = tune_algorithm(algo(Algorithm::kBMF), &rates, train, c);
  EXPECT_DOUBLE_EQ(skipped.best.learning_rate, 0.01);
  ASSERT_EQ(skipped.trials.size(), 2u);
  EXPECT_FALSE(skipped.trials[0].precision);
  EXPECT_FALSE(skipped.trials[0].note.empty());

  ParameterGrid hopeless{Algorithm::kBMF, {{"learning_rate", {"5", "8"}}}};
  EXPECT_THROW(tune_algorithm(algo(Algorithm::kBMF), &hopeless, train, c), NumericalError);
}

TEST(WriteFile, ReplacesAtomically) {
  const auto dir = testutil::scratch_dir("write_file");
  write_file(dir / "a" / "b.txt", "one");
  write_file(dir / "a" / "b.txt", "two");
  EXPECT_EQ(slurp(dir / "a" / "b.txt"), "two");
  EXPECT_FALSE(fs::exists(dir / "a" / "b.txt.tmp"));
}

}  // namespace
}  // namespace popaudit
