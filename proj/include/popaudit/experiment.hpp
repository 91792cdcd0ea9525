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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "popaudit/cohorts.hpp"
#include "popaudit/config.hpp"
#include "popaudit/dataset.hpp"
#include "popaudit/metadata.hpp"
#include "popaudit/metrics.hpp"
#include "popaudit/recommend.hpp"
#include "popaudit/stats.hpp"

namespace popaudit {

using Logger = std::function<void(std::string_view)>;

// Logs to stderr with a "[popaudit]" prefix.
Logger stderr_logger();
Logger null_logger();

struct DataSummary {
  std::size_t raw_ratings = 0;
  std::size_t raw_users = 0;
  std::size_t raw_items = 0;
  std::size_t ratings = 0;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t train_ratings = 0;
  std::size_t test_ratings = 0;
  std::size_t train_users = 0;
  std::size_t test_users = 0;
  std::size_t test_users_not_in_train = 0;
  std::size_t items_not_in_catalog = 0;
  std::size_t users_without_catalogued_items = 0;
  std::size_t men = 0;
  std::size_t women = 0;
  std::size_t unknown_gender = 0;
};

struct CohortRow {
  std::string label;
  // Evaluated members only.
  std::size_t size = 0;
  std::optional<double> gap_p;
  std::optional<double> gap_q;
  std::optional<double> lift;
  std::optional<double> miscalibration;
};

struct AlgorithmReport {
  AlgoConfig config;
  double precision = 0.0;
  std::size_t precision_users = 0;
  std::size_t precision_excluded_no_test = 0;
  std::size_t test_users_without_list = 0;

  std::size_t users_evaluated = 0;
  std::size_t excluded_empty_profile = 0;
  std::size_t excluded_empty_list = 0;
  std::size_t short_lists = 0;
  // Users left out of the per-user lift samples (profile popularity 0).
  std::size_t lift_undefined = 0;

  double gap_p = 0.0;
  double gap_q = 0.0;
  std::optional<double> lift;
  double miscalibration = 0.0;
  double kl_miscalibration = 0.0;

  std::vector<CohortRow> popularity_groups;
  std::vector<CohortRow> gender_groups;

  // A = first popularity group (lowest), B = last; per-user values.
  std::optional<TestResult> extreme_lift_test;
  std::optional<TestResult> extreme_miscalibration_test;
  // A = women, B = men.
  std::optional<TestResult> gender_lift_test;
  std::optional<TestResult> gender_miscalibration_test;
  // Spearman over popularity groups of (GAP_p, PL).
  std::optional<double> group_trend_spearman;
};

struct AuditReport {
  std::string config_echo;
  std::uint64_t split_seed = 0;
  DataSummary data;
  std::vector<AlgorithmReport> algorithms;
  // Pearson over algorithms of (total PL, total MC).
  std::optional<double> lift_miscalibration_pearson;
  std::vector<std::string> warnings;

  const AlgorithmReport& algorithm(Algorithm a) const;

  // Both renderings are byte-deterministic.
  std::string to_json() const;
  std::string to_text() const;
};

struct LongTailRow {
  ItemId item;
  std::size_t times_rated = 0;
  double popularity = 0.0;
  double cumulative_share = 0.0;
};

// Report plus the per-item and per-user tables behind the figures.
struct ExperimentResult {
  AuditReport report;
  std::vector<LongTailRow> long_tail;
  // (user, profile average popularity), ascending value then id.
  std::vector<std::pair<UserId, double>> user_propensity;
  CohortPartition popularity_groups;
  CohortPartition gender_groups;
  std::vector<std::pair<Algorithm, std::vector<ItemExposureRow>>> exposure;
};

struct FigureTable {
  std::string file_name;
  std::string csv;
};

// fig2 .. fig9; fig5 is the same scatter as fig4.
const std::vector<std::string>& figure_ids();
// Throws UsageError listing the valid ids for an unknown id.
FigureTable export_figure_data(const ExperimentResult& result,
                               std::string_view which);

struct TuningTrial {
  AlgoConfig config;
  // Unset when training diverged.
  std::optional<double> precision;
  std::string note;
};

struct TuningResult {
  AlgoConfig best;
  std::vector<TuningTrial> trials;
};

// Grid search maximizing precision on an inner split of `train`; the first
// grid point wins ties. MostPopular and algorithms without a grid return
// `base` untouched. Throws UsageError for an empty grid and NumericalError
// when every point diverges.
TuningResult tune_algorithm(const AlgoConfig& base, const ParameterGrid* grid,
                            std::shared_ptr<const RatingsDataset> train,
                            const ExperimentConfig& config,
                            const Logger& log = null_logger());

struct PreparedData {
  std::shared_ptr<const RatingsDataset> dataset;
  std::shared_ptr<const RatingsDataset> train;
  std::shared_ptr<const RatingsDataset> test;
  std::vector<Partition> assignment;
  std::shared_ptr<const ItemCatalog> catalog;
  std::optional<UserDemographics> demographics;
  DataSummary summary;
  std::vector<std::string> warnings;
};

// One experiment bound to its output directory. Every stage persists its
// outputs and, when run in a fresh process, picks up the previous stage's
// files, so stages can be rerun one at a time:
//
//   split/manifest.csv, split/params.txt    prepare
//   tuning/<algo>.csv, tuning/<algo>.best   tune
//   models/<algo>.model                     train
//   recs/<algo>.csv                         recommend
//   metrics/<algo>.users.csv, cohorts.csv   evaluate
//   report.json, report.txt                 report
//   figures/<id>.csv                        export-fig
//
// STATUS holds the last stage and whether it finished; a failed stage
// leaves "failed <stage>: <cause>" there. Stage errors are rethrown with
// the stage name prepended, keeping their type.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config, Logger log = stderr_logger());

  const ExperimentConfig& config() const { return config_; }

  void prepare();
  std::vector<std::pair<Algorithm, TuningResult>> tune();
  void train();
  void recommend();
  const ExperimentResult& evaluate();
  const AuditReport& report();
  void export_figures(const std::vector<std::string>& ids);

 private:
  const PreparedData& data();
  AlgoConfig effective_config(const AlgoConfig& configured) const;
  const TrainedModel& model(Algorithm a);
  const RecommendationSet& recommendations(Algorithm a);
  template <typename F>
  auto stage(std::string_view name, F&& body);

  ExperimentConfig config_;
  Logger log_;
  std::filesystem::path out_;
  std::optional<PreparedData> data_;
  std::map<Algorithm, std::unique_ptr<TrainedModel>> models_;
  std::map<Algorithm, RecommendationSet> recs_;
  std::optional<ExperimentResult> result_;
};

// prepare, tune, train, recommend, evaluate, report and every figure.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                Logger log = stderr_logger());

// Creates parent directories and replaces `path` via a temporary file.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace popaudit
