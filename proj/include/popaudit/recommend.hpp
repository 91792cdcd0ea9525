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
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "popaudit/dataset.hpp"
#include "popaudit/ids.hpp"

namespace popaudit {

enum class Algorithm { kUserKNN, kItemKNN, kBMF, kSVDpp, kMostPopular };

std::string_view to_string(Algorithm algorithm);
// Accepts the canonical names UserKNN, ItemKNN, BMF, SVDpp (or SVD++) and
// MostPopular. Throws UsageError otherwise.
Algorithm parse_algorithm(std::string_view name);

enum class Similarity { kCosine, kPearson };

// How neighbour evidence becomes a score. kWeightedAverage predicts a
// rating; kSimilaritySum ranks by accumulated similarity and is the usual
// choice for top-N lists.
enum class KnnScoring { kWeightedAverage, kSimilaritySum };

struct AlgoConfig {
  Algorithm algorithm = Algorithm::kMostPopular;

  // Neighbourhood models.
  int neighborhood_size = 50;
  Similarity similarity = Similarity::kCosine;
  bool mean_center = true;
  double shrinkage = 0.0;
  KnnScoring scoring = KnnScoring::kWeightedAverage;

  // Factorization models.
  int factors = 20;
  double learning_rate = 0.01;
  double regularization = 0.02;
  int epochs = 30;
  double init_std = 0.1;

  std::uint64_t seed = 1;
  int list_size = 10;

  // Throws UsageError when a hyperparameter is out of range.
  void validate() const;

  // Canonical `key=value` lines for the fields relevant to `algorithm`.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  // Applies one `key=value` setting. Throws UsageError on unknown keys or
  // unparsable values.
  void set(std::string_view key, std::string_view value);

  bool operator==(const AlgoConfig&) const = default;
};

// A model fitted on one training set. Users and items are addressed by the
// training set's dense indices; only training users and items can be
// scored by index. Models are immutable after fit and safe to share.
class TrainedModel {
 public:
  virtual ~TrainedModel() = default;

  const AlgoConfig& config() const { return config_; }
  Algorithm algorithm() const { return config_.algorithm; }
  const RatingsDataset& train() const { return *train_; }
  // Digest of the training data plus the configuration.
  std::uint64_t fingerprint() const;

  virtual double score(std::size_t user, std::size_t item) const = 0;

  // Scores every training item for `user`. `fallback[i]` is set when the
  // score came from the cold-start rule; such items rank after every item
  // with a regular score.
  virtual void score_items(std::size_t user, std::span<double> scores,
                           std::span<std::uint8_t> fallback) const = 0;

  // Scores by id. Ids unknown to the training set use the cold-start rule:
  // mean plus known biases for factorization models, training popularity
  // for the others.
  double score(UserId user, ItemId item) const;

  // Per-epoch training objective (squared error plus L2 penalty) for
  // factorization models; empty otherwise.
  const std::vector<double>& objective_curve() const { return objective_; }
  // Per-epoch training RMSE for factorization models.
  const std::vector<double>& rmse_curve() const { return rmse_; }

  // Versioned text dump; load_model restores an identical model.
  void save(std::ostream& out) const;

 protected:
  TrainedModel(std::shared_ptr<const RatingsDataset> train, AlgoConfig config)
      : train_(std::move(train)), config_(std::move(config)) {}

  virtual double cold_score(std::optional<std::size_t> user,
                            std::optional<std::size_t> item) const = 0;
  virtual void save_parameters(std::ostream& out) const = 0;

  std::shared_ptr<const RatingsDataset> train_;
  AlgoConfig config_;
  std::vector<double> objective_;
  std::vector<double> rmse_;

  friend std::unique_ptr<TrainedModel> load_model(
      std::istream& in, std::shared_ptr<const RatingsDataset> train);
};

// Fits a model. KNN similarity rows are computed on up to `threads`
// threads; SGD is sequential. Deterministic given config.seed. Throws
// NumericalError when SGD diverges.
std::unique_ptr<TrainedModel> fit(std::shared_ptr<const RatingsDataset> train,
                                  const AlgoConfig& config,
                                  unsigned threads = 0);

// Throws DataError if the dump was produced on different training data.
std::unique_ptr<TrainedModel> load_model(
    std::istream& in, std::shared_ptr<const RatingsDataset> train);

struct Recommendation {
  ItemId item;
  double score = 0.0;
  bool operator==(const Recommendation&) const = default;
};

struct RecommendationList {
  std::vector<Recommendation> items;
  // Fewer than N unrated candidates existed.
  bool short_list = false;
  bool operator==(const RecommendationList&) const = default;
};

struct RecommendationSet {
  std::map<UserId, RecommendationList> lists;
  std::size_t list_size = 10;
  std::uint64_t model_fingerprint = 0;
  bool operator==(const RecommendationSet&) const = default;
};

// The n best-scoring training items the user has not rated, by descending
// score with ties broken by ascending item id.
RecommendationList recommend_top_n(const TrainedModel& model, UserId user,
                                   std::size_t n);
RecommendationList recommend_top_n(const TrainedModel& model,
                                   std::size_t user_index, std::size_t n);

// Lists for every training user.
RecommendationSet recommend_all(const TrainedModel& model, std::size_t n,
                                unsigned threads = 0);

// CSV `user_id,rank,item_id,score`, rank 1-based.
void write_recommendations(std::ostream& out, const RecommendationSet& recs);
RecommendationSet read_recommendations(std::istream& in, std::size_t list_size,
                                       const std::string& source);

struct PrecisionResult {
  double mean = 0.0;
  std::map<UserId, double> per_user;
  // Users with a list but no test ratings at all.
  std::size_t excluded_empty_test = 0;
  // Test users that received no list (absent from training).
  std::size_t test_users_without_list = 0;
};

// Per user: |list ∩ relevant test items| / N. A test rating is relevant
// when no threshold is given or its value is >= the threshold. Users
// without test ratings are left out of the mean.
PrecisionResult precision_at_n(const RecommendationSet& recs,
                               const RatingsDataset& test,
                               std::optional<double> relevance_threshold = {});

}  // namespace popaudit
