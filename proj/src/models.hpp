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

// Concrete model classes behind TrainedModel.

#include <cstdint>
#include <istream>
#include <memory>
#include <vector>

#include "popaudit/recommend.hpp"

namespace popaudit::detail {

struct Neighbor {
  std::uint32_t index;
  double similarity;
};

// Ranks items by training rating count.
class MostPopularModel final : public TrainedModel {
 public:
  MostPopularModel(std::shared_ptr<const RatingsDataset> train,
                   AlgoConfig config);

  double score(std::size_t user, std::size_t item) const override;
  void score_items(std::size_t user, std::span<double> scores,
                   std::span<std::uint8_t> fallback) const override;

 protected:
  double cold_score(std::optional<std::size_t> user,
                    std::optional<std::size_t> item) const override;
  void save_parameters(std::ostream& out) const override;

 private:
  std::vector<double> counts_;
};

// User- or item-based neighbourhood model with a fixed top-k neighbour list
// per entity. For UserKNN the neighbours of a user vote on the items they
// rated; for ItemKNN the user's rated items that fall in a candidate's
// neighbour list vote for the candidate.
class KnnModel final : public TrainedModel {
 public:
  KnnModel(std::shared_ptr<const RatingsDataset> train, AlgoConfig config,
           std::vector<std::vector<Neighbor>> neighbors);

  double score(std::size_t user, std::size_t item) const override;
  void score_items(std::size_t user, std::span<double> scores,
                   std::span<std::uint8_t> fallback) const override;

  const std::vector<std::vector<Neighbor>>& neighbors() const {
    return neighbors_;
  }

 protected:
  double cold_score(std::optional<std::size_t> user,
                    std::optional<std::size_t> item) const override;
  void save_parameters(std::ostream& out) const override;

 private:
  double combine(double weighted_sum, double similarity_sum) const;

  std::vector<std::vector<Neighbor>> neighbors_;
  // ItemKNN only: for item j, the items whose neighbour list contains j.
  std::vector<std::vector<Neighbor>> reverse_;
  std::vector<double> popularity_;
};

// Builds top-k neighbour lists for every user (UserKNN) or item (ItemKNN).
std::vector<std::vector<Neighbor>> compute_neighbors(
    const RatingsDataset& train, const AlgoConfig& config, unsigned threads);

// Biased matrix factorization, optionally with the SVD++ implicit term.
class FactorModel final : public TrainedModel {
 public:
  struct Parameters {
    double global_mean = 0.0;
    std::vector<double> user_bias;
    std::vector<double> item_bias;
    std::vector<double> user_factors;      // num_users x factors
    std::vector<double> item_factors;      // num_items x factors
    std::vector<double> implicit_factors;  // num_items x factors, SVD++ only
  };

  FactorModel(std::shared_ptr<const RatingsDataset> train, AlgoConfig config,
              Parameters params, std::vector<double> objective,
              std::vector<double> rmse);

  double score(std::size_t user, std::size_t item) const override;
  void score_items(std::size_t user, std::span<double> scores,
                   std::span<std::uint8_t> fallback) const override;

  const Parameters& parameters() const { return params_; }

 protected:
  double cold_score(std::optional<std::size_t> user,
                    std::optional<std::size_t> item) const override;
  void save_parameters(std::ostream& out) const override;

 private:
  // p_u, plus |N(u)|^-1/2 * sum of y_j for SVD++.
  std::vector<double> user_vector(std::size_t user) const;

  Parameters params_;
};

std::unique_ptr<TrainedModel> fit_factor_model(
    std::shared_ptr<const RatingsDataset> train, const AlgoConfig& config);

// Parameter readers used by load_model.
std::unique_ptr<TrainedModel> load_most_popular(
    std::shared_ptr<const RatingsDataset> train, AlgoConfig config,
    std::istream& in);
std::unique_ptr<TrainedModel> load_knn(
    std::shared_ptr<const RatingsDataset> train, AlgoConfig config,
    std::istream& in);
std::unique_ptr<TrainedModel> load_factor_model(
    std::shared_ptr<const RatingsDataset> train, AlgoConfig config,
    std::istream& in);

}  // namespace popaudit::detail
