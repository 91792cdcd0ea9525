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

#include "popaudit/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "models.hpp"
#include "popaudit/error.hpp"
#include "popaudit/parallel.hpp"
#include "serialize.hpp"
#include "text.hpp"

namespace popaudit {
namespace {

constexpr std::string_view kModelMagic = "popaudit-model";
constexpr int kModelVersion = 1;

std::string_view similarity_name(Similarity s) {
  return s == Similarity::kCosine ? "cosine" : "pearson";
}

std::string_view scoring_name(KnnScoring s) {
  return s == KnnScoring::kWeightedAverage ? "weighted-average"
                                           : "similarity-sum";
}

bool is_knn(Algorithm a) {
  return a == Algorithm::kUserKNN || a == Algorithm::kItemKNN;
}

bool is_factor(Algorithm a) {
  return a == Algorithm::kBMF || a == Algorithm::kSVDpp;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  if constexpr (std::is_floating_point_v<T>) {
    if (const auto v = text::parse_double(value)) return *v;
  } else {
    if (const auto v = text::parse_int(value)) return static_cast<T>(*v);
  }
  throw UsageError(fmt::format("bad value '{}' for {}", value, key));
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kUserKNN:
      return "UserKNN";
    case Algorithm::kItemKNN:
      return "ItemKNN";
    case Algorithm::kBMF:
      return "BMF";
    case Algorithm::kSVDpp:
      return "SVDpp";
    case Algorithm::kMostPopular:
      return "MostPopular";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  name = text::trim(name);
  for (auto a : {Algorithm::kUserKNN, Algorithm::kItemKNN, Algorithm::kBMF,
                 Algorithm::kSVDpp, Algorithm::kMostPopular}) {
    if (name == to_string(a)) return a;
  }
  if (name == "SVD++") return Algorithm::kSVDpp;
  throw UsageError(fmt::format(
      "unknown algorithm '{}' (valid: UserKNN, ItemKNN, BMF, SVDpp, "
      "MostPopular)",
      name));
}

void AlgoConfig::validate() const {
  if (list_size < 1) throw UsageError("list_size must be >= 1");
  if (is_knn(algorithm)) {
    if (neighborhood_size < 1) {
      throw UsageError("neighborhood_size must be >= 1");
    }
    if (!(shrinkage >= 0.0)) throw UsageError("shrinkage must be >= 0");
  }
  if (is_factor(algorithm)) {
    if (factors < 1) throw UsageError("factors must be >= 1");
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw UsageError("learning_rate must be positive");
    }
    if (!(regularization > 0.0) || !std::isfinite(regularization)) {
      throw UsageError("regularization must be positive");
    }
    if (!(init_std > 0.0)) throw UsageError("init_std must be positive");
  }
}

std::vector<std::pair<std::string, std::string>> AlgoConfig::to_pairs() const {
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.emplace_back("algorithm", std::string(to_string(algorithm)));
  if (is_knn(algorithm)) {
    pairs.emplace_back("neighborhood_size", fmt::format("{}", neighborhood_size));
    pairs.emplace_back("similarity", std::string(similarity_name(similarity)));
    pairs.emplace_back("mean_center", mean_center ? "true" : "false");
    pairs.emplace_back("shrinkage", fmt::format("{}", shrinkage));
    pairs.emplace_back("scoring", std::string(scoring_name(scoring)));
  }
  if (is_factor(algorithm)) {
    pairs.emplace_back("factors", fmt::format("{}", factors));
    pairs.emplace_back("learning_rate", fmt::format("{}", learning_rate));
    pairs.emplace_back("regularization", fmt::format("{}", regularization));
    pairs.emplace_back("epochs", fmt::format("{}", epochs));
    pairs.emplace_back("init_std", fmt::format("{}", init_std));
  }
  pairs.emplace_back("seed", fmt::format("{}", seed));
  pairs.emplace_back("list_size", fmt::format("{}", list_size));
  return pairs;
}

void AlgoConfig::set(std::string_view key, std::string_view value) {
  key = text::trim(key);
  value = text::trim(value);
  if (key == "algorithm") {
    algorithm = parse_algorithm(value);
  } else if (key == "neighborhood_size") {
    neighborhood_size = parse_number<int>(key, value);
  } else if (key == "similarity") {
    if (value == "cosine") {
      similarity = Similarity::kCosine;
    } else if (value == "pearson") {
      similarity = Similarity::kPearson;
    } else {
      throw UsageError(fmt::format("unknown similarity '{}'", value));
    }
  } else if (key == "mean_center") {
    if (value != "true" && value != "false") {
      throw UsageError(fmt::format("mean_center must be true|false"));
    }
    mean_center = value == "true";
  } else if (key == "shrinkage") {
    shrinkage = parse_number<double>(key, value);
  } else if (key == "scoring") {
    if (value == "weighted-average") {
      scoring = KnnScoring::kWeightedAverage;
    } else if (value == "similarity-sum") {
      scoring = KnnScoring::kSimilaritySum;
    } else {
      throw UsageError(fmt::format("unknown scoring '{}'", value));
    }
  } else if (key == "factors") {
    factors = parse_number<int>(key, value);
  } else if (key == "learning_rate") {
    learning_rate = parse_number<double>(key, value);
  } else if (key == "regularization") {
    regularization = parse_number<double>(key, value);
  } else if (key == "epochs") {
    epochs = parse_number<int>(key, value);
  } else if (key == "init_std") {
    init_std = parse_number<double>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "list_size") {
    list_size = parse_number<int>(key, value);
  } else {
    throw UsageError(fmt::format("unknown algorithm setting '{}'", key));
  }
}

std::uint64_t TrainedModel::fingerprint() const {
  std::uint64_t h = train_->fingerprint();
  for (const auto& [k, v] : config_.to_pairs()) {
    for (char c : k + "=" + v + ";") {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

double TrainedModel::score(UserId user, ItemId item) const {
  const auto u = train_->user_index(user);
  const auto i = train_->item_index(item);
  if (u && i) return score(*u, *i);
  return cold_score(u, i);
}

void TrainedModel::save(std::ostream& out) const {
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "fingerprint " << fmt::format("{:016x}", train_->fingerprint())
      << '\n';
  const auto pairs = config_.to_pairs();
  out << "config " << pairs.size() << '\n';
  for (const auto& [k, v] : pairs) out << k << ' ' << v << '\n';
  out << "objective " << objective_.size();
  for (double v : objective_) out << ' ' << detail::hex(v);
  out << "\nrmse " << rmse_.size();
  for (double v : rmse_) out << ' ' << detail::hex(v);
  out << '\n';
  save_parameters(out);
  out << "end\n";
}

std::unique_ptr<TrainedModel> load_model(
    std::istream& in, std::shared_ptr<const RatingsDataset> train) {
  detail::expect_token(in, kModelMagic);
  const auto version = detail::read_unsigned(in);
  if (version != kModelVersion) {
    throw DataError(fmt::format("unsupported model version {}", version));
  }
  detail::expect_token(in, "fingerprint");
  const auto fp = detail::read_token(in);
  const auto expected = fmt::format("{:016x}", train->fingerprint());
  if (fp != expected) {
    throw DataError(fmt::format(
        "model was trained on data with fingerprint {} but the supplied "
        "training set has {}",
        fp, expected));
  }
  detail::expect_token(in, "config");
  const auto n = detail::read_unsigned(in);
  AlgoConfig config;
  for (unsigned long long k = 0; k < n; ++k) {
    const auto key = detail::read_token(in);
    const auto value = detail::read_token(in);
    config.set(key, value);
  }
  config.validate();
  auto read_curve = [&](std::string_view name) {
    detail::expect_token(in, name);
    std::vector<double> curve(detail::read_unsigned(in));
    for (double& v : curve) v = detail::read_double(in);
    return curve;
  };
  auto objective = read_curve("objective");
  auto rmse = read_curve("rmse");
  std::unique_ptr<TrainedModel> model;
  switch (config.algorithm) {
    case Algorithm::kMostPopular:
      model = detail::load_most_popular(train, config, in);
      break;
    case Algorithm::kUserKNN:
    case Algorithm::kItemKNN:
      model = detail::load_knn(train, config, in);
      break;
    case Algorithm::kBMF:
    case Algorithm::kSVDpp:
      model = detail::load_factor_model(train, config, in);
      break;
  }
  detail::expect_token(in, "end");
  model->objective_ = std::move(objective);
  model->rmse_ = std::move(rmse);
  return model;
}

std::unique_ptr<TrainedModel> fit(std::shared_ptr<const RatingsDataset> train,
                                  const AlgoConfig& config, unsigned threads) {
  if (!train || train->size() == 0) throw DataError("empty training data");
  config.validate();
  switch (config.algorithm) {
    case Algorithm::kMostPopular:
      return std::make_unique<detail::MostPopularModel>(train, config);
    case Algorithm::kUserKNN:
    case Algorithm::kItemKNN: {
      auto neighbors = detail::compute_neighbors(*train, config, threads);
      return std::make_unique<detail::KnnModel>(train, config,
                                                std::move(neighbors));
    }
    case Algorithm::kBMF:
    case Algorithm::kSVDpp:
      return detail::fit_factor_model(train, config);
  }
  throw UsageError("unknown algorithm");
}

RecommendationList recommend_top_n(const TrainedModel& model,
                                   std::size_t user_index, std::size_t n) {
  const RatingsDataset& train = model.train();
  const std::size_t n_items = train.num_items();
  std::vector<double> scores(n_items);
  std::vector<std::uint8_t> fallback(n_items, 0);
  model.score_items(user_index, scores, fallback);

  std::vector<std::uint8_t> rated(n_items, 0);
  for (const Entry& e : train.user_row(user_index)) rated[e.index] = 1;
  std::vector<std::uint32_t> candidates;
  candidates.reserve(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    if (rated[i]) continue;
    if (!std::isfinite(scores[i])) {
      throw NumericalError(fmt::format(
          "{} produced a non-finite score for user {}, item {}",
          to_string(model.algorithm()), train.user_id(user_index).value,
          train.item_id(i).value));
    }
    candidates.push_back(static_cast<std::uint32_t>(i));
  }
  // Regular scores first, then higher score, then lower item id (item
  // indices follow id order).
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (fallback[a] != fallback[b]) return fallback[a] < fallback[b];
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  const std::size_t keep = std::min(n, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + keep,
                    candidates.end(), better);
  RecommendationList list;
  list.short_list = candidates.size() < n;
  list.items.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    list.items.push_back({train.item_id(candidates[k]), scores[candidates[k]]});
  }
  return list;
}

RecommendationList recommend_top_n(const TrainedModel& model, UserId user,
                                   std::size_t n) {
  const auto u = model.train().user_index(user);
  if (!u) {
    throw UsageError(fmt::format("user {} is not in the training data",
                                 user.value));
  }
  return recommend_top_n(model, *u, n);
}

RecommendationSet recommend_all(const TrainedModel& model, std::size_t n,
                                unsigned threads) {
  const RatingsDataset& train = model.train();
  std::vector<RecommendationList> lists(train.num_users());
  parallel_for(
      train.num_users(),
      [&](std::size_t u) { lists[u] = recommend_top_n(model, u, n); },
      threads);
  RecommendationSet set;
  set.list_size = n;
  set.model_fingerprint = model.fingerprint();
  for (std::size_t u = 0; u < lists.size(); ++u) {
    set.lists.emplace_hint(set.lists.end(), train.user_id(u),
                           std::move(lists[u]));
  }
  return set;
}

void write_recommendations(std::ostream& out, const RecommendationSet& recs) {
  out << "user_id,rank,item_id,score\n";
  for (const auto& [user, list] : recs.lists) {
    for (std::size_t k = 0; k < list.items.size(); ++k) {
      out << fmt::format("{},{},{},{}\n", user.value, k + 1,
                         list.items[k].item.value, list.items[k].score);
    }
  }
}

RecommendationSet read_recommendations(std::istream& in, std::size_t list_size,
                                       const std::string& source) {
  RecommendationSet recs;
  recs.list_size = list_size;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    if (line_no == 1 || text::trim(line).empty()) continue;
    const auto f = text::split(line, ",");
    std::optional<std::int64_t> user, rank, item;
    std::optional<double> score;
    if (f.size() == 4) {
      user = text::parse_int(f[0]);
      rank = text::parse_int(f[1]);
      item = text::parse_int(f[2]);
      score = text::parse_double(f[3]);
    }
    if (!user || !rank || !item || !score) {
      throw DataError(fmt::format("{}:{}: malformed line '{}'", source,
                                  line_no, line));
    }
    auto& list = recs.lists[UserId{*user}];
    if (*rank != static_cast<std::int64_t>(list.items.size()) + 1 ||
        list.items.size() >= list_size) {
      throw DataError(fmt::format("{}:{}: rank {} out of sequence for user {}",
                                  source, line_no, *rank, *user));
    }
    list.items.push_back({ItemId{*item}, *score});
  }
  for (auto& [user, list] : recs.lists) {
    list.short_list = list.items.size() < list_size;
  }
  return recs;
}

PrecisionResult precision_at_n(const RecommendationSet& recs,
                               const RatingsDataset& test,
                               std::optional<double> relevance_threshold) {
  if (recs.list_size == 0) throw UsageError("list size must be >= 1");
  PrecisionResult result;
  double sum = 0.0;
  for (const auto& [user, list] : recs.lists) {
    const auto u = test.user_index(user);
    if (!u) {
      ++result.excluded_empty_test;
      continue;
    }
    std::unordered_set<ItemId> relevant;
    for (const Entry& e : test.user_row(*u)) {
      if (!relevance_threshold || e.value >= *relevance_threshold) {
        relevant.insert(test.item_id(e.index));
      }
    }
    std::size_t hits = 0;
    for (const auto& rec : list.items) hits += relevant.count(rec.item);
    const double p =
        static_cast<double>(hits) / static_cast<double>(recs.list_size);
    result.per_user.emplace(user, p);
    sum += p;
  }
  for (const UserId user : test.users()) {
    if (!recs.lists.contains(user)) ++result.test_users_without_list;
  }
  if (!result.per_user.empty()) {
    result.mean = sum / static_cast<double>(result.per_user.size());
  }
  return result;
}

}  // namespace popaudit
