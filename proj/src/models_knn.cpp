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
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "models.hpp"
#include "popaudit/error.hpp"
#include "popaudit/parallel.hpp"
#include "serialize.hpp"

namespace popaudit::detail {
namespace {

std::vector<double> rating_counts(const RatingsDataset& train) {
  std::vector<double> counts(train.num_items());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    counts[i] = static_cast<double>(train.item_column(i).size());
  }
  return counts;
}

// Sparse matrix with centred values, addressable by row.
struct Csr {
  std::vector<std::size_t> offsets;
  std::vector<Entry> entries;

  std::span<const Entry> row(std::size_t r) const {
    return {entries.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }
};

struct Scratch {
  std::vector<double> dot;
  std::vector<double> sq_self;
  std::vector<double> sq_other;
  std::vector<std::uint32_t> count;
  std::vector<std::uint32_t> touched;

  void ensure(std::size_t n) {
    if (dot.size() < n) {
      dot.resize(n, 0.0);
      sq_self.resize(n, 0.0);
      sq_other.resize(n, 0.0);
      count.resize(n, 0);
    }
  }
};

}  // namespace

MostPopularModel::MostPopularModel(std::shared_ptr<const RatingsDataset> train,
                                   AlgoConfig config)
    : TrainedModel(std::move(train), std::move(config)),
      counts_(rating_counts(*train_)) {}

double MostPopularModel::score(std::size_t /*user*/, std::size_t item) const {
  return counts_[item];
}

void MostPopularModel::score_items(std::size_t /*user*/,
                                   std::span<double> scores,
                                   std::span<std::uint8_t> /*fallback*/) const {
  std::copy(counts_.begin(), counts_.end(), scores.begin());
}

double MostPopularModel::cold_score(std::optional<std::size_t> /*user*/,
                                    std::optional<std::size_t> item) const {
  return item ? counts_[*item] : 0.0;
}

void MostPopularModel::save_parameters(std::ostream& out) const {
  out << "counts " << counts_.size() << '\n';
}

std::unique_ptr<TrainedModel> load_most_popular(
    std::shared_ptr<const RatingsDataset> train, AlgoConfig config,
    std::istream& in) {
  expect_token(in, "counts");
  if (read_unsigned(in) != train->num_items()) {
    throw DataError("model dump item count does not match training data");
  }
  return std::make_unique<MostPopularModel>(std::move(train),
                                            std::move(config));
}

std::vector<std::vector<Neighbor>> compute_neighbors(
    const RatingsDataset& train, const AlgoConfig& config, unsigned threads) {
  const bool item_based = config.algorithm == Algorithm::kItemKNN;
  const bool pearson = config.similarity == Similarity::kPearson;
  const std::size_t n_a = item_based ? train.num_items() : train.num_users();

  std::vector<double> user_mean(train.num_users());
  for (std::size_t u = 0; u < user_mean.size(); ++u) {
    double s = 0.0;
    for (const Entry& e : train.user_row(u)) s += e.value;
    user_mean[u] = s / static_cast<double>(train.user_row(u).size());
  }
  std::vector<double> item_mean(train.num_items());
  for (std::size_t i = 0; i < item_mean.size(); ++i) {
    double s = 0.0;
    for (const Entry& e : train.item_column(i)) s += e.value;
    item_mean[i] = s / static_cast<double>(train.item_column(i).size());
  }
  // Pearson centres each compared vector on its own mean; cosine optionally
  // centres every rating on its user's mean.
  auto centred = [&](std::size_t u, std::size_t i, double r) {
    if (pearson) return r - (item_based ? item_mean[i] : user_mean[u]);
    return config.mean_center ? r - user_mean[u] : r;
  };

  auto build = [&](bool rows_are_items) {
    Csr m;
    const std::size_t n = rows_are_items ? train.num_items() : train.num_users();
    m.offsets.assign(n + 1, 0);
    m.entries.reserve(train.size());
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = rows_are_items ? train.item_column(r) : train.user_row(r);
      for (const Entry& e : row) {
        const std::size_t u = rows_are_items ? e.index : r;
        const std::size_t i = rows_are_items ? r : e.index;
        m.entries.push_back({e.index, centred(u, i, e.value)});
      }
      m.offsets[r + 1] = m.entries.size();
    }
    return m;
  };
  const Csr a_rows = build(item_based);
  const Csr b_rows = build(!item_based);

  std::vector<double> norm(n_a, 0.0);
  for (std::size_t a = 0; a < n_a; ++a) {
    double s = 0.0;
    for (const Entry& e : a_rows.row(a)) s += e.value * e.value;
    norm[a] = std::sqrt(s);
  }

  const auto k = static_cast<std::size_t>(config.neighborhood_size);
  std::vector<std::vector<Neighbor>> neighbors(n_a);
  parallel_for(
      n_a,
      [&](std::size_t a) {
        thread_local Scratch scratch;
        scratch.ensure(n_a);
        scratch.touched.clear();
        for (const Entry& ab : a_rows.row(a)) {
          for (const Entry& other : b_rows.row(ab.index)) {
            const std::uint32_t a2 = other.index;
            if (scratch.count[a2]++ == 0) scratch.touched.push_back(a2);
            scratch.dot[a2] += ab.value * other.value;
            if (pearson) {
              scratch.sq_self[a2] += ab.value * ab.value;
              scratch.sq_other[a2] += other.value * other.value;
            }
          }
        }
        std::vector<Neighbor> found;
        for (const std::uint32_t a2 : scratch.touched) {
          if (a2 != a) {
            const double denom =
                pearson ? std::sqrt(scratch.sq_self[a2] * scratch.sq_other[a2])
                        : norm[a] * norm[a2];
            double sim = denom > 0.0 ? scratch.dot[a2] / denom : 0.0;
            if (config.shrinkage > 0.0) {
              const double n = scratch.count[a2];
              sim *= n / (n + config.shrinkage);
            }
            if (sim > 0.0 && std::isfinite(sim)) found.push_back({a2, sim});
          }
          scratch.dot[a2] = 0.0;
          scratch.sq_self[a2] = 0.0;
          scratch.sq_other[a2] = 0.0;
          scratch.count[a2] = 0;
        }
        auto closer = [](const Neighbor& x, const Neighbor& y) {
          if (x.similarity != y.similarity) return x.similarity > y.similarity;
          return x.index < y.index;
        };
        if (found.size() > k) {
          std::nth_element(found.begin(), found.begin() + k, found.end(),
                           closer);
          found.resize(k);
        }
        std::sort(found.begin(), found.end(), closer);
        neighbors[a] = std::move(found);
      },
      threads);
  return neighbors;
}

KnnModel::KnnModel(std::shared_ptr<const RatingsDataset> train,
                   AlgoConfig config,
                   std::vector<std::vector<Neighbor>> neighbors)
    : TrainedModel(std::move(train), std::move(config)),
      neighbors_(std::move(neighbors)) {
  const std::size_t users = train_->num_users();
  popularity_ = rating_counts(*train_);
  for (double& p : popularity_) p /= static_cast<double>(users);
  if (config_.algorithm == Algorithm::kItemKNN) {
    reverse_.resize(train_->num_items());
    for (std::size_t i = 0; i < neighbors_.size(); ++i) {
      for (const Neighbor& n : neighbors_[i]) {
        reverse_[n.index].push_back({static_cast<std::uint32_t>(i),
                                     n.similarity});
      }
    }
  }
}

double KnnModel::combine(double weighted_sum, double similarity_sum) const {
  return config_.scoring == KnnScoring::kWeightedAverage
             ? weighted_sum / similarity_sum
             : similarity_sum;
}

double KnnModel::score(std::size_t user, std::size_t item) const {
  double num = 0.0;
  double den = 0.0;
  if (config_.algorithm == Algorithm::kItemKNN) {
    // Same accumulation order as score_items: the user's items ascending.
    const auto& list = neighbors_[item];
    for (const Entry& e : train_->user_row(user)) {
      const auto it = std::find_if(list.begin(), list.end(),
                                   [&](const Neighbor& n) {
                                     return n.index == e.index;
                                   });
      if (it == list.end()) continue;
      num += it->similarity * e.value;
      den += it->similarity;
    }
  } else {
    for (const Neighbor& n : neighbors_[user]) {
      const auto row = train_->user_row(n.index);
      const auto it = std::lower_bound(
          row.begin(), row.end(), item,
          [](const Entry& e, std::size_t idx) { return e.index < idx; });
      if (it == row.end() || it->index != item) continue;
      num += n.similarity * it->value;
      den += n.similarity;
    }
  }
  return den > 0.0 ? combine(num, den) : popularity_[item];
}

void KnnModel::score_items(std::size_t user, std::span<double> scores,
                           std::span<std::uint8_t> fallback) const {
  std::vector<double> num(scores.size(), 0.0);
  std::vector<double> den(scores.size(), 0.0);
  if (config_.algorithm == Algorithm::kItemKNN) {
    for (const Entry& e : train_->user_row(user)) {
      for (const Neighbor& n : reverse_[e.index]) {
        num[n.index] += n.similarity * e.value;
        den[n.index] += n.similarity;
      }
    }
  } else {
    for (const Neighbor& n : neighbors_[user]) {
      for (const Entry& e : train_->user_row(n.index)) {
        num[e.index] += n.similarity * e.value;
        den[e.index] += n.similarity;
      }
    }
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (den[i] > 0.0) {
      scores[i] = combine(num[i], den[i]);
      fallback[i] = 0;
    } else {
      scores[i] = popularity_[i];
      fallback[i] = 1;
    }
  }
}

double KnnModel::cold_score(std::optional<std::size_t> /*user*/,
                            std::optional<std::size_t> item) const {
  return item ? popularity_[*item] : 0.0;
}

void KnnModel::save_parameters(std::ostream& out) const {
  out << "neighbors " << neighbors_.size() << '\n';
  for (const auto& list : neighbors_) {
    out << list.size();
    for (const Neighbor& n : list) out << ' ' << n.index << ' ' << hex(n.similarity);
    out << '\n';
  }
}

std::unique_ptr<TrainedModel> load_knn(
    std::shared_ptr<const RatingsDataset> train, AlgoConfig config,
    std::istream& in) {
  expect_token(in, "neighbors");
  const std::size_t n = read_unsigned(in);
  const std::size_t expected = config.algorithm == Algorithm::kItemKNN
                                   ? train->num_items()
                                   : train->num_users();
  if (n != expected) {
    throw DataError("model dump neighbour table does not match training data");
  }
  std::vector<std::vector<Neighbor>> neighbors(n);
  for (auto& list : neighbors) {
    list.resize(read_unsigned(in));
    for (Neighbor& nb : list) {
      nb.index = static_cast<std::uint32_t>(read_unsigned(in));
      if (nb.index >= n) throw DataError("model dump neighbour out of range");
      nb.similarity = read_double(in);
    }
  }
  return std::make_unique<KnnModel>(std::move(train), std::move(config),
                                    std::move(neighbors));
}

}  // namespace popaudit::detail
