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

#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "models.hpp"
#include "popaudit/error.hpp"
#include "popaudit/random.hpp"
#include "serialize.hpp"

namespace popaudit::detail {
namespace {

struct Cell {
  std::uint32_t user;
  std::uint32_t item;
  double value;
};

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t f = 0; f < n; ++f) s += a[f] * b[f];
  return s;
}

double sum_squares(const std::vector<double>& v) {
  return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

class FactorTrainer {
 public:
  FactorTrainer(const RatingsDataset& train, const AlgoConfig& config)
      : train_(train),
        config_(config),
        svdpp_(config.algorithm == Algorithm::kSVDpp),
        f_(static_cast<std::size_t>(config.factors)),
        rng_(config.seed) {
    p_.global_mean = train.mean_rating();
    p_.user_bias.assign(train.num_users(), 0.0);
    p_.item_bias.assign(train.num_items(), 0.0);
    p_.user_factors.resize(train.num_users() * f_);
    p_.item_factors.resize(train.num_items() * f_);
    for (double& v : p_.user_factors) v = rng_.normal(0.0, config.init_std);
    for (double& v : p_.item_factors) v = rng_.normal(0.0, config.init_std);
    if (svdpp_) {
      p_.implicit_factors.resize(train.num_items() * f_);
      for (double& v : p_.implicit_factors) {
        v = rng_.normal(0.0, config.init_std);
      }
    }
    for (std::size_t u = 0; u < train.num_users(); ++u) {
      for (const Entry& e : train.user_row(u)) {
        cells_.push_back({static_cast<std::uint32_t>(u), e.index, e.value});
      }
    }
    user_begin_.assign(train.num_users() + 1, 0);
    for (std::size_t u = 0; u < train.num_users(); ++u) {
      user_begin_[u + 1] = user_begin_[u] + train.user_row(u).size();
    }
    // One permutation for the whole run: every epoch replays the same
    // sequence of updates. BMF walks all cells in one shuffled order;
    // SVD++ shuffles users, then the cells within each user.
    cell_order_.resize(cells_.size());
    std::iota(cell_order_.begin(), cell_order_.end(), std::size_t{0});
    if (svdpp_) {
      user_order_.resize(train.num_users());
      std::iota(user_order_.begin(), user_order_.end(), std::size_t{0});
      rng_.shuffle(std::span<std::size_t>(user_order_));
      for (std::size_t u = 0; u < train.num_users(); ++u) {
        rng_.shuffle(std::span<std::size_t>(cell_order_.data() + user_begin_[u],
                                            user_begin_[u + 1] - user_begin_[u]));
      }
    } else {
      rng_.shuffle(std::span<std::size_t>(cell_order_));
    }
  }

  void run() {
    for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
      if (svdpp_) {
        epoch_svdpp();
      } else {
        epoch_bmf();
      }
      const auto [objective, rmse] = evaluate();
      if (!std::isfinite(objective)) {
        throw NumericalError(fmt::format(
            "{} diverged at epoch {} (learning rate {}): non-finite loss",
            to_string(config_.algorithm), epoch, config_.learning_rate));
      }
      objective_.push_back(objective);
      rmse_.push_back(rmse);
    }
  }

  FactorModel::Parameters& parameters() { return p_; }
  std::vector<double>& objective() { return objective_; }
  std::vector<double>& rmse() { return rmse_; }

 private:
  double* pu(std::size_t u) { return p_.user_factors.data() + u * f_; }
  double* qi(std::size_t i) { return p_.item_factors.data() + i * f_; }
  double* yj(std::size_t j) { return p_.implicit_factors.data() + j * f_; }

  void epoch_bmf() {
    const double lr = config_.learning_rate;
    const double reg = config_.regularization;
    for (const std::size_t k : cell_order_) {
      const Cell& c = cells_[k];
      double* p = pu(c.user);
      double* q = qi(c.item);
      const double pred = p_.global_mean + p_.user_bias[c.user] +
                          p_.item_bias[c.item] + dot(p, q, f_);
      const double err = c.value - pred;
      p_.user_bias[c.user] += lr * (err - reg * p_.user_bias[c.user]);
      p_.item_bias[c.item] += lr * (err - reg * p_.item_bias[c.item]);
      for (std::size_t f = 0; f < f_; ++f) {
        const double pf = p[f];
        p[f] += lr * (err * q[f] - reg * pf);
        q[f] += lr * (err * pf - reg * q[f]);
      }
    }
  }

  // Users are visited in a fixed random order and each user's ratings in a
  // fixed random order. The implicit factors y_j of a user's items receive their
  // accumulated gradient once per user visit instead of once per rating,
  // which keeps an epoch linear in the number of ratings.
  void epoch_svdpp() {
    const double lr = config_.learning_rate;
    const double reg = config_.regularization;
    std::vector<double> implicit(f_);
    std::vector<double> z(f_);
    std::vector<double> grad_y(f_);
    for (const std::size_t u : user_order_) {
      const auto row = train_.user_row(u);
      const double norm = 1.0 / std::sqrt(static_cast<double>(row.size()));
      std::fill(implicit.begin(), implicit.end(), 0.0);
      for (const Entry& e : row) {
        const double* y = yj(e.index);
        for (std::size_t f = 0; f < f_; ++f) implicit[f] += y[f];
      }
      for (std::size_t f = 0; f < f_; ++f) implicit[f] *= norm;
      std::fill(grad_y.begin(), grad_y.end(), 0.0);
      double* p = pu(u);
      for (std::size_t pos = user_begin_[u]; pos < user_begin_[u + 1]; ++pos) {
        const std::size_t k = cell_order_[pos];
        const Cell& c = cells_[k];
        double* q = qi(c.item);
        for (std::size_t f = 0; f < f_; ++f) z[f] = p[f] + implicit[f];
        const double pred = p_.global_mean + p_.user_bias[u] +
                            p_.item_bias[c.item] + dot(z.data(), q, f_);
        const double err = c.value - pred;
        p_.user_bias[u] += lr * (err - reg * p_.user_bias[u]);
        p_.item_bias[c.item] += lr * (err - reg * p_.item_bias[c.item]);
        for (std::size_t f = 0; f < f_; ++f) {
          const double qf = q[f];
          q[f] += lr * (err * z[f] - reg * qf);
          p[f] += lr * (err * qf - reg * p[f]);
          grad_y[f] += err * norm * qf;
        }
      }
      for (const Entry& e : row) {
        double* y = yj(e.index);
        for (std::size_t f = 0; f < f_; ++f) {
          y[f] += lr * (grad_y[f] - reg * y[f]);
        }
      }
    }
  }

  std::pair<double, double> evaluate() const {
    FactorModel::Parameters const& p = p_;
    double sse = 0.0;
    std::vector<double> z(f_);
    for (std::size_t u = 0; u < train_.num_users(); ++u) {
      const auto row = train_.user_row(u);
      const double* pu_ = p.user_factors.data() + u * f_;
      std::copy(pu_, pu_ + f_, z.begin());
      if (svdpp_) {
        const double norm = 1.0 / std::sqrt(static_cast<double>(row.size()));
        for (const Entry& e : row) {
          const double* y = p.implicit_factors.data() + e.index * f_;
          for (std::size_t f = 0; f < f_; ++f) z[f] += norm * y[f];
        }
      }
      for (const Entry& e : row) {
        const double pred =
            p.global_mean + p.user_bias[u] + p.item_bias[e.index] +
            dot(z.data(), p.item_factors.data() + e.index * f_, f_);
        sse += (e.value - pred) * (e.value - pred);
      }
    }
    const double penalty =
        sum_squares(p.user_bias) + sum_squares(p.item_bias) +
        sum_squares(p.user_factors) + sum_squares(p.item_factors) +
        sum_squares(p.implicit_factors);
    return {sse + config_.regularization * penalty,
            std::sqrt(sse / static_cast<double>(cells_.size()))};
  }

  const RatingsDataset& train_;
  const AlgoConfig& config_;
  const bool svdpp_;
  const std::size_t f_;
  Rng rng_;
  FactorModel::Parameters p_;
  std::vector<Cell> cells_;
  std::vector<std::size_t> cell_order_;
  std::vector<std::size_t> user_order_;
  std::vector<std::size_t> user_begin_;
  std::vector<double> objective_;
  std::vector<double> rmse_;
};

}  // namespace

FactorModel::FactorModel(std::shared_ptr<const RatingsDataset> train,
                         AlgoConfig config, Parameters params,
                         std::vector<double> objective,
                         std::vector<double> rmse)
    : TrainedModel(std::move(train), std::move(config)),
      params_(std::move(params)) {
  objective_ = std::move(objective);
  rmse_ = std::move(rmse);
}

std::vector<double> FactorModel::user_vector(std::size_t user) const {
  const auto f = static_cast<std::size_t>(config_.factors);
  std::vector<double> z(params_.user_factors.begin() + user * f,
                        params_.user_factors.begin() + (user + 1) * f);
  if (config_.algorithm == Algorithm::kSVDpp) {
    const auto row = train_->user_row(user);
    const double norm = 1.0 / std::sqrt(static_cast<double>(row.size()));
    for (const Entry& e : row) {
      const double* y = params_.implicit_factors.data() + e.index * f;
      for (std::size_t k = 0; k < f; ++k) z[k] += norm * y[k];
    }
  }
  return z;
}

double FactorModel::score(std::size_t user, std::size_t item) const {
  const auto f = static_cast<std::size_t>(config_.factors);
  const auto z = user_vector(user);
  return params_.global_mean + params_.user_bias[user] +
         params_.item_bias[item] +
         dot(z.data(), params_.item_factors.data() + item * f, f);
}

void FactorModel::score_items(std::size_t user, std::span<double> scores,
                              std::span<std::uint8_t> /*fallback*/) const {
  const auto f = static_cast<std::size_t>(config_.factors);
  const auto z = user_vector(user);
  const double base = params_.global_mean + params_.user_bias[user];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = base + params_.item_bias[i] +
                dot(z.data(), params_.item_factors.data() + i * f, f);
  }
}

double FactorModel::cold_score(std::optional<std::size_t> user,
                               std::optional<std::size_t> item) const {
  double s = params_.global_mean;
  if (user) s += params_.user_bias[*user];
  if (item) s += params_.item_bias[*item];
  return s;
}

void FactorModel::save_parameters(std::ostream& out) const {
  auto emit = [&out](std::string_view name, const std::vector<double>& v) {
    out << name << ' ' << v.size();
    for (double x : v) out << ' ' << hex(x);
    out << '\n';
  };
  out << "global_mean " << hex(params_.global_mean) << '\n';
  emit("user_bias", params_.user_bias);
  emit("item_bias", params_.item_bias);
  emit("user_factors", params_.user_factors);
  emit("item_factors", params_.item_factors);
  emit("implicit_factors", params_.implicit_factors);
}

std::unique_ptr<TrainedModel> load_factor_model(
    std::shared_ptr<const RatingsDataset> train, AlgoConfig config,
    std::istream& in) {
  FactorModel::Parameters p;
  expect_token(in, "global_mean");
  p.global_mean = read_double(in);
  auto read_vector = [&in](std::string_view name, std::size_t expected) {
    expect_token(in, name);
    const std::size_t n = read_unsigned(in);
    if (n != expected) {
      throw DataError(fmt::format(
          "model dump {} has {} values, expected {}", name, n, expected));
    }
    std::vector<double> v(n);
    for (double& x : v) x = read_double(in);
    return v;
  };
  const auto f = static_cast<std::size_t>(config.factors);
  const bool svdpp = config.algorithm == Algorithm::kSVDpp;
  p.user_bias = read_vector("user_bias", train->num_users());
  p.item_bias = read_vector("item_bias", train->num_items());
  p.user_factors = read_vector("user_factors", train->num_users() * f);
  p.item_factors = read_vector("item_factors", train->num_items() * f);
  p.implicit_factors =
      read_vector("implicit_factors", svdpp ? train->num_items() * f : 0);
  return std::make_unique<FactorModel>(std::move(train), std::move(config),
                                       std::move(p), std::vector<double>{},
                                       std::vector<double>{});
}

std::unique_ptr<TrainedModel> fit_factor_model(
    std::shared_ptr<const RatingsDataset> train, const AlgoConfig& config) {
  FactorTrainer trainer(*train, config);
  trainer.run();
  return std::make_unique<FactorModel>(
      std::move(train), config, std::move(trainer.parameters()),
      std::move(trainer.objective()), std::move(trainer.rmse()));
}

}  // namespace popaudit::detail
