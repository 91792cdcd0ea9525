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
#include <span>
#include <vector>

namespace popaudit {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double dof = 1.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  // Thresholds from {0.05, 0.01} with p below them.
  std::vector<double> significant_at;
  // Both samples had zero variance; p is 1 for equal means, 0 otherwise.
  bool degenerate = false;
};

// Welch's two-sided two-sample t-test with Welch-Satterthwaite degrees of
// freedom. Throws UsageError when either sample has fewer than 2 values.
TestResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

// Throws NumericalError on zero variance and UsageError on length mismatch
// or fewer than 2 points.
double pearson_correlation(std::span<const double> xs,
                           std::span<const double> ys);
// Pearson correlation of average ranks.
double spearman_correlation(std::span<const double> xs,
                            std::span<const double> ys);

// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace popaudit
