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

#include "popaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "popaudit/error.hpp"

namespace popaudit {
namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
};

Moments moments(std::span<const double> v) {
  Moments m;
  for (const double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (const double x : v) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= static_cast<double>(v.size() - 1);
  return m;
}

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw NumericalError(fmt::format(
      "incomplete beta continued fraction did not converge (a={}, b={}, x={})",
      a, b, x));
}

void check_pair(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw UsageError(fmt::format("correlation of samples with {} and {} values",
                                 xs.size(), ys.size()));
  }
  if (xs.size() < 2) throw UsageError("correlation needs at least 2 points");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw UsageError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) -
                           std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a + 1) / (a + b + 2); use the
  // symmetry I_x(a, b) = 1 - I_{1-x}(b, a) elsewhere.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw UsageError("t distribution needs dof > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

TestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw UsageError(fmt::format(
        "t-test needs at least 2 values per sample (got {} and {})", a.size(),
        b.size()));
  }
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  TestResult r;
  r.n_a = a.size();
  r.n_b = b.size();
  r.mean_a = ma.mean;
  r.mean_b = mb.mean;
  const double sa = ma.variance / static_cast<double>(a.size());
  const double sb = mb.variance / static_cast<double>(b.size());
  const double se2 = sa + sb;
  if (se2 == 0.0) {
    r.degenerate = true;
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    if (ma.mean == mb.mean) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = ma.mean > mb.mean ? std::numeric_limits<double>::infinity()
                                      : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
  } else {
    r.statistic = (ma.mean - mb.mean) / std::sqrt(se2);
    r.dof = se2 * se2 /
            (sa * sa / static_cast<double>(a.size() - 1) +
             sb * sb / static_cast<double>(b.size() - 1));
    // Two-sided p = I_{dof/(dof+t^2)}(dof/2, 1/2).
    r.p_value = incomplete_beta(0.5 * r.dof, 0.5,
                                r.dof / (r.dof + r.statistic * r.statistic));
    r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  }
  for (const double alpha : {0.05, 0.01}) {
    if (r.p_value < alpha) r.significant_at.push_back(alpha);
  }
  return r;
}

double pearson_correlation(std::span<const double> xs,
                           std::span<const double> ys) {
  check_pair(xs, ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double dx = xs[k] - mx;
    const double dy = ys[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw NumericalError("correlation undefined for a zero-variance sample");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  std::size_t k = 0;
  while (k < order.size()) {
    std::size_t end = k + 1;
    while (end < order.size() && values[order[end]] == values[order[k]]) ++end;
    // Positions k..end-1 hold 1-based ranks k+1..end.
    const double rank = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t j = k; j < end; ++j) ranks[order[j]] = rank;
    k = end;
  }
  return ranks;
}

double spearman_correlation(std::span<const double> xs,
                            std::span<const double> ys) {
  check_pair(xs, ys);
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson_correlation(rx, ry);
}

}  // namespace popaudit
