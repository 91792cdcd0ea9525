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

// Reference implementation of the audit formulas, written against raw
// tuples and genre labels with no code shared with the library. Slow on
// purpose: every quantity is recomputed from scratch by direct summation.

#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

struct Triple {
  long user;
  long item;
  double value;
};

using Genres = std::map<long, std::vector<std::string>>;
using Lists = std::map<long, std::vector<long>>;
using Dist = std::map<std::string, double>;

// Ratio of distinct training users who rated the item.
inline double theta(const std::vector<Triple>& train, long item) {
  std::set<long> users;
  std::set<long> raters;
  for (const auto& t : train) {
    users.insert(t.user);
    if (t.item == item) raters.insert(t.user);
  }
  return static_cast<double>(raters.size()) / static_cast<double>(users.size());
}

inline std::vector<long> profile(const std::vector<Triple>& train, long user) {
  std::vector<long> items;
  for (const auto& t : train) {
    if (t.user == user) items.push_back(t.item);
  }
  return items;
}

// p(c|i): each of the item's genres gets an equal share.
inline Dist item_dist(const Genres& genres, long item) {
  Dist d;
  const auto& g = genres.at(item);
  for (const auto& c : g) d[c] += 1.0 / static_cast<double>(g.size());
  return d;
}

// Unweighted mean of p(c|i) over the items that have genres.
inline Dist mean_dist(const Genres& genres, const std::vector<long>& items) {
  Dist d;
  double n = 0;
  for (long i : items) {
    if (!genres.count(i)) continue;
    n += 1;
    for (const auto& [c, m] : item_dist(genres, i)) d[c] += m;
  }
  for (auto& [c, m] : d) m /= n;
  return d;
}

inline double hellinger(const Dist& p, const Dist& q) {
  std::set<std::string> keys;
  for (const auto& [c, m] : p) keys.insert(c);
  for (const auto& [c, m] : q) keys.insert(c);
  double s = 0;
  for (const auto& c : keys) {
    const double a = p.count(c) ? std::sqrt(p.at(c)) : 0.0;
    const double b = q.count(c) ? std::sqrt(q.at(c)) : 0.0;
    s += (a - b) * (a - b);
  }
  return std::sqrt(s) / std::sqrt(2.0);
}

inline double miscalibration(const std::vector<Triple>& train, const Genres& genres,
                             const Lists& lists, long user) {
  return hellinger(mean_dist(genres, profile(train, user)),
                   mean_dist(genres, lists.at(user)));
}

inline double group_miscalibration(const std::vector<Triple>& train,
                                   const Genres& genres, const Lists& lists,
                                   const std::vector<long>& group) {
  double s = 0;
  for (long u : group) s += miscalibration(train, genres, lists, u);
  return s / static_cast<double>(group.size());
}

inline double mean_theta(const std::vector<Triple>& train,
                         const std::vector<long>& items) {
  double s = 0;
  for (long i : items) s += theta(train, i);
  return s / static_cast<double>(items.size());
}

inline double gap_profile(const std::vector<Triple>& train,
                          const std::vector<long>& group) {
  double s = 0;
  for (long u : group) s += mean_theta(train, profile(train, u));
  return s / static_cast<double>(group.size());
}

inline double gap_recs(const std::vector<Triple>& train, const Lists& lists,
                       const std::vector<long>& group) {
  double s = 0;
  for (long u : group) s += mean_theta(train, lists.at(u));
  return s / static_cast<double>(group.size());
}

inline double popularity_lift(const std::vector<Triple>& train, const Lists& lists,
                              const std::vector<long>& group) {
  const double p = gap_profile(train, group);
  return (gap_recs(train, lists, group) - p) / p;
}

// Two-sample Welch statistic and Satterthwaite degrees of freedom.
inline std::pair<double, double> welch(const std::vector<double>& a,
                                       const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& x) {
    double m = 0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::pair{m, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double sa = va / static_cast<double>(a.size());
  const double sb = vb / static_cast<double>(b.size());
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double dof =
      (sa + sb) * (sa + sb) /
      (sa * sa / static_cast<double>(a.size() - 1) +
       sb * sb / static_cast<double>(b.size() - 1));
  return {t, dof};
}

}  // namespace oracle
