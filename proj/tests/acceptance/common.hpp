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

// Shared pieces of the acceptance binaries: result lines and the invariant
// suite run on every dataset.

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "popaudit/experiment.hpp"

namespace acceptance {

namespace fs = std::filesystem;
using namespace popaudit;

enum class Outcome { kPass, kFail, kBlocked };

class Board {
 public:
  void record(const std::string& id, Outcome outcome, const std::string& what,
              const std::string& detail) {
    const char* tag = outcome == Outcome::kPass   ? "PASS"
                      : outcome == Outcome::kFail ? "FAIL"
                                                  : "BLOCKED";
    std::printf("[%s] criterion %s: %s -- %s\n", tag, id.c_str(), what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (outcome == Outcome::kFail) failed_ = true;
    if (outcome == Outcome::kBlocked) blocked_ = true;
  }
  void check(const std::string& id, bool ok, const std::string& what,
             const std::string& detail) {
    record(id, ok ? Outcome::kPass : Outcome::kFail, what, detail);
  }
  // 1 on any failure, 77 when something could not run, else 0.
  int exit_code() const { return failed_ ? 1 : blocked_ ? 77 : 0; }

 private:
  bool failed_ = false;
  bool blocked_ = false;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Train split and recommendation lists as written to an output directory,
// read back independently of the in-memory pipeline.
struct Persisted {
  RatingsDataset train;
  std::shared_ptr<const ItemCatalog> catalog;
  std::map<Algorithm, RecommendationSet> recs;
};

inline std::string file_stem(Algorithm a) { return std::string(to_string(a)); }

inline Persisted load_persisted(const ExperimentConfig& c) {
  const auto dataset = core_filter(parse_ratings(c.ratings_path, c.ratings_format),
                                   c.min_user_ratings, c.min_item_ratings);
  std::ifstream manifest(c.output_dir / "split" / "manifest.csv");
  Persisted p{apply_assignment(dataset, read_manifest(manifest, dataset.size()),
                               c.split_ratio, c.seed)
                  .train,
              std::make_shared<const ItemCatalog>(
                  parse_item_catalog(c.items_path, c.catalog_format)),
              {}};
  for (const auto& a : c.algorithms) {
    std::ifstream in(c.output_dir / "recs" / (file_stem(a.algorithm) + ".csv"));
    p.recs[a.algorithm] = read_recommendations(in, c.list_size, "recs");
  }
  return p;
}

struct Verdict {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

// No recommended item is in the user's training profile.
inline Verdict check_exclusion(const Persisted& p) {
  Verdict v;
  std::size_t lists = 0;
  for (const auto& [a, recs] : p.recs) {
    for (const auto& [user, list] : recs.lists) {
      ++lists;
      for (const auto& r : list.items) {
        if (p.train.rating(user, r.item)) {
          v.fail(fmt::format("{} recommends rated item {} to user {}", to_string(a),
                             r.item.value, user.value));
        }
      }
    }
  }
  if (v.ok) v.detail = fmt::format("{} lists checked", lists);
  return v;
}

// Profile and list distributions sum to one.
inline Verdict check_normalization(const Persisted& p) {
  Verdict v;
  double worst = 0.0;
  auto check = [&](const CategoricalDistribution& d, const std::string& what) {
    if (d.is_empty()) return;
    double total = 0.0;
    for (const double m : d.mass()) {
      if (m < 0.0) v.fail(what + " has negative mass");
      total += m;
    }
    worst = std::max(worst, std::abs(total - 1.0));
  };
  for (const auto user : p.train.users()) {
    check(profile_distribution(user, p.train, *p.catalog),
          fmt::format("profile of {}", user.value));
  }
  for (const auto& [a, recs] : p.recs) {
    for (const auto& [user, list] : recs.lists) {
      check(recommendation_distribution(user, recs, *p.catalog),
            fmt::format("{} list of {}", to_string(a), user.value));
    }
  }
  if (worst > 1e-12) v.fail(fmt::format("mass off by {:.3g}", worst));
  if (v.ok) v.detail = fmt::format("max |sum - 1| = {:.3g}", worst);
  return v;
}

// Every recommendation is counted exactly once in the exposure table.
inline Verdict check_conservation(const Persisted& p) {
  Verdict v;
  std::size_t total = 0;
  for (const auto& [a, recs] : p.recs) {
    std::size_t slots = 0;
    for (const auto& [user, list] : recs.lists) slots += list.items.size();
    std::size_t counted = 0;
    for (const auto& row : rated_vs_recommended(p.train, recs)) counted += row.times_recommended;
    if (counted != slots) {
      v.fail(fmt::format("{}: {} slots but {} counted", to_string(a), slots, counted));
    }
    total += slots;
  }
  if (v.ok) v.detail = fmt::format("{} recommendation slots conserved", total);
  return v;
}

// Byte comparison of every artifact two output directories share.
inline Verdict compare_outputs(const fs::path& a, const fs::path& b) {
  Verdict v;
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    if (rel == "STATUS") continue;
    ++files;
    if (!fs::exists(b / rel)) {
      v.fail(fmt::format("{} missing from rerun", rel.string()));
    } else if (slurp(entry.path()) != slurp(b / rel)) {
      v.fail(fmt::format("{} differs between runs", rel.string()));
    }
  }
  if (files == 0) v.fail("no outputs to compare");
  if (v.ok) v.detail = fmt::format("{} files byte-identical", files);
  return v;
}

}  // namespace acceptance
