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

#include "popaudit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <type_traits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "popaudit/error.hpp"

namespace popaudit {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void unknown_figure(std::string_view which);

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string num(double v) { return fmt::format("{}", v); }
std::string num(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}
std::string fixed(const std::optional<double>& v, int digits = 4) {
  return v ? fmt::format("{:.{}f}", *v, digits) : std::string("n/a");
}

json opt(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

json test_json(const std::optional<TestResult>& t) {
  if (!t) return nullptr;
  json j;
  j["n_a"] = t->n_a;
  j["n_b"] = t->n_b;
  j["mean_a"] = t->mean_a;
  j["mean_b"] = t->mean_b;
  j["statistic"] = opt(t->statistic);
  j["dof"] = t->dof;
  j["p_value"] = t->p_value;
  j["degenerate"] = t->degenerate;
  return j;
}

json cohort_json(const std::vector<CohortRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json j;
    j["label"] = r.label;
    j["size"] = r.size;
    j["gap_p"] = opt(r.gap_p);
    j["gap_q"] = opt(r.gap_q);
    j["popularity_lift"] = opt(r.lift);
    j["miscalibration"] = opt(r.miscalibration);
    out.push_back(std::move(j));
  }
  return out;
}

std::string test_text(std::string_view name, const std::optional<TestResult>& t) {
  if (!t) return fmt::format("  {}: not computed\n", name);
  return fmt::format("  {}: mean {:.4f} vs {:.4f} (n = {}, {}), t = {:.3f}, "
                     "df = {:.1f}, p = {:.3g}\n",
                     name, t->mean_a, t->mean_b, t->n_a, t->n_b, t->statistic,
                     t->dof, t->p_value);
}

std::string algorithm_file(Algorithm a, std::string_view suffix) {
  std::string name(to_string(a));
  std::replace(name.begin(), name.end(), '+', 'p');
  return name + std::string(suffix);
}

std::string split_params(const ExperimentConfig& c, const RatingsDataset& d) {
  return fmt::format("ratio = {}\nseed = {}\nper_user = {}\nfingerprint = {:016x}\n",
                     c.split_ratio, c.seed, c.per_user_split, d.fingerprint());
}

std::optional<TestResult> compare(const std::vector<double>& a,
                                  const std::vector<double>& b,
                                  const std::string& what,
                                  std::vector<std::string>& warnings) {
  if (a.size() < 2 || b.size() < 2) {
    warnings.push_back(fmt::format("{} skipped: samples of size {} and {}", what,
                                   a.size(), b.size()));
    return std::nullopt;
  }
  return welch_t_test(a, b);
}

struct CohortSamples {
  CohortRow row;
  std::vector<double> lifts;
  std::vector<double> miscalibration;
};

CohortSamples cohort_samples(const Cohort& cohort,
                             const std::map<UserId, const UserMetricRow*>& rows,
                             const RatingsDataset& train,
                             const RecommendationSet& recs,
                             const ItemPopularity& popularity,
                             const std::map<UserId, double>& mc) {
  CohortSamples s;
  s.row.label = cohort.label;
  std::vector<UserId> members;
  for (const auto& u : cohort.members) {
    const auto it = rows.find(u);
    if (it == rows.end()) continue;
    members.push_back(u);
    if (const auto lift = user_popularity_lift(*it->second)) {
      s.lifts.push_back(*lift);
    }
    s.miscalibration.push_back(it->second->miscalibration);
  }
  s.row.size = members.size();
  if (!members.empty()) {
    s.row.gap_p = gap_profile(members, train, popularity);
    s.row.gap_q = gap_recs(members, recs, popularity);
    s.row.lift = popularity_lift(*s.row.gap_p, *s.row.gap_q);
    s.row.miscalibration = group_miscalibration(members, mc);
  }
  return s;
}

[[noreturn]] void unknown_figure(std::string_view which) {
  std::string valid;
  for (const auto& id : figure_ids()) valid += (valid.empty() ? "" : ", ") + id;
  throw UsageError(fmt::format("unknown figure '{}' (valid: {})", which, valid));
}

}  // namespace

Logger stderr_logger() {
  return [](std::string_view message) {
    fmt::print(stderr, "[popaudit] {}\n", message);
  };
}

Logger null_logger() {
  return [](std::string_view) {};
}

void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError(fmt::format("failed writing {}", path.string()));
  }
  fs::rename(tmp, path);
}

const AlgorithmReport& AuditReport::algorithm(Algorithm a) const {
  for (const auto& r : algorithms) {
    if (r.config.algorithm == a) return r;
  }
  throw UsageError(fmt::format("no results for {}", to_string(a)));
}

std::string AuditReport::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["config"] = config_echo;
  json seeds;
  seeds["split"] = split_seed;
  for (const auto& a : algorithms) {
    seeds[std::string(to_string(a.config.algorithm))] = a.config.seed;
  }
  j["seeds"] = seeds;

  json d;
  d["raw_ratings"] = data.raw_ratings;
  d["raw_users"] = data.raw_users;
  d["raw_items"] = data.raw_items;
  d["ratings"] = data.ratings;
  d["users"] = data.users;
  d["items"] = data.items;
  d["train_ratings"] = data.train_ratings;
  d["test_ratings"] = data.test_ratings;
  d["train_users"] = data.train_users;
  d["test_users"] = data.test_users;
  d["test_users_not_in_train"] = data.test_users_not_in_train;
  d["items_not_in_catalog"] = data.items_not_in_catalog;
  d["users_without_catalogued_items"] = data.users_without_catalogued_items;
  d["men"] = data.men;
  d["women"] = data.women;
  d["unknown_gender"] = data.unknown_gender;
  j["data"] = d;

  json algos = json::array();
  for (const auto& a : algorithms) {
    json r;
    r["algorithm"] = std::string(to_string(a.config.algorithm));
    json params;
    for (const auto& [k, v] : a.config.to_pairs()) params[k] = v;
    r["parameters"] = params;
    json p;
    p["mean"] = a.precision;
    p["users"] = a.precision_users;
    p["excluded_no_test_ratings"] = a.precision_excluded_no_test;
    p["test_users_without_list"] = a.test_users_without_list;
    r["precision"] = p;
    json ex;
    ex["users_evaluated"] = a.users_evaluated;
    ex["empty_profile_distribution"] = a.excluded_empty_profile;
    ex["empty_recommendation_list"] = a.excluded_empty_list;
    ex["short_lists"] = a.short_lists;
    ex["lift_undefined"] = a.lift_undefined;
    r["exclusions"] = ex;
    json total;
    total["gap_p"] = a.gap_p;
    total["gap_q"] = a.gap_q;
    total["popularity_lift"] = opt(a.lift);
    total["miscalibration"] = a.miscalibration;
    total["kl_miscalibration"] = a.kl_miscalibration;
    r["total"] = total;
    r["popularity_groups"] = cohort_json(a.popularity_groups);
    r["gender_groups"] = cohort_json(a.gender_groups);
    json tests;
    tests["extreme_popularity_lift"] = test_json(a.extreme_lift_test);
    tests["extreme_miscalibration"] = test_json(a.extreme_miscalibration_test);
    tests["gender_popularity_lift"] = test_json(a.gender_lift_test);
    tests["gender_miscalibration"] = test_json(a.gender_miscalibration_test);
    r["tests"] = tests;
    r["group_trend_spearman"] = opt(a.group_trend_spearman);
    algos.push_back(std::move(r));
  }
  j["algorithms"] = algos;
  j["lift_miscalibration_pearson"] = opt(lift_miscalibration_pearson);
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

std::string AuditReport::to_text() const {
  std::string out;
  auto add = [&out](std::string s) { out += s; };
  add("popaudit audit report\n\n");
  add(fmt::format("split seed {}\n", split_seed));
  add(fmt::format("ratings {} -> {} after filtering ({} users, {} items)\n",
                  data.raw_ratings, data.ratings, data.users, data.items));
  add(fmt::format("train {} ratings / {} users, test {} ratings / {} users\n",
                  data.train_ratings, data.train_users, data.test_ratings,
                  data.test_users));
  add(fmt::format("test users absent from train: {}\n",
                  data.test_users_not_in_train));
  add(fmt::format("items missing from catalog: {}\n", data.items_not_in_catalog));
  add(fmt::format("users without catalogued training items: {}\n",
                  data.users_without_catalogued_items));
  add(fmt::format("gender: {} men, {} women, {} unknown\n", data.men,
                  data.women, data.unknown_gender));

  for (const auto& a : algorithms) {
    add(fmt::format("\n== {} ==\n", to_string(a.config.algorithm)));
    for (const auto& [k, v] : a.config.to_pairs()) {
      if (k != "algorithm") add(fmt::format("  {} = {}\n", k, v));
    }
    add(fmt::format("  precision@{} = {:.4f} over {} users ({} without test "
                    "ratings excluded)\n",
                    a.config.list_size, a.precision, a.precision_users,
                    a.precision_excluded_no_test));
    add(fmt::format("  evaluated {} users; excluded {} empty profiles, {} "
                    "empty lists; {} short lists\n",
                    a.users_evaluated, a.excluded_empty_profile,
                    a.excluded_empty_list, a.short_lists));
    add(fmt::format("  total GAP_p {:.4f}  GAP_q {:.4f}  PL {}  MC {:.4f}  KL "
                    "{:.4f}\n",
                    a.gap_p, a.gap_q, fixed(a.lift), a.miscalibration,
                    a.kl_miscalibration));
    add(fmt::format("  {:<8} {:>6} {:>8} {:>8} {:>9} {:>8}\n", "group", "size",
                    "GAP_p", "GAP_q", "PL", "MC"));
    for (const auto* rows : {&a.popularity_groups, &a.gender_groups}) {
      for (const auto& r : *rows) {
        add(fmt::format("  {:<8} {:>6} {:>8} {:>8} {:>9} {:>8}\n", r.label,
                        r.size, fixed(r.gap_p), fixed(r.gap_q), fixed(r.lift),
                        fixed(r.miscalibration)));
      }
    }
    add(test_text("lowest vs highest group PL", a.extreme_lift_test));
    add(test_text("lowest vs highest group MC", a.extreme_miscalibration_test));
    add(test_text("women vs men PL", a.gender_lift_test));
    add(test_text("women vs men MC", a.gender_miscalibration_test));
    add(fmt::format("  Spearman(group popularity, PL) = {}\n",
                    fixed(a.group_trend_spearman)));
  }
  add(fmt::format("\nPearson(total PL, total MC) over algorithms = {}\n",
                  fixed(lift_miscalibration_pearson)));
  if (!warnings.empty()) {
    add("\nwarnings:\n");
    for (const auto& w : warnings) add(fmt::format("  {}\n", w));
  }
  return out;
}

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"fig2", "fig3", "fig4", "fig5",
                                               "fig6", "fig7", "fig8", "fig9"};
  return ids;
}

FigureTable export_figure_data(const ExperimentResult& result,
                               std::string_view which) {
  std::string csv;
  auto line = [&csv](std::string s) {
    csv += s;
    csv += '\n';
  };
  const auto& report = result.report;
  if (which == "fig2") {
    line("rank,item_id,times_rated,popularity,cumulative_rating_share");
    for (std::size_t r = 0; r < result.long_tail.size(); ++r) {
      const auto& row = result.long_tail[r];
      line(fmt::format("{},{},{},{},{}", r + 1, row.item.value, row.times_rated,
                       num(row.popularity), num(row.cumulative_share)));
    }
    return {"fig2_long_tail.csv", csv};
  }
  if (which == "fig3") {
    line("rank,user_id,profile_avg_popularity");
    for (std::size_t r = 0; r < result.user_propensity.size(); ++r) {
      const auto& [user, value] = result.user_propensity[r];
      line(fmt::format("{},{},{}", r + 1, user.value, num(value)));
    }
    return {"fig3_user_propensity.csv", csv};
  }
  if (which == "fig4" || which == "fig5") {
    line("algorithm,item_id,times_rated,times_recommended,mean_rating");
    for (const auto& [algorithm, rows] : result.exposure) {
      for (const auto& row : rows) {
        line(fmt::format("{},{},{},{},{}", to_string(algorithm), row.item.value,
                         row.times_rated, row.times_recommended,
                         num(row.mean_rating)));
      }
    }
    return {std::string(which) + "_rated_vs_recommended.csv", csv};
  }
  if (which == "fig6") {
    line("group,mean_profile_popularity,users,percent");
    std::size_t total = 0;
    for (const auto& c : result.popularity_groups.cohorts) total += c.members.size();
    for (const auto& c : result.popularity_groups.cohorts) {
      const double percent =
          total == 0 ? 0.0
                     : 100.0 * static_cast<double>(c.members.size()) /
                           static_cast<double>(total);
      line(fmt::format("{},{},{},{}", c.label, num(c.mean_profile_popularity),
                       c.members.size(), num(percent)));
    }
    return {"fig6_group_histogram.csv", csv};
  }
  if (which == "fig7") {
    line("algorithm,gap_p,gap_q,popularity_lift");
    for (const auto& a : report.algorithms) {
      line(fmt::format("{},{},{},{}", to_string(a.config.algorithm), num(a.gap_p),
                       num(a.gap_q), num(a.lift)));
    }
    return {"fig7_total_lift.csv", csv};
  }
  if (which == "fig8") {
    line("algorithm,group,mean_profile_popularity,popularity_lift,users");
    for (const auto& a : report.algorithms) {
      for (const auto& r : a.popularity_groups) {
        line(fmt::format("{},{},{},{},{}", to_string(a.config.algorithm), r.label,
                         num(r.gap_p), num(r.lift), r.size));
      }
    }
    return {"fig8_group_lift.csv", csv};
  }
  if (which == "fig9") {
    line("algorithm,popularity_lift,miscalibration");
    for (const auto& a : report.algorithms) {
      line(fmt::format("{},{},{}", to_string(a.config.algorithm), num(a.lift),
                       num(a.miscalibration)));
    }
    return {"fig9_lift_vs_miscalibration.csv", csv};
  }
  unknown_figure(which);
}

TuningResult tune_algorithm(const AlgoConfig& base, const ParameterGrid* grid,
                            std::shared_ptr<const RatingsDataset> train,
                            const ExperimentConfig& config, const Logger& log) {
  TuningResult result{base, {}};
  if (base.algorithm == Algorithm::kMostPopular || grid == nullptr) {
    return result;
  }
  const auto points = grid->expand(base);
  if (points.empty()) {
    throw UsageError(fmt::format("empty grid for {}", to_string(base.algorithm)));
  }
  auto inner = split(*train, config.validation_ratio, config.seed + 1,
                     config.per_user_split);
  auto inner_train = std::make_shared<const RatingsDataset>(std::move(inner.train));

  std::optional<double> best;
  for (const auto& point : points) {
    TuningTrial trial{point, std::nullopt, {}};
    try {
      const auto model = fit(inner_train, point, config.threads);
      const auto recs = recommend_all(*model, static_cast<std::size_t>(point.list_size),
                                      config.threads);
      trial.precision =
          precision_at_n(recs, inner.test, config.relevance_threshold).mean;
    } catch (const NumericalError& e) {
      trial.note = e.what();
    }
    std::string settings;
    for (const auto& [k, values] : grid->axes) {
      for (const auto& [key, v] : point.to_pairs()) {
        if (key == k) settings += fmt::format(" {}={}", k, v);
      }
    }
    log(fmt::format("tune {}:{} -> {}", to_string(base.algorithm), settings,
                    trial.precision ? num(*trial.precision) : trial.note));
    if (trial.precision && (!best || *trial.precision > *best)) {
      best = trial.precision;
      result.best = point;
    }
    result.trials.push_back(std::move(trial));
  }
  if (!best) {
    throw NumericalError(fmt::format("every grid point diverged for {}",
                                     to_string(base.algorithm)));
  }
  return result;
}

Experiment::Experiment(ExperimentConfig config, Logger log)
    : config_(std::move(config)), log_(std::move(log)), out_(config_.output_dir) {
  config_.validate();
}

template <typename F>
auto Experiment::stage(std::string_view name, F&& body) {
  const auto status = out_ / "STATUS";
  write_file(status, fmt::format("running {}\n", name));
  log_(fmt::format("stage {}", name));
  auto fail = [&](const std::exception& e) {
    const auto message = fmt::format("stage {} failed: {}", name, e.what());
    try {
      write_file(status, fmt::format("failed {}: {}\n", name, e.what()));
    } catch (const std::exception&) {
      // The original error matters more than the marker.
    }
    return message;
  };
  try {
    body();
  } catch (const UsageError& e) {
    throw UsageError(fail(e));
  } catch (const DataError& e) {
    throw DataError(fail(e));
  } catch (const NumericalError& e) {
    throw NumericalError(fail(e));
  } catch (const std::exception& e) {
    throw DataError(fail(e));
  }
  write_file(status, fmt::format("ok {}\n", name));
}

const PreparedData& Experiment::data() {
  if (data_) return *data_;
  PreparedData d;
  const auto raw = parse_ratings(config_.ratings_path, config_.ratings_format);
  auto& s = d.summary;
  s.raw_ratings = raw.size();
  s.raw_users = raw.num_users();
  s.raw_items = raw.num_items();
  d.dataset = std::make_shared<const RatingsDataset>(
      core_filter(raw, config_.min_user_ratings, config_.min_item_ratings));
  const auto& ds = *d.dataset;
  s.ratings = ds.size();
  s.users = ds.num_users();
  s.items = ds.num_items();
  log_(fmt::format("loaded {} ratings, {} after core filtering ({} users, {} "
                   "items)",
                   s.raw_ratings, s.ratings, s.users, s.items));

  d.catalog = std::make_shared<const ItemCatalog>(
      parse_item_catalog(config_.items_path, config_.catalog_format));
  for (const auto item : ds.items()) {
    if (!d.catalog->contains(item)) ++s.items_not_in_catalog;
  }
  if (s.items_not_in_catalog > 0) {
    d.warnings.push_back(fmt::format("{} rated items are missing from the catalog",
                                     s.items_not_in_catalog));
  }

  if (config_.users_path) {
    auto demographics = restrict_to(parse_demographics(*config_.users_path), ds);
    for (auto& w : demographics.warnings) d.warnings.push_back(w);
    for (const auto user : ds.users()) {
      const auto it = demographics.gender.find(user);
      const auto g = it == demographics.gender.end() ? Gender::kUnknown : it->second;
      if (g == Gender::kMale) ++s.men;
      if (g == Gender::kFemale) ++s.women;
      if (g == Gender::kUnknown) ++s.unknown_gender;
    }
    d.demographics = std::move(demographics);
  } else {
    s.unknown_gender = ds.num_users();
  }

  const auto params = split_params(config_, ds);
  const auto manifest = out_ / "split" / "manifest.csv";
  const auto params_file = out_ / "split" / "params.txt";
  std::optional<TrainTestSplit> parts;
  if (fs::exists(manifest) && fs::exists(params_file) &&
      read_file(params_file) == params) {
    std::ifstream in(manifest);
    parts.emplace(apply_assignment(ds, read_manifest(in, ds.size()),
                                   config_.split_ratio, config_.seed));
    log_(fmt::format("reusing split manifest {}", manifest.string()));
  } else {
    parts.emplace(split(ds, config_.split_ratio, config_.seed,
                        config_.per_user_split));
    std::ostringstream out;
    write_manifest(out, parts->assignment);
    write_file(manifest, out.str());
    write_file(params_file, params);
  }
  d.assignment = parts->assignment;
  d.train = std::make_shared<const RatingsDataset>(std::move(parts->train));
  d.test = std::make_shared<const RatingsDataset>(std::move(parts->test));
  const auto& train = *d.train;
  const auto& test = *d.test;
  s.train_ratings = train.size();
  s.test_ratings = test.size();
  s.train_users = train.num_users();
  s.test_users = test.num_users();
  for (const auto user : test.users()) {
    if (!train.user_index(user)) ++s.test_users_not_in_train;
  }
  for (std::size_t u = 0; u < train.num_users(); ++u) {
    const auto row = train.user_row(u);
    const bool any = std::any_of(row.begin(), row.end(), [&](const Entry& e) {
      return d.catalog->contains(train.item_id(e.index));
    });
    if (!any) ++s.users_without_catalogued_items;
  }
  log_(fmt::format("split {} train / {} test ratings; {} test users absent "
                   "from train",
                   s.train_ratings, s.test_ratings, s.test_users_not_in_train));
  data_ = std::move(d);
  return *data_;
}

void Experiment::prepare() {
  stage("prepare", [&] {
    data_.reset();
    fs::remove(out_ / "split" / "params.txt");
    data();
  });
}

std::vector<std::pair<Algorithm, TuningResult>> Experiment::tune() {
  std::vector<std::pair<Algorithm, TuningResult>> results;
  stage("tune", [&] {
    const auto& d = data();
    fs::remove_all(out_ / "tuning");
    for (const auto& base : config_.algorithms) {
      const auto* grid = config_.grid(base.algorithm);
      auto result = tune_algorithm(base, grid, d.train, config_, log_);
      if (grid != nullptr && base.algorithm != Algorithm::kMostPopular) {
        std::string trials = "point,parameters,precision,note\n";
        for (std::size_t t = 0; t < result.trials.size(); ++t) {
          const auto& trial = result.trials[t];
          std::string params;
          for (const auto& [k, v] : trial.config.to_pairs()) {
            if (k == "algorithm") continue;
            params += (params.empty() ? "" : ";") + k + "=" + v;
          }
          std::string note = trial.note;
          std::replace(note.begin(), note.end(), ',', ';');
          trials += fmt::format("{},{},{},{}\n", t + 1, params,
                                num(trial.precision), note);
        }
        write_file(out_ / "tuning" / algorithm_file(base.algorithm, ".csv"), trials);
        std::string best;
        for (const auto& [k, v] : result.best.to_pairs()) {
          if (k != "algorithm") best += k + " = " + v + "\n";
        }
        write_file(out_ / "tuning" / algorithm_file(base.algorithm, ".best"), best);
      }
      results.emplace_back(base.algorithm, std::move(result));
    }
  });
  return results;
}

AlgoConfig Experiment::effective_config(const AlgoConfig& configured) const {
  AlgoConfig config = configured;
  const auto best = out_ / "tuning" / algorithm_file(configured.algorithm, ".best");
  if (!fs::exists(best)) return config;
  std::istringstream in(read_file(best));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    config.set(line.substr(0, eq), line.substr(eq + 3));
  }
  config.list_size = config_.list_size;
  config.validate();
  return config;
}

void Experiment::train() {
  stage("train", [&] {
    const auto& d = data();
    models_.clear();
    recs_.clear();
    result_.reset();
    for (const auto& configured : config_.algorithms) {
      const auto config = effective_config(configured);
      auto model = fit(d.train, config, config_.threads);
      if (!model->objective_curve().empty()) {
        log_(fmt::format("trained {}: final objective {}, RMSE {}",
                         to_string(config.algorithm),
                         model->objective_curve().back(),
                         model->rmse_curve().back()));
      } else {
        log_(fmt::format("trained {}", to_string(config.algorithm)));
      }
      std::ostringstream out;
      model->save(out);
      write_file(out_ / "models" / algorithm_file(config.algorithm, ".model"),
                 out.str());
      models_[config.algorithm] = std::move(model);
    }
  });
}

const TrainedModel& Experiment::model(Algorithm a) {
  if (const auto it = models_.find(a); it != models_.end()) return *it->second;
  const auto path = out_ / "models" / algorithm_file(a, ".model");
  if (!fs::exists(path)) {
    throw DataError(fmt::format("missing {}; run the train stage first",
                                path.string()));
  }
  std::ifstream in(path);
  auto loaded = load_model(in, data().train);
  return *(models_[a] = std::move(loaded));
}

void Experiment::recommend() {
  stage("recommend", [&] {
    recs_.clear();
    result_.reset();
    for (const auto& configured : config_.algorithms) {
      const auto a = configured.algorithm;
      auto recs = recommend_all(model(a), static_cast<std::size_t>(config_.list_size),
                                config_.threads);
      std::ostringstream out;
      write_recommendations(out, recs);
      write_file(out_ / "recs" / algorithm_file(a, ".csv"), out.str());
      log_(fmt::format("wrote {} lists for {}", recs.lists.size(), to_string(a)));
      recs_[a] = std::move(recs);
    }
  });
}

const RecommendationSet& Experiment::recommendations(Algorithm a) {
  if (const auto it = recs_.find(a); it != recs_.end()) return it->second;
  const auto path = out_ / "recs" / algorithm_file(a, ".csv");
  if (!fs::exists(path)) {
    throw DataError(fmt::format("missing {}; run the recommend stage first",
                                path.string()));
  }
  std::ifstream in(path);
  return recs_[a] = read_recommendations(
             in, static_cast<std::size_t>(config_.list_size), path.string());
}

const ExperimentResult& Experiment::evaluate() {
  stage("evaluate", [&] {
    const auto& d = data();
    const auto& train = *d.train;
    const auto& catalog = *d.catalog;
    ExperimentResult result;
    auto& report = result.report;
    report.config_echo = config_.render(false);
    report.split_seed = config_.seed;
    report.data = d.summary;
    report.warnings = d.warnings;

    const auto popularity = item_popularity(train);

    // Cohorts are fixed by training profiles, so every algorithm is measured
    // on the same partition.
    std::map<UserId, double> scores;
    for (std::size_t u = 0; u < train.num_users(); ++u) {
      const auto user = train.user_id(u);
      if (profile_distribution(user, train, catalog).is_empty()) continue;
      scores[user] = profile_avg_popularity(user, train, popularity);
    }
    if (scores.empty()) throw DataError("no user has a catalogued training item");
    result.popularity_groups =
        group_by_popularity(scores, config_.n_groups, config_.grouping);
    std::vector<UserId> population;
    for (const auto& [user, score] : scores) {
      population.push_back(user);
      result.user_propensity.emplace_back(user, score);
    }
    std::stable_sort(result.user_propensity.begin(), result.user_propensity.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    if (d.demographics) {
      result.gender_groups = group_by_gender(population, *d.demographics);
    } else {
      result.gender_groups.name = "gender";
    }
    for (const auto* p : {&result.popularity_groups, &result.gender_groups}) {
      for (const auto& w : p->warnings) report.warnings.push_back(w);
    }
    {
      std::ostringstream out;
      const std::vector<CohortPartition> parts = {result.popularity_groups,
                                                  result.gender_groups};
      write_cohorts(out, parts);
      write_file(out_ / "metrics" / "cohorts.csv", out.str());
    }

    {
      const auto& ds = *d.dataset;
      std::vector<std::size_t> order(ds.num_items());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ds.item_column(a).size() > ds.item_column(b).size();
      });
      std::size_t running = 0;
      for (const auto i : order) {
        const auto count = ds.item_column(i).size();
        running += count;
        result.long_tail.push_back(LongTailRow{
            ds.item_id(i), count,
            static_cast<double>(count) / static_cast<double>(ds.num_users()),
            static_cast<double>(running) / static_cast<double>(ds.size())});
      }
    }

    const auto group_of = result.popularity_groups.label_of();
    for (const auto& configured : config_.algorithms) {
      const auto a = configured.algorithm;
      const auto& recs = recommendations(a);
      AlgorithmReport r;
      r.config = model(a).config();

      const auto precision = precision_at_n(recs, *d.test, config_.relevance_threshold);
      r.precision = precision.mean;
      r.precision_users = precision.per_user.size();
      r.precision_excluded_no_test = precision.excluded_empty_test;
      r.test_users_without_list = precision.test_users_without_list;

      const auto metrics = user_metrics(train, recs, catalog, popularity);
      const auto users = metrics.users();
      if (users.empty()) {
        throw DataError(fmt::format("no user could be evaluated for {}", to_string(a)));
      }
      r.users_evaluated = users.size();
      r.excluded_empty_profile = metrics.excluded_empty_profile;
      r.excluded_empty_list = metrics.excluded_empty_list;
      for (const auto& [user, list] : recs.lists) r.short_lists += list.short_list;
      log_(fmt::format("{}: precision {} over {} users; {} evaluated, {} empty "
                       "profiles, {} empty lists",
                       to_string(a), r.precision, r.precision_users,
                       r.users_evaluated, r.excluded_empty_profile,
                       r.excluded_empty_list));

      const auto mc = metrics.miscalibration_by_user();
      std::map<UserId, const UserMetricRow*> rows;
      double kl = 0.0;
      for (const auto& row : metrics.rows) {
        rows[row.user] = &row;
        if (!user_popularity_lift(row)) ++r.lift_undefined;
        kl += kl_miscalibration(profile_distribution(row.user, train, catalog),
                                recommendation_distribution(row.user, recs, catalog),
                                config_.kl_epsilon);
      }
      r.kl_miscalibration = kl / static_cast<double>(metrics.rows.size());
      r.gap_p = gap_profile(users, train, popularity);
      r.gap_q = gap_recs(users, recs, popularity);
      r.lift = popularity_lift(r.gap_p, r.gap_q);
      r.miscalibration = group_miscalibration(users, mc);

      std::vector<CohortSamples> groups;
      for (const auto& c : result.popularity_groups.cohorts) {
        groups.push_back(cohort_samples(c, rows, train, recs, popularity, mc));
        r.popularity_groups.push_back(groups.back().row);
      }
      const auto name = std::string(to_string(a));
      r.extreme_lift_test = compare(groups.front().lifts, groups.back().lifts,
                                    name + " extreme-group lift test", report.warnings);
      r.extreme_miscalibration_test =
          compare(groups.front().miscalibration, groups.back().miscalibration,
                  name + " extreme-group miscalibration test", report.warnings);

      std::vector<double> xs;
      std::vector<double> ys;
      for (const auto& g : r.popularity_groups) {
        if (g.gap_p && g.lift) {
          xs.push_back(*g.gap_p);
          ys.push_back(*g.lift);
        }
      }
      if (xs.size() >= 3) {
        try {
          r.group_trend_spearman = spearman_correlation(xs, ys);
        } catch (const NumericalError& e) {
          report.warnings.push_back(fmt::format("{} group trend: {}", name, e.what()));
        }
      }

      if (result.gender_groups.cohorts.size() == 2) {
        std::map<std::string, CohortSamples> by_label;
        for (const auto& c : result.gender_groups.cohorts) {
          auto s = cohort_samples(c, rows, train, recs, popularity, mc);
          r.gender_groups.push_back(s.row);
          by_label.emplace(c.label, std::move(s));
        }
        const auto& women = by_label.at("women");
        const auto& men = by_label.at("men");
        r.gender_lift_test = compare(women.lifts, men.lifts,
                                     name + " gender lift test", report.warnings);
        r.gender_miscalibration_test =
            compare(women.miscalibration, men.miscalibration,
                    name + " gender miscalibration test", report.warnings);
      }

      std::ostringstream out;
      write_user_metrics(out, metrics, group_of);
      write_file(out_ / "metrics" / algorithm_file(a, ".users.csv"), out.str());
      result.exposure.emplace_back(a, rated_vs_recommended(train, recs));
      report.algorithms.push_back(std::move(r));
    }

    std::vector<double> lifts;
    std::vector<double> mcs;
    for (const auto& r : report.algorithms) {
      if (!r.lift) continue;
      lifts.push_back(*r.lift);
      mcs.push_back(r.miscalibration);
    }
    if (lifts.size() >= 3) {
      try {
        report.lift_miscalibration_pearson = pearson_correlation(lifts, mcs);
      } catch (const NumericalError& e) {
        report.warnings.push_back(fmt::format("PL-MC correlation: {}", e.what()));
      }
    }
    result_ = std::move(result);
  });
  return *result_;
}

const AuditReport& Experiment::report() {
  if (!result_) evaluate();
  stage("report", [&] {
    write_file(out_ / "report.json", result_->report.to_json());
    write_file(out_ / "report.txt", result_->report.to_text());
  });
  return result_->report;
}

void Experiment::export_figures(const std::vector<std::string>& ids) {
  // Resolve ids before any work so a typo fails fast.
  const auto& wanted = ids.empty() ? figure_ids() : ids;
  for (const auto& id : wanted) {
    if (std::find(figure_ids().begin(), figure_ids().end(), id) ==
        figure_ids().end()) {
      unknown_figure(id);
    }
  }
  if (!result_) evaluate();
  stage("export-fig", [&] {
    for (const auto& id : wanted) {
      const auto table = export_figure_data(*result_, id);
      write_file(out_ / "figures" / table.file_name, table.csv);
    }
  });
}

ExperimentResult run_experiment(const ExperimentConfig& config, Logger log) {
  Experiment experiment(config, std::move(log));
  experiment.prepare();
  experiment.tune();
  experiment.train();
  experiment.recommend();
  ExperimentResult result = experiment.evaluate();
  experiment.report();
  experiment.export_figures({});
  return result;
}

}  // namespace popaudit
