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

#include "popaudit/config.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include <fmt/format.h>

#include "popaudit/error.hpp"
#include "text.hpp"

namespace popaudit {
namespace {

std::filesystem::path resolve(const std::filesystem::path& base,
                              std::string_view value) {
  std::filesystem::path p{std::string(value)};
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw UsageError(fmt::format("{} must be true or false, got '{}'", key, v));
}

std::int64_t parse_int(std::string_view key, std::string_view v) {
  if (const auto x = text::parse_int(v)) return *x;
  throw UsageError(fmt::format("{} must be an integer, got '{}'", key, v));
}

double parse_real(std::string_view key, std::string_view v) {
  if (const auto x = text::parse_double(v)) return *x;
  throw UsageError(fmt::format("{} must be a number, got '{}'", key, v));
}

FileFormat parse_format(std::string_view v) {
  if (v == "movielens-1m") return FileFormat::kMovieLens1M;
  if (v == "delimited-generic") return FileFormat::kDelimited;
  throw UsageError(fmt::format(
      "unknown data format '{}' (valid: movielens-1m, delimited-generic)", v));
}

std::string unescape_delimiter(std::string_view v) {
  if (v == "\\t" || v == "tab") return "\t";
  if (v == "space") return " ";
  if (v == "comma") return ",";
  return std::string(v);
}

std::string escape_delimiter(const std::string& v) {
  if (v == "\t") return "tab";
  if (v == " ") return "space";
  return v;
}

void apply_data(ExperimentConfig& c, const std::filesystem::path& base,
                std::string_view key, std::string_view v) {
  auto& rf = c.ratings_format;
  auto& cf = c.catalog_format;
  if (key == "format") {
    rf.kind = cf.kind = parse_format(v);
  } else if (key == "ratings") {
    c.ratings_path = resolve(base, v);
  } else if (key == "items") {
    c.items_path = resolve(base, v);
  } else if (key == "users") {
    c.users_path = resolve(base, v);
  } else if (key == "delimiter") {
    rf.delimiter = unescape_delimiter(v);
  } else if (key == "user_column") {
    rf.user_column = static_cast<int>(parse_int(key, v));
  } else if (key == "item_column") {
    rf.item_column = static_cast<int>(parse_int(key, v));
  } else if (key == "rating_column") {
    rf.rating_column = static_cast<int>(parse_int(key, v));
  } else if (key == "timestamp_column") {
    rf.timestamp_column = static_cast<int>(parse_int(key, v));
  } else if (key == "header") {
    rf.header = parse_bool(key, v);
  } else if (key == "rating_min") {
    rf.scale.min = parse_real(key, v);
  } else if (key == "rating_max") {
    rf.scale.max = parse_real(key, v);
  } else if (key == "catalog_delimiter") {
    cf.delimiter = unescape_delimiter(v);
  } else if (key == "catalog_item_column") {
    cf.item_column = static_cast<int>(parse_int(key, v));
  } else if (key == "catalog_genre_column") {
    cf.genre_column = static_cast<int>(parse_int(key, v));
  } else if (key == "genre_separator") {
    cf.genre_separator = unescape_delimiter(v);
  } else if (key == "catalog_header") {
    cf.header = parse_bool(key, v);
  } else {
    throw UsageError(fmt::format("unknown [data] key '{}'", key));
  }
}

void apply_split(ExperimentConfig& c, std::string_view key,
                 std::string_view v) {
  if (key == "min_user_ratings") {
    c.min_user_ratings = static_cast<std::size_t>(parse_int(key, v));
  } else if (key == "min_item_ratings") {
    c.min_item_ratings = static_cast<std::size_t>(parse_int(key, v));
  } else if (key == "ratio") {
    c.split_ratio = parse_real(key, v);
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(parse_int(key, v));
  } else if (key == "per_user") {
    c.per_user_split = parse_bool(key, v);
  } else {
    throw UsageError(fmt::format("unknown [split] key '{}'", key));
  }
}

void apply_evaluation(ExperimentConfig& c, std::string_view key,
                      std::string_view v) {
  if (key == "list_size") {
    c.list_size = static_cast<int>(parse_int(key, v));
  } else if (key == "n_groups") {
    c.n_groups = static_cast<int>(parse_int(key, v));
  } else if (key == "grouping") {
    c.grouping = parse_grouping_scheme(v);
  } else if (key == "relevance_threshold") {
    if (v == "none") {
      c.relevance_threshold.reset();
    } else {
      c.relevance_threshold = parse_real(key, v);
    }
  } else if (key == "kl_epsilon") {
    c.kl_epsilon = parse_real(key, v);
  } else if (key == "threads") {
    c.threads = static_cast<unsigned>(parse_int(key, v));
  } else {
    throw UsageError(fmt::format("unknown [evaluation] key '{}'", key));
  }
}

}  // namespace

std::size_t ParameterGrid::size() const {
  std::size_t n = 1;
  for (const auto& [key, values] : axes) n *= values.size();
  return axes.empty() ? 0 : n;
}

std::vector<AlgoConfig> ParameterGrid::expand(const AlgoConfig& base) const {
  std::vector<AlgoConfig> points;
  const std::size_t n = size();
  for (std::size_t p = 0; p < n; ++p) {
    AlgoConfig config = base;
    std::size_t rest = p;
    for (auto axis = axes.rbegin(); axis != axes.rend(); ++axis) {
      config.set(axis->first, axis->second[rest % axis->second.size()]);
      rest /= axis->second.size();
    }
    points.push_back(config);
  }
  return points;
}

void ExperimentConfig::validate(bool check_paths) const {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw UsageError(fmt::format("split ratio {} outside (0, 1)", split_ratio));
  }
  if (!(validation_ratio > 0.0 && validation_ratio < 1.0)) {
    throw UsageError("validation_ratio outside (0, 1)");
  }
  if (min_user_ratings < 1 || min_item_ratings < 1) {
    throw UsageError("core filter thresholds must be >= 1");
  }
  if (list_size < 1) throw UsageError("list_size must be >= 1");
  if (n_groups < 2) throw UsageError("n_groups must be >= 2");
  if (!(kl_epsilon > 0.0 && kl_epsilon < 1.0)) {
    throw UsageError("kl_epsilon outside (0, 1)");
  }
  if (algorithms.empty()) throw UsageError("no [algorithm] sections");
  for (std::size_t a = 0; a < algorithms.size(); ++a) {
    algorithms[a].validate();
    for (std::size_t b = 0; b < a; ++b) {
      if (algorithms[a].algorithm == algorithms[b].algorithm) {
        throw UsageError(fmt::format("algorithm {} configured twice",
                                     to_string(algorithms[a].algorithm)));
      }
    }
  }
  for (const auto& grid : grids) {
    if (grid.size() == 0) {
      throw UsageError(fmt::format("empty grid for {}",
                                   to_string(grid.algorithm)));
    }
  }
  if (ratings_path.empty()) throw UsageError("[data] ratings is required");
  if (items_path.empty()) throw UsageError("[data] items is required");
  if (check_paths) {
    for (const auto& p : {ratings_path, items_path}) {
      if (!std::filesystem::exists(p)) {
        throw DataError(fmt::format("input file {} does not exist", p.string()));
      }
    }
    if (users_path && !std::filesystem::exists(*users_path)) {
      throw DataError(fmt::format("input file {} does not exist",
                                  users_path->string()));
    }
  }
}

const AlgoConfig& ExperimentConfig::algorithm(Algorithm a) const {
  for (const auto& c : algorithms) {
    if (c.algorithm == a) return c;
  }
  throw UsageError(fmt::format("algorithm {} is not configured", to_string(a)));
}

const ParameterGrid* ExperimentConfig::grid(Algorithm a) const {
  for (const auto& g : grids) {
    if (g.algorithm == a) return &g;
  }
  return nullptr;
}

ExperimentConfig parse_config(std::istream& in,
                              const std::filesystem::path& base_dir,
                              const std::string& source) {
  ExperimentConfig c;
  std::string section;
  AlgoConfig* algo = nullptr;
  ParameterGrid* grid = nullptr;
  bool saw_version = false;
  // Pointers into the vectors are re-fetched after every push_back.
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::pair<std::size_t, bool>> open_section;
  while (std::getline(in, line)) {
    ++line_no;
    text::strip_cr(line);
    const auto hash = line.find('#');
    std::string_view body = text::trim(
        std::string_view(line).substr(0, hash == std::string::npos ? line.size()
                                                                   : hash));
    if (body.empty()) continue;
    auto fail = [&](const std::string& what) {
      return UsageError(fmt::format("{}:{}: {}", source, line_no, what));
    };
    try {
      if (body.front() == '[') {
        if (body.back() != ']') throw fail("unterminated section header");
        const auto inner = text::trim(body.substr(1, body.size() - 2));
        const auto space = inner.find(' ');
        section = std::string(inner.substr(0, space));
        algo = nullptr;
        grid = nullptr;
        if (section == "algorithm" || section == "grid") {
          if (space == std::string_view::npos) {
            throw fail(fmt::format("[{}] needs an algorithm name", section));
          }
          const Algorithm a = parse_algorithm(inner.substr(space + 1));
          if (section == "algorithm") {
            for (const auto& existing : c.algorithms) {
              if (existing.algorithm == a) {
                throw fail(fmt::format("duplicate [algorithm {}]", to_string(a)));
              }
            }
            c.algorithms.emplace_back();
            c.algorithms.back().algorithm = a;
            algo = &c.algorithms.back();
          } else {
            c.grids.push_back(ParameterGrid{a, {}});
            grid = &c.grids.back();
          }
        } else if (section != "data" && section != "split" &&
                   section != "evaluation" && section != "tuning" &&
                   section != "output") {
          throw fail(fmt::format("unknown section [{}]", section));
        }
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) throw fail("expected key = value");
      const auto key = text::trim(body.substr(0, eq));
      const auto value = text::trim(body.substr(eq + 1));
      if (section.empty()) {
        if (key != "schema_version") {
          throw fail(fmt::format("key '{}' outside any section", key));
        }
        const auto v = parse_int(key, value);
        if (v != ExperimentConfig::kSchemaVersion) {
          throw fail(fmt::format("unsupported schema_version {}", v));
        }
        saw_version = true;
      } else if (section == "data") {
        apply_data(c, base_dir, key, value);
      } else if (section == "split") {
        apply_split(c, key, value);
      } else if (section == "evaluation") {
        apply_evaluation(c, key, value);
      } else if (section == "tuning") {
        if (key != "validation_ratio") {
          throw fail(fmt::format("unknown [tuning] key '{}'", key));
        }
        c.validation_ratio = parse_real(key, value);
      } else if (section == "output") {
        if (key != "dir") throw fail(fmt::format("unknown [output] key '{}'", key));
        c.output_dir = resolve(base_dir, value);
      } else if (algo != nullptr) {
        if (key == "algorithm") throw fail("algorithm is set by the section name");
        algo->set(key, value);
      } else if (grid != nullptr) {
        std::vector<std::string> values;
        for (auto v : text::split(value, ",")) {
          v = text::trim(v);
          if (!v.empty()) values.emplace_back(v);
        }
        if (values.empty()) throw fail(fmt::format("grid '{}' has no values", key));
        // Validate each value once up front so a typo fails at load time.
        AlgoConfig probe;
        probe.algorithm = grid->algorithm;
        for (const auto& v : values) probe.set(key, v);
        grid->axes.emplace_back(std::string(key), std::move(values));
      }
    } catch (const UsageError& e) {
      const std::string what = e.what();
      if (what.rfind(source, 0) == 0) throw;
      throw UsageError(fmt::format("{}:{}: {}", source, line_no, what));
    }
  }
  if (!saw_version) {
    throw UsageError(fmt::format("{}: missing schema_version", source));
  }
  for (auto& a : c.algorithms) a.list_size = c.list_size;
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot open config {}", path.string()));
  return parse_config(in, path.parent_path(), path.string());
}

std::string ExperimentConfig::render(bool include_output_dir) const {
  std::ostringstream out;
  const bool generic = ratings_format.kind == FileFormat::kDelimited;
  out << "schema_version = " << kSchemaVersion << "\n\n[data]\n";
  out << "format = " << (generic ? "delimited-generic" : "movielens-1m") << '\n';
  out << "ratings = " << std::filesystem::absolute(ratings_path).string() << '\n';
  out << "items = " << std::filesystem::absolute(items_path).string() << '\n';
  if (users_path) {
    out << "users = " << std::filesystem::absolute(*users_path).string() << '\n';
  }
  if (generic) {
    out << "delimiter = " << escape_delimiter(ratings_format.delimiter) << '\n'
        << "user_column = " << ratings_format.user_column << '\n'
        << "item_column = " << ratings_format.item_column << '\n'
        << "rating_column = " << ratings_format.rating_column << '\n'
        << "timestamp_column = " << ratings_format.timestamp_column << '\n'
        << "header = " << (ratings_format.header ? "true" : "false") << '\n'
        << "catalog_delimiter = " << escape_delimiter(catalog_format.delimiter)
        << '\n'
        << "catalog_item_column = " << catalog_format.item_column << '\n'
        << "catalog_genre_column = " << catalog_format.genre_column << '\n'
        << "genre_separator = " << escape_delimiter(catalog_format.genre_separator)
        << '\n'
        << "catalog_header = " << (catalog_format.header ? "true" : "false")
        << '\n';
  }
  out << fmt::format("rating_min = {}\nrating_max = {}\n", ratings_format.scale.min,
                     ratings_format.scale.max);
  out << "\n[split]\n"
      << "min_user_ratings = " << min_user_ratings << '\n'
      << "min_item_ratings = " << min_item_ratings << '\n'
      << fmt::format("ratio = {}\n", split_ratio) << "seed = " << seed << '\n'
      << "per_user = " << (per_user_split ? "true" : "false") << '\n';
  out << "\n[evaluation]\n"
      << "list_size = " << list_size << '\n'
      << "n_groups = " << n_groups << '\n'
      << "grouping = " << to_string(grouping) << '\n'
      << "relevance_threshold = "
      << (relevance_threshold ? fmt::format("{}", *relevance_threshold) : "none")
      << '\n'
      << fmt::format("kl_epsilon = {}\n", kl_epsilon)
      << "threads = " << threads << '\n';
  out << fmt::format("\n[tuning]\nvalidation_ratio = {}\n", validation_ratio);
  if (include_output_dir) {
    out << "\n[output]\ndir = " << std::filesystem::absolute(output_dir).string()
        << '\n';
  }
  for (const auto& a : algorithms) {
    out << "\n[algorithm " << to_string(a.algorithm) << "]\n";
    for (const auto& [k, v] : a.to_pairs()) {
      if (k == "algorithm" || k == "list_size") continue;
      out << k << " = " << v << '\n';
    }
  }
  for (const auto& g : grids) {
    out << "\n[grid " << to_string(g.algorithm) << "]\n";
    for (const auto& [k, values] : g.axes) {
      out << k << " = ";
      for (std::size_t i = 0; i < values.size(); ++i) {
        out << (i ? ", " : "") << values[i];
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace popaudit
