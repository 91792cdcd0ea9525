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

// popaudit: popularity-bias and calibration audits of top-N recommenders.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "popaudit/config.hpp"
#include "popaudit/error.hpp"
#include "popaudit/experiment.hpp"
#include "popaudit/synthetic.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumerical = 3;

struct PipelineOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> algorithms;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  bool quiet = false;
};

void add_pipeline_options(CLI::App* cmd, PipelineOptions& o) {
  cmd->add_option("-c,--config", o.config, "Experiment config file")->required();
  cmd->add_option("--seed", o.seed,
                  "Override the split seed and every algorithm seed");
  cmd->add_option("--algorithms", o.algorithms,
                  "Restrict to these configured algorithms")
      ->delimiter(',');
  cmd->add_option("-o,--out", o.out, "Override the output directory");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
  cmd->add_flag("-q,--quiet", o.quiet, "Suppress progress logs");
}

popaudit::ExperimentConfig load(const PipelineOptions& o) {
  auto config = popaudit::load_config(o.config);
  if (o.seed) {
    config.seed = *o.seed;
    for (auto& a : config.algorithms) a.seed = *o.seed;
  }
  if (o.out) config.output_dir = *o.out;
  if (o.threads) config.threads = *o.threads;
  if (!o.algorithms.empty()) {
    std::vector<popaudit::AlgoConfig> subset;
    for (const auto& name : o.algorithms) {
      subset.push_back(config.algorithm(popaudit::parse_algorithm(name)));
    }
    config.algorithms = std::move(subset);
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Popularity-bias and calibration audit for top-N recommenders"};
  app.require_subcommand(1);

  PipelineOptions options;
  std::vector<std::string> figures;
  const char* pipeline_verbs[][2] = {
      {"prepare", "Load, core-filter and split the ratings"},
      {"tune", "Grid-search hyperparameters on an inner validation split"},
      {"train", "Fit every configured algorithm"},
      {"recommend", "Write top-N lists for every training user"},
      {"evaluate", "Compute precision, popularity and calibration metrics"},
      {"report", "Write report.json and report.txt"},
      {"export-fig", "Write the CSV data behind each figure"},
      {"run", "Run every stage in order"}};
  std::vector<CLI::App*> pipeline;
  for (const auto& [name, help] : pipeline_verbs) {
    auto* cmd = app.add_subcommand(name, help);
    add_pipeline_options(cmd, options);
    pipeline.push_back(cmd);
  }
  pipeline[6]->add_option("figures", figures,
                          "Figure ids (default: all of fig2..fig9)");

  popaudit::SyntheticSpec spec;
  std::string synthetic_out;
  auto* synth = app.add_subcommand(
      "generate-synthetic", "Write a MovieLens-1M-shaped random dataset");
  synth->add_option("-o,--out", synthetic_out, "Output directory")->required();
  synth->add_option("--users", spec.users, "Number of users");
  synth->add_option("--items", spec.items, "Number of items");
  synth->add_option("--genres", spec.genres, "Number of genres (max 18)");
  synth->add_option("--min-ratings", spec.min_ratings, "Ratings per user, minimum");
  synth->add_option("--extra-ratings", spec.extra_ratings,
                    "Mean ratings per user beyond the minimum");
  synth->add_option("--zipf", spec.zipf_exponent, "Item popularity exponent");
  synth->add_option("--female-fraction", spec.female_fraction,
                    "Share of users labelled F");
  synth->add_option("--seed", spec.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (synth->parsed()) {
      const auto data = popaudit::generate_synthetic(spec);
      popaudit::write_movielens(synthetic_out, data);
      fmt::print("wrote {} ratings to {}\n", data.ratings.size(), synthetic_out);
      return 0;
    }
    const auto config = load(options);
    popaudit::Experiment experiment(
        config, options.quiet ? popaudit::null_logger() : popaudit::stderr_logger());
    const std::string verb = app.get_subcommands().front()->get_name();
    if (verb == "prepare") {
      experiment.prepare();
    } else if (verb == "tune") {
      experiment.tune();
    } else if (verb == "train") {
      experiment.train();
    } else if (verb == "recommend") {
      experiment.recommend();
    } else if (verb == "evaluate") {
      experiment.evaluate();
    } else if (verb == "report") {
      fmt::print("{}", experiment.report().to_text());
    } else if (verb == "export-fig") {
      experiment.export_figures(figures);
    } else {
      experiment.prepare();
      experiment.tune();
      experiment.train();
      experiment.recommend();
      experiment.evaluate();
      fmt::print("{}", experiment.report().to_text());
      experiment.export_figures({});
    }
    return 0;
  } catch (const popaudit::UsageError& e) {
    fmt::print(stderr, "popaudit: {}\n", e.what());
    return kUsage;
  } catch (const popaudit::DataError& e) {
    fmt::print(stderr, "popaudit: {}\n", e.what());
    return kData;
  } catch (const popaudit::NumericalError& e) {
    fmt::print(stderr, "popaudit: {}\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    fmt::print(stderr, "popaudit: {}\n", e.what());
    return kData;
  }
}
