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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string command = std::string(POPAUDIT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string fixture_cfg() {
  return (fs::path(POPAUDIT_SOURCE_DIR) / "configs" / "ci_fixture.cfg").string();
}

TEST(Cli, RunAndStageVerbsSucceed) {
  const auto out = testutil::scratch_dir("cli_run");
  EXPECT_EQ(run("run -q -c " + fixture_cfg() + " -o " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "report.json"));
  const auto staged = testutil::scratch_dir("cli_staged");
  for (const char* verb : {"prepare", "tune", "train", "recommend", "evaluate", "report"}) {
    EXPECT_EQ(run(std::string(verb) + " -q -c " + fixture_cfg() + " -o " + staged.string()), 0)
        << verb;
  }
  EXPECT_EQ(run("export-fig fig7 fig8 -q -c " + fixture_cfg() + " -o " + staged.string()), 0);
  EXPECT_TRUE(fs::exists(staged / "figures" / "fig8_group_lift.csv"));
  EXPECT_FALSE(fs::exists(staged / "figures" / "fig2_long_tail.csv"));
}

TEST(Cli, SeedOverrideChangesSplit) {
  const auto a = testutil::scratch_dir("cli_seed_a");
  const auto b = testutil::scratch_dir("cli_seed_b");
  ASSERT_EQ(run("prepare -q -c " + fixture_cfg() + " -o " + a.string()), 0);
  ASSERT_EQ(run("prepare -q --seed 7 -c " + fixture_cfg() + " -o " + b.string()), 0);
  std::ifstream pa(a / "split" / "params.txt"), pb(b / "split" / "params.txt");
  std::string la((std::istreambuf_iterator<char>(pa)), {}), lb((std::istreambuf_iterator<char>(pb)), {});
  EXPECT_NE(la, lb);
  EXPECT_NE(lb.find("seed = 7"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  const auto dir = testutil::scratch_dir("cli_codes");
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("run"), 1);
  EXPECT_EQ(run("run -q -c /nonexistent.cfg"), 1);
  EXPECT_EQ(run("export-fig fig42 -q -c " + fixture_cfg() + " -o " + dir.string()), 1);
  EXPECT_EQ(run("run -q --algorithms Nope -c " + fixture_cfg() + " -o " + dir.string()), 1);

  std::ofstream(dir / "bad.dat") << "1::1::5::0\n2::x::4::0\n";
  std::ofstream(dir / "bad.cfg") << "schema_version = 1\n[data]\nratings = bad.dat\n"
                                 << "items = " << (testutil::data_dir() / "ci_fixture" / "movies.dat").string()
                                 << "\n[algorithm MostPopular]\n";
  EXPECT_EQ(run("prepare -q -c " + (dir / "bad.cfg").string() + " -o " + (dir / "o1").string()), 2);

  std::ofstream(dir / "diverge.cfg")
      << "schema_version = 1\n[data]\n"
      << "ratings = " << (testutil::data_dir() / "ci_fixture" / "ratings.dat").string() << "\n"
      << "items = " << (testutil::data_dir() / "ci_fixture" / "movies.dat").string() << "\n"
      << "[algorithm BMF]\nlearning_rate = 5\nepochs = 50\n";
  EXPECT_EQ(run("run -q -c " + (dir / "diverge.cfg").string() + " -o " + (dir / "o2").string()), 3);
}

TEST(Cli, GenerateSyntheticIsDeterministic) {
  const auto a = testutil::scratch_dir("cli_syn_a");
  const auto b = testutil::scratch_dir("cli_syn_b");
  ASSERT_EQ(run("generate-synthetic -o " + a.string() + " --users 30 --items 40 --seed 5"), 0);
  ASSERT_EQ(run("generate-synthetic -o " + b.string() + " --users 30 --items 40 --seed 5"), 0);
  for (const char* f : {"ratings.dat", "movies.dat", "users.dat"}) {
    std::ifstream fa(a / f), fb(b / f);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {});
    const std::string sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_FALSE(sa.empty());
    EXPECT_EQ(sa, sb) << f;
  }
}

}  // namespace
