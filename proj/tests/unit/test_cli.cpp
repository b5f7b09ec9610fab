// Copyright 2026 The Gradeline Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "gradeline/cli.hpp"
#include "test_support.hpp"

namespace gradeline {
namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  Outcome cli(std::vector<std::string> args) {
    args.insert(args.begin(), {"--data-dir", (dir_ / "store").string()});
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
  }

  Outcome seeded() { return cli({"seed", "import", testkit::source_path("data/seed.json").string()}); }

  std::string start_run(const std::vector<std::string>& extra = {}) {
    std::vector<std::string> args = {"--json", "run", "start", "--model", "mock", "--judges", "mock"};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return json::parse(r.out).at("id");
  }

  testkit::TempDir dir_;
};

TEST_F(CliTest, SeedImportPrintsCounts) {
  const auto r = seeded();
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "issues: 20, tests: 20\n");
  EXPECT_EQ(seeded().code, 1);
  EXPECT_EQ(cli({"seed", "import", testkit::source_path("data/seed.json").string(), "--replace"}).code, 0);
}

TEST_F(CliTest, MockRunReportTotalsMatchSelection) {
  seeded();
  const std::string id = start_run({"--tag", "Math"});
  const auto r = cli({"--json", "report", "show", id});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(r.out);
  const json& t = report.at("totals");
  EXPECT_EQ(t.at("passed").get<int>() + t.at("failed").get<int>() + t.at("undetermined").get<int>() +
                t.at("inference_error").get<int>() + t.at("selection_error").get<int>(),
            4);
  EXPECT_EQ(t.at("total"), 4);
  EXPECT_EQ(report.at("per_tag").size(), 1u);

  const auto csv = cli({"report", "show", id, "--csv"});
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 5);
}

TEST_F(CliTest, CompareIdenticalRunsAllMatch) {
  seeded();
  const std::string a = start_run();
  const std::string b = start_run();
  const auto r = cli({"--json", "compare", a, b});
  ASSERT_EQ(r.code, 0) << r.err;
  const json c = json::parse(r.out);
  EXPECT_EQ(c.at("counts").at("match"), c.at("shared_test_ids").size());
  EXPECT_EQ(c.at("counts").at("outperform"), 0);
  EXPECT_EQ(c.at("counts").at("underperform"), 0);
  EXPECT_EQ(c.at("shared_test_ids").size(), 20u);

  const auto trend = cli({"--json", "trend", a, b, "--group-by", "domain"});
  ASSERT_EQ(trend.code, 0) << trend.err;
  EXPECT_EQ(json::parse(trend.out).size(), 10u);
}

TEST_F(CliTest, IssueAndTestCommands) {
  seeded();
  auto listed = cli({"--json", "issue", "list", "--tag", "Math"});
  EXPECT_EQ(json::parse(listed.out).size(), 4u);
  const auto created = cli({"issue", "create", "--title", "Math - Probability", "--description", "d", "--tag", "Math"});
  ASSERT_EQ(created.code, 0) << created.err;
  const std::string issue = created.out.substr(0, created.out.size() - 1);
  const auto added = cli({"test", "add", issue, "--prompt", "P(A)?", "--reference", "0.5", "--template", "T1",
                          "--guideline", "1. Must be 0.5."});
  EXPECT_EQ(added.code, 0) << added.err;
  EXPECT_EQ(cli({"issue", "status", issue, "resolved"}).code, 0);
  EXPECT_EQ(json::parse(cli({"--json", "issue", "list", "--tag", "Math"}).out).size(), 5u);
}

TEST_F(CliTest, OverrideThenReport) {
  seeded();
  const std::string id = start_run({"--tag", "Code"});
  const auto results = cli({"--json", "run", "status", id});
  ASSERT_EQ(results.code, 0);
  const auto run = json::parse(results.out);
  const std::string result_id = run.at("result_ids")[0];
  const auto o = cli({"override", result_id, "--score", "0", "--justification", "misses an edge case"});
  ASSERT_EQ(o.code, 0) << o.err;
  const json report = json::parse(cli({"--json", "report", "show", id}).out);
  EXPECT_EQ(report.at("totals").at("failed"), 1);
}

TEST_F(CliTest, RunExportAndImport) {
  seeded();
  const std::string id = start_run({"--tag", "Table"});
  const auto path = (dir_ / "run.json.gz").string();
  ASSERT_EQ(cli({"run", "export", id, path}).code, 0);
  const auto imported = cli({"run", "import", path});
  ASSERT_EQ(imported.code, 0) << imported.err;
  EXPECT_NE(imported.out, id + "\n");
}

TEST_F(CliTest, ExitCodes) {
  seeded();
  EXPECT_EQ(cli({"report", "show", "no-such-run"}).code, 1);
  EXPECT_EQ(cli({"issue", "create", "--title", "", "--description", "d", "--tag", "Math"}).code, 1);
  EXPECT_EQ(cli({"issue", "status", "issue-01", "archived"}).code, 1);
  EXPECT_EQ(cli({}).code, 64);
  EXPECT_EQ(cli({"frobnicate"}).code, 64);
  EXPECT_EQ(cli({"run", "start", "--model", "mock"}).code, 64);

  // A regular file where the data directory should be.
  std::ofstream(dir_ / "blocker") << "x";
  std::ostringstream out, err;
  EXPECT_EQ(run_cli({"--data-dir", (dir_ / "blocker").string(), "issue", "list"}, out, err), 2);
  EXPECT_EQ(cli({"serve", "--host", "0.0.0.0", "--port", "0"}).code, 2);
}

TEST_F(CliTest, SeedFlagImportsOnlyIntoEmptyStore) {
  const auto seed = testkit::source_path("data/seed.json").string();
  const auto r = cli({"--seed", seed, "--json", "issue", "list"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out).size(), 20u);
  EXPECT_EQ(cli({"--seed", seed, "issue", "list"}).code, 0);
}

}  // namespace
}  // namespace gradeline
