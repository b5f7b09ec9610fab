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
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <random>

#include "gradeline/repository.hpp"
#include "test_support.hpp"

namespace gradeline {
namespace {

using testkit::TempDir;

IssueDraft draft(const std::string& title, const std::string& domain) {
  IssueDraft d;
  d.title = title;
  d.description = "The model gets " + title + " wrong.";
  d.tags = {Tag{TagKind::Domain, domain}};
  return d;
}

gradeline::Test test_draft(const std::string& prompt = "What is 2 + 2?") {
  gradeline::Test t;
  t.input_prompt = prompt;
  t.reference_answer = "4";
  t.judge_template = JudgeTemplate::T1;
  t.judge_guidelines = {"1. The answer must be 4."};
  return t;
}

Feedback feedback(const std::string& id, const std::string& input = "bad answer") {
  Feedback f;
  f.id = FeedbackId{id};
  f.user_input = input;
  f.model_output = "5";
  f.source_model = "m";
  f.received_at = *parse_timestamp("2026-02-01T00:00:00.000Z");
  return f;
}

TEST(Issues, CreateAndFilterByDomain) {
  Repository repo;
  const auto geo = repo.create_issue(draft("Math - Geometry", "Math"));
  repo.create_issue(draft("Code - Generation", "Code"));
  IssueFilter f;
  f.tags = {Tag{TagKind::Domain, "Math"}};
  const auto found = repo.list_issues(f);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].id, geo.id);
  EXPECT_EQ(repo.get_issue(geo.id).title, "Math - Geometry");
}

TEST(Issues, TextFilterIsCaseInsensitive) {
  Repository repo;
  repo.create_issue(draft("Math - Geometry", "Math"));
  IssueFilter f;
  f.text = "GEOMETRY wrong";
  EXPECT_EQ(repo.list_issues(f).size(), 1u);
  f.text = "algebra";
  EXPECT_TRUE(repo.list_issues(f).empty());
}

TEST(Issues, ValidationAndUnknownIds) {
  Repository repo;
  EXPECT_THROW(repo.create_issue(draft("x", "Chemistry")), ValidationFailed);
  IssuePatch p;
  p.title = "new";
  EXPECT_THROW(repo.update_issue(IssueId{"nope"}, p), UnknownId);
  EXPECT_THROW(repo.get_issue(IssueId{"nope"}), UnknownId);
  repo.register_domain("Chemistry");
  EXPECT_NO_THROW(repo.create_issue(draft("x", "Chemistry")));
}

TEST(Issues, StatusChangesAreAudited) {
  Repository repo;
  const auto i = repo.create_issue(draft("Math - Geometry", "Math"));
  IssuePatch p;
  p.status = IssueStatus::Resolved;
  const auto r = repo.update_issue(i.id, p);
  EXPECT_EQ(r.status, IssueStatus::Resolved);
  EXPECT_EQ(r.status_history.size(), i.status_history.size() + 1);
}

TEST(Issues, SoftDeleteHidesIssue) {
  Repository repo;
  const auto i = repo.create_issue(draft("Math - Geometry", "Math"));
  const auto d = repo.delete_issue(i.id);
  EXPECT_EQ(d.status, IssueStatus::WontFix);
  EXPECT_TRUE(d.hidden);
  EXPECT_TRUE(repo.list_issues().empty());
  IssueFilter all;
  all.include_hidden = true;
  EXPECT_EQ(repo.list_issues(all).size(), 1u);
  EXPECT_NO_THROW(repo.get_issue(i.id));
}

TEST(Tests, AddSecondTestToIssue) {
  Repository repo;
  const auto i = repo.create_issue(draft("Math - Geometry", "Math"));
  repo.add_test(i.id, test_draft("Area of a 3 by 4 rectangle?"));
  repo.add_test(i.id, test_draft("Area of a circle with radius 2?"));
  EXPECT_EQ(repo.list_tests({}, i.id).size(), 2u);
}

TEST(Tests, EmptyGuidelinesRejected) {
  Repository repo;
  const auto i = repo.create_issue(draft("Math - Geometry", "Math"));
  auto t = test_draft();
  t.judge_guidelines.clear();
  EXPECT_THROW(repo.add_test(i.id, t), ValidationFailed);
  EXPECT_THROW(repo.add_test(IssueId{"nope"}, test_draft()), UnknownId);
}

TEST(Tests, GuidelinesInheritedFromSibling) {
  Repository repo;
  const auto i = repo.create_issue(draft("Math - Geometry", "Math"));
  auto first = test_draft();
  first.judge_guidelines = {"1. Use the correct formula.", "2. Simplest form."};
  const auto a = repo.add_test(i.id, first);
  auto second = test_draft("Another?");
  second.judge_guidelines.clear();
  const auto b = repo.add_test(i.id, second, a.id);
  EXPECT_EQ(b.judge_guidelines, first.judge_guidelines);

  const auto other = repo.create_issue(draft("Code - Generation", "Code"));
  auto third = test_draft();
  third.judge_guidelines.clear();
  EXPECT_THROW(repo.add_test(other.id, third, a.id), ValidationFailed);
}

TEST(Feedback, AttachIsIdempotent) {
  Repository repo;
  const auto i = repo.create_issue(draft("Math - Geometry", "Math"));
  repo.attach_feedback(i.id, feedback("fb-1"));
  const auto again = repo.attach_feedback(i.id, feedback("fb-1"));
  EXPECT_EQ(again.feedback_ids, std::vector<FeedbackId>{FeedbackId{"fb-1"}});
  EXPECT_THROW(repo.attach_feedback(i.id, feedback("fb-1", "different text")), Conflict);
  EXPECT_EQ(repo.get_feedback(FeedbackId{"fb-1"}).user_input, "bad answer");
}

TEST(Seed, ImportsShippedBundle) {
  Repository repo;
  const auto counts = repo.import_seed(testkit::seed_bundle());
  EXPECT_EQ(counts.issues, 20);
  EXPECT_EQ(counts.tests, 20);
  EXPECT_EQ(repo.list_tests().size(), 20u);
  IssueFilter resolved;
  resolved.status = IssueStatus::Resolved;
  EXPECT_TRUE(repo.list_issues(resolved).empty());
  IssueFilter math;
  math.tags = {Tag{TagKind::Domain, "Math"}};
  EXPECT_EQ(repo.list_issues(math).size(), 4u);
}

TEST(Seed, ReimportRejectedUnlessReplace) {
  Repository repo;
  repo.import_seed(testkit::seed_bundle());
  const auto rev = repo.revision();
  EXPECT_THROW(repo.import_seed(testkit::seed_bundle()), DuplicateId);
  EXPECT_EQ(repo.revision(), rev);
  EXPECT_EQ(repo.import_seed(testkit::seed_bundle(), true).issues, 20);
  EXPECT_EQ(repo.list_issues().size(), 20u);
}

TEST(Seed, DuplicateIdsImportNothing) {
  Repository repo;
  json bundle = testkit::seed_bundle();
  bundle["issues"][5]["id"] = bundle["issues"][2]["id"];
  EXPECT_THROW(repo.import_seed(bundle), DuplicateId);
  EXPECT_EQ(repo.revision(), 0);
  EXPECT_TRUE(repo.list_issues().empty());
  EXPECT_TRUE(repo.list_tests().empty());
}

TEST(Seed, T2WithoutReferenceNamesTheTest) {
  Repository repo;
  json bundle = testkit::seed_bundle();
  for (auto& issue : bundle["issues"]) {
    auto& t = issue["tests"][0];
    if (t["judge_template"] == "T2") {
      t.erase("reference_answer");
      break;
    }
  }
  try {
    repo.import_seed(bundle);
    FAIL() << "expected ValidationFailed";
  } catch (const ValidationFailed& e) {
    EXPECT_NE(e.record().find("test-05"), std::string::npos);
    EXPECT_EQ(e.violations().at(0).rule, "T2 requires reference_answer");
  }
  EXPECT_TRUE(repo.list_issues().empty());
}

TEST(Seed, ExportImportPreservesContent) {
  Repository a;
  a.import_seed(testkit::seed_bundle());
  const json exported = a.export_seed();
  Repository b;
  const auto counts = b.import_seed(exported);
  EXPECT_EQ(counts.issues, 20);
  EXPECT_EQ(counts.feedback, 5);
  EXPECT_EQ(b.export_seed(), exported);
  EXPECT_EQ(a.list_tests(), b.list_tests());
}

TEST(Storage, ReopenRestoresState) {
  TempDir dir;
  json listing;
  std::int64_t rev = 0;
  {
    Repository repo(dir.path());
    repo.import_seed(testkit::seed_bundle());
    const auto i = repo.create_issue(draft("Math - Geometry", "Math"));
    repo.add_test(i.id, test_draft());
    listing = repo.export_seed();
    rev = repo.revision();
  }
  Repository again(dir.path());
  EXPECT_EQ(again.export_seed(), listing);
  EXPECT_EQ(again.revision(), rev);
}

TEST(Storage, TornTailIsDiscarded) {
  TempDir dir;
  {
    Repository repo(dir.path());
    repo.create_issue(draft("Math - Geometry", "Math"));
  }
  {
    std::ofstream j(dir / "journal.jsonl", std::ios::app | std::ios::binary);
    j << R"({"rev":2,"ops":[{"c":"issues","doc":{"id":"half)";
  }
  {
    Repository repo(dir.path());
    EXPECT_EQ(repo.list_issues().size(), 1u);
    EXPECT_EQ(repo.revision(), 1);
    repo.create_issue(draft("Code - Generation", "Code"));
  }
  Repository repo(dir.path());
  EXPECT_EQ(repo.list_issues().size(), 2u);
  EXPECT_EQ(repo.revision(), 2);
}

TEST(Storage, CorruptMiddleLineIsReported) {
  TempDir dir;
  {
    Repository repo(dir.path());
    repo.create_issue(draft("Math - Geometry", "Math"));
  }
  const auto text = testkit::read_file(dir / "journal.jsonl");
  {
    std::ofstream j(dir / "journal.jsonl", std::ios::trunc | std::ios::binary);
    j << "garbage\n" << text;
  }
  EXPECT_THROW(Repository{dir.path()}, StorageUnavailable);
}

TEST(Storage, KillDuringWritesLeavesWholeCommits) {
  std::mt19937 rng(5);
  for (int round = 0; round < 4; ++round) {
    TempDir dir;
    const pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
      Repository repo(dir.path());
      for (int n = 0;; ++n) {
        json issue = {{"id", "i" + std::to_string(n)},
                      {"title", "t"},
                      {"description", "d"},
                      {"tags", {"domain:Math"}},
                      {"tests", json::array()}};
        for (int k = 0; k < 3; ++k) {
          issue["tests"].push_back({{"id", "t" + std::to_string(n) + "-" + std::to_string(k)},
                                    {"input_prompt", "p"},
                                    {"judge_template", "T3"},
                                    {"judge_guidelines", {"g"}}});
        }
        repo.import_seed(json{{"format_version", 1}, {"issues", {issue}}});
      }
      ::_exit(0);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(std::uniform_int_distribution<int>(40, 200)(rng)));
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);

    Repository repo(dir.path());
    const auto issues = repo.list_issues();
    EXPECT_GT(issues.size(), 0u);
    for (const auto& i : issues) EXPECT_EQ(repo.list_tests({}, i.id).size(), 3u) << i.id.str();
    EXPECT_EQ(repo.list_tests().size(), issues.size() * 3);
  }
}

TEST(Storage, CompactionKeepsState) {
  TempDir dir;
  json before;
  {
    Repository repo(dir.path());
    const auto i = repo.create_issue(draft("Math - Geometry", "Math"));
    for (int n = 0; n < 2100; ++n) repo.add_test(i.id, test_draft("q" + std::to_string(n)));
    EXPECT_TRUE(std::filesystem::exists(dir / "snapshot.json"));
    before = repo.export_seed();
  }
  Repository repo(dir.path());
  EXPECT_EQ(repo.export_seed(), before);
  EXPECT_EQ(repo.revision(), 2101);
  repo.compact();
  EXPECT_EQ(std::filesystem::file_size(dir / "journal.jsonl"), 0u);
}

TEST(Storage, WriteFailureChangesNothing) {
  TempDir dir;
  {
    Repository repo(dir.path());
    repo.create_issue(draft("Math - Geometry", "Math"));
    repo.inject_write_failure(true);
    EXPECT_THROW(repo.create_issue(draft("Code - Generation", "Code")), StorageUnavailable);
    EXPECT_EQ(repo.list_issues().size(), 1u);
    repo.inject_write_failure(false);
    repo.create_issue(draft("Code - Generation", "Code"));
  }
  Repository again(dir.path());
  EXPECT_EQ(again.list_issues().size(), 2u);
}

TEST(Storage, DataDirHasOneOwner) {
  TempDir dir;
  {
    Repository first(dir.path());
    EXPECT_THROW(Repository{dir.path()}, StorageUnavailable);
  }
  EXPECT_NO_THROW(Repository{dir.path()});
}

TEST(Storage, ListingsAreDeterministic) {
  Repository repo;
  repo.import_seed(testkit::seed_bundle());
  EXPECT_EQ(repo.list_issues(), repo.list_issues());
  EXPECT_EQ(repo.list_tests(), repo.list_tests());
  const auto issues = repo.list_issues();
  EXPECT_EQ(issues.front().title, "Code - Fixing/Modifying");
  EXPECT_EQ(issues.back().title, "Underspecified - List + Time");
}

// A run with two results, one overridden.
RunId make_completed_run(Repository& repo) {
  const auto tests = repo.list_tests();
  TestRun run;
  run.target.base_url = "http://127.0.0.1:9";
  run.target.model_name = "target";
  run.judges = {run.target};
  run.judges[0].model_name = "judge";
  run.test_ids = {tests[0].id, tests[1].id};
  run.tests = {tests[0], tests[1]};
  run.status = RunStatus::Running;
  run = repo.create_run(run);
  for (int k = 0; k < 2; ++k) {
    TestResult r;
    r.run_id = run.id;
    r.test_id = run.test_ids[k];
    r.model_output = "OK";
    r.verdicts = {testkit::valid_verdict(k)};
    r.mean_score = k;
    r.determination = k ? Determination::Pass : Determination::Fail;
    repo.persist_result(r);
  }
  run = repo.get_run(run.id);
  run.status = RunStatus::Completed;
  run.finished_at = now();
  repo.update_run(run);
  return run.id;
}

TEST(Runs, ResultsAndOverrides) {
  Repository repo;
  repo.import_seed(testkit::seed_bundle());
  const RunId id = make_completed_run(repo);
  const auto run = repo.get_run(id);
  EXPECT_EQ(run.result_ids.size(), 2u);
  EXPECT_EQ(run.progress, (RunProgress{2, 2, 2, 0}));

  const auto results = repo.results_for_run(id);
  TestResult dup = results[0];
  dup.id = ResultId{};
  EXPECT_THROW(repo.persist_result(dup), Conflict);

  const auto failed = results[0];
  EXPECT_EQ(failed.determination, Determination::Fail);
  auto o = repo.set_override(failed.id, HumanOverride{1, "reference itself was wrong", "ann", now()});
  EXPECT_EQ(o.determination, Determination::Pass);
  o = repo.set_override(failed.id, HumanOverride{0, "second look", "ann2", now()});
  EXPECT_EQ(o.determination, Determination::Fail);
  EXPECT_EQ(o.override_history.size(), 2u);
  EXPECT_EQ(o.override_->annotator, "ann2");
  EXPECT_EQ(o.verdicts, failed.verdicts);
  EXPECT_THROW(repo.set_override(failed.id, HumanOverride{1, "", "ann", now()}), ValidationFailed);
}

TEST(Runs, InferenceRecordIsWrittenOnce) {
  Repository repo;
  repo.import_seed(testkit::seed_bundle());
  const RunId id = make_completed_run(repo);
  InferenceRecord rec{id, repo.get_run(id).test_ids[0], "OK", 3, 1, now()};
  repo.put_inference(rec);
  EXPECT_THROW(repo.put_inference(rec), Conflict);
  EXPECT_EQ(repo.get_inference(id, rec.test_id)->model_output, "OK");
}

TEST(Runs, ExportIsByteIdenticalAndReimportable) {
  TempDir dir;
  Repository repo;
  repo.import_seed(testkit::seed_bundle());
  const RunId id = make_completed_run(repo);
  repo.export_run_to_file(id, dir / "a.json");
  repo.export_run_to_file(id, dir / "b.json");
  EXPECT_EQ(testkit::read_file(dir / "a.json"), testkit::read_file(dir / "b.json"));
  repo.export_run_to_file(id, dir / "c.json.gz");

  Repository other;
  const RunId imported = other.import_run_from_file(dir / "c.json.gz");
  EXPECT_EQ(imported, id);
  EXPECT_EQ(other.export_run(imported), repo.export_run(id));

  const RunId copy = repo.import_run_from_file(dir / "a.json");
  EXPECT_NE(copy, id);
  EXPECT_EQ(repo.get_run(copy).imported_from, id.str());
  EXPECT_EQ(repo.results_for_run(copy).size(), 2u);
  EXPECT_THROW(repo.export_run(RunId{"nope"}), UnknownId);
  EXPECT_THROW(repo.export_run_to_file(id, dir / "missing" / "x.json"), IoError);
}

TEST(Integrity, RandomOperationSequences) {
  std::mt19937 rng(17);
  Repository repo;
  std::vector<IssueId> issues;
  std::vector<TestId> tests;
  for (int step = 0; step < 600; ++step) {
    const int op = std::uniform_int_distribution<int>(0, 5)(rng);
    try {
      if (op == 0 || issues.empty()) {
        issues.push_back(repo.create_issue(draft("issue " + std::to_string(step), "Math")).id);
      } else if (op == 1) {
        // Sometimes target an issue that does not exist.
        const bool dangling = std::uniform_int_distribution<int>(0, 4)(rng) == 0;
        const IssueId target = dangling ? IssueId{"ghost"} : issues[rng() % issues.size()];
        tests.push_back(repo.add_test(target, test_draft()).id);
      } else if (op == 2) {
        repo.attach_feedback(issues[rng() % issues.size()], feedback("fb-" + std::to_string(rng() % 50)));
      } else if (op == 3 && !tests.empty()) {
        repo.delete_test(tests[rng() % tests.size()]);
      } else if (op == 4) {
        repo.delete_issue(issues[rng() % issues.size()]);
      } else {
        auto t = test_draft();
        t.judge_guidelines.clear();
        repo.add_test(issues[rng() % issues.size()], t);
      }
    } catch (const UnknownId&) {
    } catch (const ValidationFailed&) {
    } catch (const Conflict&) {
    }
  }
  const auto snap = repo.snapshot();
  for (const auto& [id, t] : snap->tests) ASSERT_TRUE(snap->issues.contains(t.issue_id)) << id.str();
  for (const auto& [id, i] : snap->issues) {
    for (const auto& f : i.feedback_ids) ASSERT_TRUE(snap->feedback.contains(f)) << id.str();
  }
}

}  // namespace
}  // namespace gradeline
