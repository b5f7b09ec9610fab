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

#ifndef GRADELINE_REPOSITORY_HPP_
#define GRADELINE_REPOSITORY_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "gradeline/codec.hpp"
#include "gradeline/domain.hpp"

namespace gradeline {

struct StoreState {
  std::map<IssueId, Issue> issues;
  std::map<FeedbackId, Feedback> feedback;
  std::map<TestId, Test> tests;
  std::map<RunId, TestRun> runs;
  std::map<ResultId, TestResult> results;
  std::map<std::pair<RunId, TestId>, ResultId> result_index;
  std::map<std::pair<RunId, TestId>, InferenceRecord> inferences;
  std::set<std::string> domains;
  std::int64_t revision = 0;
};

struct IssueDraft {
  std::optional<IssueId> id;
  std::string title;
  std::string description;
  std::set<Tag> tags;
  IssueStatus status = IssueStatus::Open;
};

struct IssuePatch {
  std::optional<std::string> title;
  std::optional<std::string> description;
  std::optional<std::set<Tag>> tags;
  std::optional<IssueStatus> status;
  std::optional<bool> hidden;
};

struct IssueFilter {
  std::set<Tag> tags;  // any-of; empty means no constraint
  std::optional<IssueStatus> status;
  std::string text;    // case-insensitive substring of title + description
  bool include_hidden = false;
};

struct SeedCounts {
  std::int64_t issues = 0;
  std::int64_t tests = 0;
  std::int64_t feedback = 0;
  bool operator==(const SeedCounts&) const = default;
};

inline constexpr int kSeedFormatVersion = 1;
inline constexpr int kRunExportFormatVersion = 1;

// Durable store for every collection. Writes are serialized and written to an
// append-only journal before they become visible; each journal line is one
// commit and carries every document the commit touches, so multi-document
// writes such as a seed import are all-or-nothing. Reads see whole commits.
//
// An empty data_dir gives a purely in-memory store.
class Repository {
 public:
  explicit Repository(std::filesystem::path data_dir = {});
  ~Repository();
  Repository(const Repository&) = delete;
  Repository& operator=(const Repository&) = delete;

  const std::filesystem::path& data_dir() const { return dir_; }
  std::int64_t revision() const;
  // Deep copy of the current state at a commit boundary.
  std::shared_ptr<const StoreState> snapshot() const;

  std::set<std::string> domains() const;
  void register_domain(const std::string& domain);

  Issue create_issue(const IssueDraft& draft);
  Issue update_issue(const IssueId& id, const IssuePatch& patch);
  Issue get_issue(const IssueId& id) const;
  std::vector<Issue> list_issues(const IssueFilter& filter = {}) const;
  // Soft delete: wontfix + hidden. Tests stay in place for historical runs.
  Issue delete_issue(const IssueId& id);

  // `inherit_from` seeds empty guidelines from a sibling test of the same issue.
  Test add_test(const IssueId& issue_id, Test draft, const std::optional<TestId>& inherit_from = {});
  Test get_test(const TestId& id) const;
  std::vector<Test> list_tests(const std::set<Tag>& tags = {}, const std::optional<IssueId>& issue = {},
                               bool include_deleted = false) const;
  Test delete_test(const TestId& id);

  // Idempotent per feedback id; re-attaching different content is a Conflict.
  Issue attach_feedback(const IssueId& issue_id, Feedback feedback);
  Feedback get_feedback(const FeedbackId& id) const;

  SeedCounts import_seed(const json& bundle, bool replace = false);
  json export_seed() const;

  TestRun create_run(TestRun run);
  TestRun update_run(const TestRun& run);
  // Fills result_ids and progress from the stored results.
  TestRun get_run(const RunId& id) const;
  std::vector<TestRun> list_runs() const;

  void put_inference(const InferenceRecord& record);
  std::optional<InferenceRecord> get_inference(const RunId& run, const TestId& test) const;

  // One result per (run, test); a second one is a Conflict.
  TestResult persist_result(TestResult result);
  TestResult get_result(const ResultId& id) const;
  std::optional<TestResult> result_for(const RunId& run, const TestId& test) const;
  // In the run's test order.
  std::vector<TestResult> results_for_run(const RunId& run) const;
  TestResult set_override(const ResultId& id, HumanOverride override_);

  // Self-contained document: run (with tests and issue metadata as of launch)
  // plus all results. Stable key order, so repeated exports are identical.
  json export_run(const RunId& id) const;
  // Writes export_run() to `path`, gzip-compressed when the name ends in ".gz".
  void export_run_to_file(const RunId& id, const std::filesystem::path& path) const;
  // Keeps the exported run id unless taken, otherwise assigns a fresh one and
  // records the original in imported_from.
  RunId import_run(const json& document);
  RunId import_run_from_file(const std::filesystem::path& path);

  // Folds the journal into snapshot.json.
  void compact();
  // Makes every later write fail with StorageUnavailable (fault injection).
  void inject_write_failure(bool fail);

 private:
  struct Op {
    std::string collection;
    json doc;
  };

  void load();
  // Caller holds commit_mu_.
  void commit(std::vector<Op> ops);
  void compact_locked();
  static void apply(StoreState& state, const Op& op);
  RunProgress progress_locked(const StoreState& s, const TestRun& run) const;

  std::filesystem::path dir_;
  int journal_fd_ = -1;
  int lock_fd_ = -1;
  std::int64_t journal_commits_ = 0;
  bool fail_writes_ = false;

  std::mutex commit_mu_;
  mutable std::shared_mutex state_mu_;
  StoreState state_;
};

json read_json_file(const std::filesystem::path& path);

}  // namespace gradeline

#endif  // GRADELINE_REPOSITORY_HPP_
