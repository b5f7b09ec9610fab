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

#ifndef GRADELINE_DOMAIN_HPP_
#define GRADELINE_DOMAIN_HPP_

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gradeline/errors.hpp"
#include "gradeline/ids.hpp"

namespace gradeline {

enum class IssueStatus { Open, Monitoring, Resolved, WontFix };
enum class TagKind { Domain, TaskType, Custom };
enum class FeedbackSignal { ThumbsDown, ThumbsUp, Note };
enum class JudgeTemplate { T1, T2, T3 };
enum class Provider { OpenAICompatible, Ollama };
enum class RunStatus { Pending, Running, Completed, Failed };
enum class Validity { Valid, Invalid };
enum class Determination { Pass, Fail, Undetermined, InferenceError, SelectionError };

std::string_view to_string(IssueStatus v);
std::string_view to_string(TagKind v);
std::string_view to_string(FeedbackSignal v);
std::string_view to_string(JudgeTemplate v);
std::string_view to_string(Provider v);
std::string_view to_string(RunStatus v);
std::string_view to_string(Validity v);
std::string_view to_string(Determination v);

std::optional<IssueStatus> parse_issue_status(std::string_view s);
std::optional<TagKind> parse_tag_kind(std::string_view s);
std::optional<FeedbackSignal> parse_feedback_signal(std::string_view s);
std::optional<JudgeTemplate> parse_judge_template(std::string_view s);
std::optional<Provider> parse_provider(std::string_view s);
std::optional<RunStatus> parse_run_status(std::string_view s);
std::optional<Determination> parse_determination(std::string_view s);

struct Tag {
  TagKind kind = TagKind::Domain;
  std::string value;

  auto operator<=>(const Tag&) const = default;
  bool operator==(const Tag&) const = default;
};

// "kind:value" or a bare value, which is read as a domain tag.
Tag parse_tag(std::string_view text);
std::string format_tag(const Tag& tag);

// Domain vocabulary every store starts with.
const std::vector<std::string>& default_domains();

struct StatusChange {
  IssueStatus from = IssueStatus::Open;
  IssueStatus to = IssueStatus::Open;
  Timestamp at;
  bool operator==(const StatusChange&) const = default;
};

struct Issue {
  IssueId id;
  std::string title;
  std::string description;
  IssueStatus status = IssueStatus::Open;
  std::set<Tag> tags;
  std::vector<FeedbackId> feedback_ids;
  Timestamp created_at;
  Timestamp updated_at;
  std::vector<StatusChange> status_history;
  bool hidden = false;

  std::vector<std::string> domains() const;
  bool operator==(const Issue&) const = default;
};

struct Feedback {
  FeedbackId id;
  std::string user_input;
  std::string model_output;
  FeedbackSignal signal = FeedbackSignal::ThumbsDown;
  std::string source_model;
  Timestamp received_at;
  bool operator==(const Feedback&) const = default;
};

struct Test {
  TestId id;
  IssueId issue_id;
  std::string input_prompt;
  std::optional<std::string> reference_answer;
  JudgeTemplate judge_template = JudgeTemplate::T1;
  std::vector<std::string> judge_guidelines;
  Timestamp created_at;
  bool deleted = false;
  bool operator==(const Test&) const = default;
};

struct GenerationParams {
  double temperature = 0.0;
  std::int64_t max_tokens = 1024;
  std::optional<std::int64_t> seed;
  bool operator==(const GenerationParams&) const = default;
};

struct ModelRef {
  Provider provider = Provider::OpenAICompatible;
  std::string base_url;
  std::string model_name;
  GenerationParams params;

  // Stable identity used in verdicts and comparisons: "provider:model@url".
  std::string identity() const;
  bool operator==(const ModelRef&) const = default;
};

struct TestSelection {
  std::set<Tag> tags;
  std::set<TestId> test_ids;
  std::set<IssueId> issue_ids;

  bool empty() const { return tags.empty() && test_ids.empty() && issue_ids.empty(); }
  bool operator==(const TestSelection&) const = default;
};

struct RunProgress {
  std::int64_t total = 0;
  std::int64_t inferred = 0;
  std::int64_t judged = 0;
  std::int64_t errored = 0;

  bool done() const { return judged + errored == total; }
  bool operator==(const RunProgress&) const = default;
};

// Issue metadata frozen into a run at launch so reports stay stable when the
// live issue is edited later.
struct IssueSnapshot {
  IssueId id;
  std::string title;
  std::set<Tag> tags;
  bool operator==(const IssueSnapshot&) const = default;
};

struct TestRun {
  RunId id;
  ModelRef target;
  std::vector<ModelRef> judges;
  TestSelection selection;
  RunStatus status = RunStatus::Pending;
  Timestamp created_at;
  std::optional<Timestamp> started_at;
  std::optional<Timestamp> finished_at;
  std::vector<TestId> test_ids;
  std::vector<Test> tests;
  std::vector<IssueSnapshot> issues;
  std::vector<ResultId> result_ids;
  RunProgress progress;
  std::optional<std::string> failure_reason;
  std::optional<std::string> imported_from;
  bool operator==(const TestRun&) const = default;
};

struct JudgeVerdict {
  std::string judge_model;
  std::optional<int> score;
  std::string justification;
  std::string raw_reply;
  Validity validity = Validity::Invalid;
  std::optional<std::string> invalid_reason;

  bool valid() const { return validity == Validity::Valid; }
  bool operator==(const JudgeVerdict&) const = default;
};

struct HumanOverride {
  int score = 0;
  std::string justification;
  std::string annotator;
  Timestamp created_at;
  bool operator==(const HumanOverride&) const = default;
};

struct TestResult {
  ResultId id;
  RunId run_id;
  TestId test_id;
  std::string model_output;
  std::vector<JudgeVerdict> verdicts;
  std::optional<double> mean_score;
  Determination determination = Determination::Undetermined;
  std::optional<HumanOverride> override_;
  std::vector<HumanOverride> override_history;
  std::optional<std::string> error;
  Timestamp created_at;

  // Override score if present, else the ensemble mean.
  std::optional<double> effective_score() const;
  bool operator==(const TestResult&) const = default;
};

// Target output persisted as soon as it arrives, before judging, so a resumed
// run never asks the target model twice for the same test.
struct InferenceRecord {
  RunId run_id;
  TestId test_id;
  std::string model_output;
  std::int64_t latency_ms = 0;
  std::int64_t attempt_count = 1;
  Timestamp created_at;
  bool operator==(const InferenceRecord&) const = default;
};

struct ValidationOutcome {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationOutcome validate_test(const Test& test);
ValidationOutcome validate_issue(const Issue& issue, const std::set<std::string>& domains);
ValidationOutcome validate_feedback(const Feedback& feedback);
ValidationOutcome validate_model(const ModelRef& model);
ValidationOutcome validate_override(const HumanOverride& o);
ValidationOutcome validate_verdict(const JudgeVerdict& v);

// Any status may follow any other; the change is appended to the audit trail.
Issue transition_issue_status(Issue issue, IssueStatus next, Timestamp at);
// Throws ValidationFailed for a status name outside the vocabulary.
Issue transition_issue_status(Issue issue, std::string_view next, Timestamp at);

// The pass rule shared by the judge engine and stored results.
//   override present        -> pass iff override score is 1
//   no valid verdicts       -> undetermined
//   otherwise               -> pass iff mean > 0.5 (0.5 itself fails)
Determination determine(std::optional<double> mean_score, std::size_t valid_count,
                        const std::optional<HumanOverride>& override_);

}  // namespace gradeline

#endif  // GRADELINE_DOMAIN_HPP_
