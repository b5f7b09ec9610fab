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

#include "gradeline/domain.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

namespace gradeline {

ValidationFailed::ValidationFailed(std::vector<Violation> violations, std::string record)
    : Error([&] {
        std::string msg = "validation failed";
        if (!record.empty()) msg += " for " + record;
        for (const auto& v : violations) msg += "; " + v.field + ": " + v.rule;
        return msg;
      }()),
      violations_(std::move(violations)),
      record_(std::move(record)) {}

namespace {

template <class E, std::size_t N>
using Names = std::array<std::pair<E, std::string_view>, N>;

constexpr Names<IssueStatus, 4> kIssueStatus{{{IssueStatus::Open, "open"},
                                              {IssueStatus::Monitoring, "monitoring"},
                                              {IssueStatus::Resolved, "resolved"},
                                              {IssueStatus::WontFix, "wontfix"}}};
constexpr Names<TagKind, 3> kTagKind{
    {{TagKind::Domain, "domain"}, {TagKind::TaskType, "task_type"}, {TagKind::Custom, "custom"}}};
constexpr Names<FeedbackSignal, 3> kSignal{{{FeedbackSignal::ThumbsDown, "thumbs_down"},
                                            {FeedbackSignal::ThumbsUp, "thumbs_up"},
                                            {FeedbackSignal::Note, "note"}}};
constexpr Names<JudgeTemplate, 3> kTemplate{
    {{JudgeTemplate::T1, "T1"}, {JudgeTemplate::T2, "T2"}, {JudgeTemplate::T3, "T3"}}};
constexpr Names<Provider, 2> kProvider{
    {{Provider::OpenAICompatible, "openai_compatible"}, {Provider::Ollama, "ollama"}}};
constexpr Names<RunStatus, 4> kRunStatus{{{RunStatus::Pending, "pending"},
                                          {RunStatus::Running, "running"},
                                          {RunStatus::Completed, "completed"},
                                          {RunStatus::Failed, "failed"}}};
constexpr Names<Validity, 2> kValidity{{{Validity::Valid, "valid"}, {Validity::Invalid, "invalid"}}};
constexpr Names<Determination, 5> kDetermination{{{Determination::Pass, "pass"},
                                                  {Determination::Fail, "fail"},
                                                  {Determination::Undetermined, "undetermined"},
                                                  {Determination::InferenceError, "inference_error"},
                                                  {Determination::SelectionError, "selection_error"}}};

template <class E, std::size_t N>
std::string_view name_of(const Names<E, N>& names, E v) {
  for (const auto& [e, n] : names) {
    if (e == v) return n;
  }
  return "?";
}

template <class E, std::size_t N>
std::optional<E> parse_name(const Names<E, N>& names, std::string_view s) {
  for (const auto& [e, n] : names) {
    if (n == s) return e;
  }
  return std::nullopt;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string_view to_string(IssueStatus v) { return name_of(kIssueStatus, v); }
std::string_view to_string(TagKind v) { return name_of(kTagKind, v); }
std::string_view to_string(FeedbackSignal v) { return name_of(kSignal, v); }
std::string_view to_string(JudgeTemplate v) { return name_of(kTemplate, v); }
std::string_view to_string(Provider v) { return name_of(kProvider, v); }
std::string_view to_string(RunStatus v) { return name_of(kRunStatus, v); }
std::string_view to_string(Validity v) { return name_of(kValidity, v); }
std::string_view to_string(Determination v) { return name_of(kDetermination, v); }

std::optional<IssueStatus> parse_issue_status(std::string_view s) { return parse_name(kIssueStatus, s); }
std::optional<TagKind> parse_tag_kind(std::string_view s) { return parse_name(kTagKind, s); }
std::optional<FeedbackSignal> parse_feedback_signal(std::string_view s) { return parse_name(kSignal, s); }
std::optional<JudgeTemplate> parse_judge_template(std::string_view s) { return parse_name(kTemplate, s); }
std::optional<Provider> parse_provider(std::string_view s) { return parse_name(kProvider, s); }
std::optional<RunStatus> parse_run_status(std::string_view s) { return parse_name(kRunStatus, s); }
std::optional<Determination> parse_determination(std::string_view s) {
  return parse_name(kDetermination, s);
}

Tag parse_tag(std::string_view text) {
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    if (auto kind = parse_tag_kind(text.substr(0, colon))) {
      return Tag{*kind, std::string(text.substr(colon + 1))};
    }
  }
  return Tag{TagKind::Domain, std::string(text)};
}

std::string format_tag(const Tag& tag) {
  return std::string(to_string(tag.kind)) + ":" + tag.value;
}

const std::vector<std::string>& default_domains() {
  static const std::vector<std::string> kDomains{
      "Code", "Creative", "Factual", "Instruction Following", "Math",
      "Multilingual", "Reasoning", "Summarization", "Table", "Underspecified"};
  return kDomains;
}

std::vector<std::string> Issue::domains() const {
  std::vector<std::string> out;
  for (const auto& t : tags) {
    if (t.kind == TagKind::Domain) out.push_back(t.value);
  }
  return out;
}

std::string ModelRef::identity() const {
  return std::string(to_string(provider)) + ":" + model_name + "@" + base_url;
}

std::optional<double> TestResult::effective_score() const {
  if (override_) return static_cast<double>(override_->score);
  return mean_score;
}

ValidationOutcome validate_test(const Test& test) {
  ValidationOutcome out;
  if (test.issue_id.empty()) out.violations.push_back({"issue_id", "test must belong to an issue"});
  if (blank(test.input_prompt)) out.violations.push_back({"input_prompt", "must be non-empty"});
  if (test.judge_guidelines.empty()) {
    out.violations.push_back({"judge_guidelines", "must contain at least one line"});
  }
  for (std::size_t i = 0; i < test.judge_guidelines.size(); ++i) {
    if (blank(test.judge_guidelines[i])) {
      out.violations.push_back(
          {"judge_guidelines[" + std::to_string(i) + "]", "guideline lines must be non-empty"});
    }
  }
  if (test.judge_template != JudgeTemplate::T3 &&
      (!test.reference_answer || blank(*test.reference_answer))) {
    out.violations.push_back(
        {"reference_answer", std::string(to_string(test.judge_template)) + " requires reference_answer"});
  }
  return out;
}

ValidationOutcome validate_issue(const Issue& issue, const std::set<std::string>& domains) {
  ValidationOutcome out;
  if (blank(issue.title)) out.violations.push_back({"title", "must be non-empty"});
  if (blank(issue.description)) out.violations.push_back({"description", "must be non-empty"});
  bool has_domain = false;
  for (const auto& t : issue.tags) {
    if (blank(t.value)) {
      out.violations.push_back({"tags", "tag value must be non-empty"});
      continue;
    }
    if (t.kind == TagKind::Domain) {
      has_domain = true;
      if (!domains.contains(t.value)) {
        out.violations.push_back({"tags", "unknown domain '" + t.value + "'"});
      }
    }
  }
  if (!has_domain) out.violations.push_back({"tags", "at least one domain tag required"});
  return out;
}

ValidationOutcome validate_feedback(const Feedback& feedback) {
  ValidationOutcome out;
  if (feedback.id.empty()) out.violations.push_back({"id", "must be non-empty"});
  if (blank(feedback.user_input)) out.violations.push_back({"user_input", "must be non-empty"});
  return out;
}

ValidationOutcome validate_model(const ModelRef& model) {
  ValidationOutcome out;
  if (blank(model.model_name)) out.violations.push_back({"model_name", "must be non-empty"});
  if (blank(model.base_url)) out.violations.push_back({"base_url", "must be non-empty"});
  if (!(model.params.temperature >= 0.0)) out.violations.push_back({"temperature", "must be >= 0"});
  if (model.params.max_tokens <= 0) out.violations.push_back({"max_tokens", "must be positive"});
  return out;
}

ValidationOutcome validate_override(const HumanOverride& o) {
  ValidationOutcome out;
  if (o.score != 0 && o.score != 1) out.violations.push_back({"score", "must be 0 or 1"});
  if (blank(o.justification)) out.violations.push_back({"justification", "must be non-empty"});
  return out;
}

ValidationOutcome validate_verdict(const JudgeVerdict& v) {
  ValidationOutcome out;
  const bool score_ok = v.score && (*v.score == 0 || *v.score == 1);
  if (v.valid()) {
    if (!score_ok) out.violations.push_back({"score", "valid verdict needs score in {0,1}"});
    if (v.invalid_reason) out.violations.push_back({"invalid_reason", "valid verdict has no reason"});
  } else if (!v.invalid_reason) {
    out.violations.push_back({"invalid_reason", "invalid verdict must carry a reason"});
  }
  return out;
}

Issue transition_issue_status(Issue issue, IssueStatus next, Timestamp at) {
  issue.status_history.push_back({issue.status, next, at});
  issue.status = next;
  issue.updated_at = at;
  return issue;
}

Issue transition_issue_status(Issue issue, std::string_view next, Timestamp at) {
  auto parsed = parse_issue_status(next);
  if (!parsed) {
    throw ValidationFailed({{"status", "unknown status '" + std::string(next) + "'"}}, issue.id.str());
  }
  return transition_issue_status(std::move(issue), *parsed, at);
}

Determination determine(std::optional<double> mean_score, std::size_t valid_count,
                        const std::optional<HumanOverride>& override_) {
  if (override_) return override_->score == 1 ? Determination::Pass : Determination::Fail;
  if (valid_count == 0 || !mean_score) return Determination::Undetermined;
  return *mean_score > 0.5 ? Determination::Pass : Determination::Fail;
}

}  // namespace gradeline
