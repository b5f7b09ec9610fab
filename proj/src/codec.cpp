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

#include "gradeline/codec.hpp"

namespace gradeline {

namespace {

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

template <class E>
E enum_from(const json& j, std::optional<E> (*parse)(std::string_view), const char* what) {
  const auto s = j.get<std::string>();
  auto v = parse(s);
  if (!v) throw ValidationFailed({{what, "unknown value '" + s + "'"}});
  return *v;
}

}  // namespace

json timestamp_json(Timestamp t) { return format_timestamp(t); }

Timestamp timestamp_from(const json& j) {
  auto t = parse_timestamp(j.get<std::string>());
  if (!t) throw ValidationFailed({{"timestamp", "malformed '" + j.get<std::string>() + "'"}});
  return *t;
}

void to_json(json& j, const Tag& v) { j = {{"kind", to_string(v.kind)}, {"value", v.value}}; }
void from_json(const json& j, Tag& v) {
  if (j.is_string()) {
    v = parse_tag(j.get<std::string>());
    return;
  }
  v.kind = j.contains("kind") ? enum_from(j.at("kind"), parse_tag_kind, "tag.kind") : TagKind::Domain;
  v.value = j.at("value").get<std::string>();
}

void to_json(json& j, const StatusChange& v) {
  j = {{"from", to_string(v.from)}, {"to", to_string(v.to)}, {"at", timestamp_json(v.at)}};
}
void from_json(const json& j, StatusChange& v) {
  v.from = enum_from(j.at("from"), parse_issue_status, "from");
  v.to = enum_from(j.at("to"), parse_issue_status, "to");
  v.at = timestamp_from(j.at("at"));
}

void to_json(json& j, const Issue& v) {
  j = {{"id", v.id},
       {"title", v.title},
       {"description", v.description},
       {"status", to_string(v.status)},
       {"tags", v.tags},
       {"feedback_ids", v.feedback_ids},
       {"created_at", timestamp_json(v.created_at)},
       {"updated_at", timestamp_json(v.updated_at)},
       {"status_history", v.status_history},
       {"hidden", v.hidden}};
}
void from_json(const json& j, Issue& v) {
  v.id = j.value("id", IssueId{});
  v.title = j.at("title").get<std::string>();
  v.description = j.at("description").get<std::string>();
  v.status = j.contains("status") ? enum_from(j.at("status"), parse_issue_status, "status")
                                  : IssueStatus::Open;
  v.tags = j.value("tags", std::set<Tag>{});
  v.feedback_ids = j.value("feedback_ids", std::vector<FeedbackId>{});
  v.created_at = j.contains("created_at") ? timestamp_from(j.at("created_at")) : Timestamp{};
  v.updated_at = j.contains("updated_at") ? timestamp_from(j.at("updated_at")) : v.created_at;
  v.status_history = j.value("status_history", std::vector<StatusChange>{});
  v.hidden = j.value("hidden", false);
}

void to_json(json& j, const Feedback& v) {
  j = {{"id", v.id},
       {"user_input", v.user_input},
       {"model_output", v.model_output},
       {"signal", to_string(v.signal)},
       {"source_model", v.source_model},
       {"received_at", timestamp_json(v.received_at)}};
}
void from_json(const json& j, Feedback& v) {
  v.id = j.value("id", FeedbackId{});
  v.user_input = j.at("user_input").get<std::string>();
  v.model_output = j.value("model_output", std::string{});
  v.signal = j.contains("signal") ? enum_from(j.at("signal"), parse_feedback_signal, "signal")
                                  : FeedbackSignal::ThumbsDown;
  v.source_model = j.value("source_model", std::string{});
  v.received_at = j.contains("received_at") ? timestamp_from(j.at("received_at")) : Timestamp{};
}

void to_json(json& j, const Test& v) {
  j = {{"id", v.id},
       {"issue_id", v.issue_id},
       {"input_prompt", v.input_prompt},
       {"reference_answer", opt(v.reference_answer)},
       {"judge_template", to_string(v.judge_template)},
       {"judge_guidelines", v.judge_guidelines},
       {"created_at", timestamp_json(v.created_at)},
       {"deleted", v.deleted}};
}
void from_json(const json& j, Test& v) {
  v.id = j.value("id", TestId{});
  v.issue_id = j.value("issue_id", IssueId{});
  v.input_prompt = j.at("input_prompt").get<std::string>();
  v.reference_answer = opt_from<std::string>(j, "reference_answer");
  v.judge_template = enum_from(j.at("judge_template"), parse_judge_template, "judge_template");
  v.judge_guidelines = j.at("judge_guidelines").get<std::vector<std::string>>();
  v.created_at = j.contains("created_at") ? timestamp_from(j.at("created_at")) : Timestamp{};
  v.deleted = j.value("deleted", false);
}

void to_json(json& j, const GenerationParams& v) {
  j = {{"temperature", v.temperature}, {"max_tokens", v.max_tokens}, {"seed", opt(v.seed)}};
}
void from_json(const json& j, GenerationParams& v) {
  v.temperature = j.value("temperature", 0.0);
  v.max_tokens = j.value("max_tokens", std::int64_t{1024});
  v.seed = opt_from<std::int64_t>(j, "seed");
}

void to_json(json& j, const ModelRef& v) {
  j = {{"provider", to_string(v.provider)},
       {"base_url", v.base_url},
       {"model_name", v.model_name},
       {"generation_params", v.params}};
}
void from_json(const json& j, ModelRef& v) {
  v.provider = j.contains("provider") ? enum_from(j.at("provider"), parse_provider, "provider")
                                      : Provider::OpenAICompatible;
  v.base_url = j.value("base_url", std::string{});
  v.model_name = j.at("model_name").get<std::string>();
  v.params = j.value("generation_params", GenerationParams{});
}

void to_json(json& j, const TestSelection& v) {
  j = {{"tags", v.tags}, {"test_ids", v.test_ids}, {"issue_ids", v.issue_ids}};
}
void from_json(const json& j, TestSelection& v) {
  v.tags = j.value("tags", std::set<Tag>{});
  v.test_ids = j.value("test_ids", std::set<TestId>{});
  v.issue_ids = j.value("issue_ids", std::set<IssueId>{});
}

void to_json(json& j, const RunProgress& v) {
  j = {{"total", v.total}, {"inferred", v.inferred}, {"judged", v.judged}, {"errored", v.errored}};
}
void from_json(const json& j, RunProgress& v) {
  v.total = j.value("total", std::int64_t{0});
  v.inferred = j.value("inferred", std::int64_t{0});
  v.judged = j.value("judged", std::int64_t{0});
  v.errored = j.value("errored", std::int64_t{0});
}

void to_json(json& j, const IssueSnapshot& v) {
  j = {{"id", v.id}, {"title", v.title}, {"tags", v.tags}};
}
void from_json(const json& j, IssueSnapshot& v) {
  v.id = j.at("id").get<IssueId>();
  v.title = j.value("title", std::string{});
  v.tags = j.value("tags", std::set<Tag>{});
}

void to_json(json& j, const TestRun& v) {
  j = {{"id", v.id},
       {"target_model", v.target},
       {"judge_models", v.judges},
       {"selection", v.selection},
       {"status", to_string(v.status)},
       {"created_at", timestamp_json(v.created_at)},
       {"started_at", v.started_at ? timestamp_json(*v.started_at) : json(nullptr)},
       {"finished_at", v.finished_at ? timestamp_json(*v.finished_at) : json(nullptr)},
       {"test_ids", v.test_ids},
       {"tests", v.tests},
       {"issues", v.issues},
       {"result_ids", v.result_ids},
       {"progress", v.progress},
       {"failure_reason", opt(v.failure_reason)},
       {"imported_from", opt(v.imported_from)}};
}
void from_json(const json& j, TestRun& v) {
  v.id = j.value("id", RunId{});
  v.target = j.at("target_model").get<ModelRef>();
  v.judges = j.at("judge_models").get<std::vector<ModelRef>>();
  v.selection = j.value("selection", TestSelection{});
  v.status = j.contains("status") ? enum_from(j.at("status"), parse_run_status, "status")
                                  : RunStatus::Pending;
  v.created_at = j.contains("created_at") ? timestamp_from(j.at("created_at")) : Timestamp{};
  v.started_at = std::nullopt;
  v.finished_at = std::nullopt;
  if (j.contains("started_at") && !j.at("started_at").is_null()) v.started_at = timestamp_from(j.at("started_at"));
  if (j.contains("finished_at") && !j.at("finished_at").is_null()) v.finished_at = timestamp_from(j.at("finished_at"));
  v.test_ids = j.value("test_ids", std::vector<TestId>{});
  v.tests = j.value("tests", std::vector<Test>{});
  v.issues = j.value("issues", std::vector<IssueSnapshot>{});
  v.result_ids = j.value("result_ids", std::vector<ResultId>{});
  v.progress = j.value("progress", RunProgress{});
  v.failure_reason = opt_from<std::string>(j, "failure_reason");
  v.imported_from = opt_from<std::string>(j, "imported_from");
}

void to_json(json& j, const JudgeVerdict& v) {
  j = {{"judge_model", v.judge_model},
       {"score", opt(v.score)},
       {"justification", v.justification},
       {"raw_reply", v.raw_reply},
       {"validity", to_string(v.validity)},
       {"invalid_reason", opt(v.invalid_reason)}};
}
void from_json(const json& j, JudgeVerdict& v) {
  v.judge_model = j.at("judge_model").get<std::string>();
  v.score = opt_from<int>(j, "score");
  v.justification = j.value("justification", std::string{});
  v.raw_reply = j.value("raw_reply", std::string{});
  v.validity = j.at("validity").get<std::string>() == "valid" ? Validity::Valid : Validity::Invalid;
  v.invalid_reason = opt_from<std::string>(j, "invalid_reason");
}

void to_json(json& j, const HumanOverride& v) {
  j = {{"score", v.score},
       {"justification", v.justification},
       {"annotator", v.annotator},
       {"created_at", timestamp_json(v.created_at)}};
}
void from_json(const json& j, HumanOverride& v) {
  const auto& s = j.at("score");
  if (!s.is_number_integer()) throw ValidationFailed({{"score", "must be integer 0 or 1"}}, "override");
  v.score = s.get<int>();
  v.justification = j.at("justification").get<std::string>();
  v.annotator = j.value("annotator", std::string{});
  v.created_at = j.contains("created_at") ? timestamp_from(j.at("created_at")) : Timestamp{};
}

void to_json(json& j, const TestResult& v) {
  j = {{"id", v.id},
       {"run_id", v.run_id},
       {"test_id", v.test_id},
       {"model_output", v.model_output},
       {"verdicts", v.verdicts},
       {"mean_score", opt(v.mean_score)},
       {"determination", to_string(v.determination)},
       {"override", v.override_ ? json(*v.override_) : json(nullptr)},
       {"override_history", v.override_history},
       {"error", opt(v.error)},
       {"created_at", timestamp_json(v.created_at)}};
}
void from_json(const json& j, TestResult& v) {
  v.id = j.at("id").get<ResultId>();
  v.run_id = j.at("run_id").get<RunId>();
  v.test_id = j.at("test_id").get<TestId>();
  v.model_output = j.value("model_output", std::string{});
  v.verdicts = j.value("verdicts", std::vector<JudgeVerdict>{});
  v.mean_score = opt_from<double>(j, "mean_score");
  v.determination = enum_from(j.at("determination"), parse_determination, "determination");
  v.override_ = opt_from<HumanOverride>(j, "override");
  v.override_history = j.value("override_history", std::vector<HumanOverride>{});
  v.error = opt_from<std::string>(j, "error");
  v.created_at = j.contains("created_at") ? timestamp_from(j.at("created_at")) : Timestamp{};
}

void to_json(json& j, const InferenceRecord& v) {
  j = {{"run_id", v.run_id},
       {"test_id", v.test_id},
       {"model_output", v.model_output},
       {"latency_ms", v.latency_ms},
       {"attempt_count", v.attempt_count},
       {"created_at", timestamp_json(v.created_at)}};
}
void from_json(const json& j, InferenceRecord& v) {
  v.run_id = j.at("run_id").get<RunId>();
  v.test_id = j.at("test_id").get<TestId>();
  v.model_output = j.at("model_output").get<std::string>();
  v.latency_ms = j.value("latency_ms", std::int64_t{0});
  v.attempt_count = j.value("attempt_count", std::int64_t{1});
  v.created_at = j.contains("created_at") ? timestamp_from(j.at("created_at")) : Timestamp{};
}

}  // namespace gradeline
