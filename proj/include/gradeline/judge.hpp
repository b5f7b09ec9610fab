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

#ifndef GRADELINE_JUDGE_HPP_
#define GRADELINE_JUDGE_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "gradeline/domain.hpp"

namespace gradeline {

/// Raw text of a judge template as shipped in assets/judge_templates.
std::string_view judge_template_text(JudgeTemplate tpl);
std::string_view judge_template_version();

struct JudgePrompt {
  JudgeTemplate judge_template = JudgeTemplate::T1;
  std::string text;
};

/// Substitutes {{prompt_text}}, {{model_response}}, {{ground_truth}} and
/// {{judge_guidelines}} into the test's template in a single pass; values are
/// never re-scanned, so a model output containing "{{...}}" is inserted as is.
/// Guidelines are joined with "\n" in the author's order and numbering.
///
/// Throws ValidationFailed when a T1/T2 test has no reference answer.
JudgePrompt render_judge_prompt(const Test& test, std::string_view model_output);

/// Counts "{{name}}" placeholders of the template vocabulary left in `text`.
std::size_t residual_placeholders(std::string_view text);

/// The first balanced {...} region of `raw` that parses as a JSON object,
/// after trimming whitespace and markdown code fences.
std::optional<std::string> extract_json_object(std::string_view raw);

/// Classifies a judge reply. Valid iff the extracted object has a string
/// "justification" and a numeric "score" equal to 0 or 1. Never throws.
JudgeVerdict parse_judge_reply(std::string_view raw, std::string judge_model = {});

/// Reply in exactly the format the templates request.
std::string format_judge_reply(int score, std::string_view justification);

struct AggregateOutcome {
  std::optional<double> mean_score;
  std::size_t valid_count = 0;
  std::size_t invalid_count = 0;
  Determination determination = Determination::Undetermined;
};

/// Mean over valid verdicts only; invalid verdicts are counted, not scored.
AggregateOutcome aggregate_verdicts(std::span<const JudgeVerdict> verdicts);

struct FinalOutcome {
  Determination determination = Determination::Undetermined;
  std::optional<double> mean_score;
  // Set when a human override supplies the justification of record.
  std::optional<std::string> justification;
};

FinalOutcome apply_override(const AggregateOutcome& outcome,
                            const std::optional<HumanOverride>& override_);

}  // namespace gradeline

#endif  // GRADELINE_JUDGE_HPP_
