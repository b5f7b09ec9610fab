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

#include "gradeline/judge.hpp"

#include <array>
#include <cctype>

#include "json.hpp"

namespace gradeline {

namespace {

constexpr std::array<std::string_view, 4> kPlaceholders{"prompt_text", "model_response",
                                                        "ground_truth", "judge_guidelines"};

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_fences(std::string_view s) {
  s = trim(s);
  if (s.starts_with("```")) {
    auto nl = s.find('\n');
    s = nl == std::string_view::npos ? std::string_view{} : s.substr(nl + 1);
  }
  s = trim(s);
  if (s.ends_with("```")) s.remove_suffix(3);
  return trim(s);
}

// Index one past the '}' closing the object that opens at `open`, honouring
// JSON string literals; npos if unbalanced.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

JudgeVerdict invalid(JudgeVerdict v, std::string reason) {
  v.validity = Validity::Invalid;
  v.score.reset();
  v.invalid_reason = std::move(reason);
  return v;
}

}  // namespace

JudgePrompt render_judge_prompt(const Test& test, std::string_view model_output) {
  // Only template/field compatibility is enforced here; other test rules are
  // checked when the test is stored.
  const bool needs_reference = test.judge_template != JudgeTemplate::T3;
  if (needs_reference && (!test.reference_answer || test.reference_answer->empty())) {
    throw ValidationFailed(
        {{"reference_answer", std::string(to_string(test.judge_template)) + " requires reference_answer"}},
        test.id.str());
  }
  const std::string guidelines = join_lines(test.judge_guidelines);
  const std::string reference = test.reference_answer.value_or("");
  auto value_of = [&](std::string_view name) -> std::optional<std::string_view> {
    if (name == "prompt_text") return std::string_view(test.input_prompt);
    if (name == "model_response") return model_output;
    if (name == "ground_truth") return std::string_view(reference);
    if (name == "judge_guidelines") return std::string_view(guidelines);
    return std::nullopt;
  };

  const std::string_view tpl = judge_template_text(test.judge_template);
  std::string out;
  out.reserve(tpl.size() + test.input_prompt.size() + model_output.size() + reference.size() +
              guidelines.size());
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const auto open = tpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    auto value = value_of(tpl.substr(open + 2, close - open - 2));
    out.append(tpl.substr(pos, open - pos));
    if (value) {
      out.append(*value);
    } else {
      out.append(tpl.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  out.append(tpl.substr(pos));
  return {test.judge_template, std::move(out)};
}

std::size_t residual_placeholders(std::string_view text) {
  std::size_t count = 0;
  for (auto name : kPlaceholders) {
    const std::string token = "{{" + std::string(name) + "}}";
    for (auto p = text.find(token); p != std::string_view::npos; p = text.find(token, p + 1)) ++count;
  }
  return count;
}

std::optional<std::string> extract_json_object(std::string_view raw) {
  const std::string_view s = strip_fences(raw);
  for (auto open = s.find('{'); open != std::string_view::npos; open = s.find('{', open + 1)) {
    const auto end = match_brace(s, open);
    if (end == std::string_view::npos) continue;
    const auto candidate = s.substr(open, end - open);
    auto parsed = nlohmann::json::parse(candidate, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && parsed.is_object()) return std::string(candidate);
  }
  return std::nullopt;
}

JudgeVerdict parse_judge_reply(std::string_view raw, std::string judge_model) {
  JudgeVerdict v;
  v.judge_model = std::move(judge_model);
  v.raw_reply = std::string(raw);

  auto object = extract_json_object(raw);
  if (!object) return invalid(std::move(v), "no JSON object found");
  const auto j = nlohmann::json::parse(*object);

  if (auto it = j.find("justification"); it != j.end() && it->is_string()) {
    v.justification = it->get<std::string>();
  }
  const auto score = j.find("score");
  if (score == j.end()) return invalid(std::move(v), "missing score");
  if (!score->is_number()) return invalid(std::move(v), "score not a number");
  const double s = score->get<double>();
  if (s != 0.0 && s != 1.0) return invalid(std::move(v), "score not in {0,1}");

  const auto just = j.find("justification");
  if (just == j.end()) return invalid(std::move(v), "missing justification");
  if (!just->is_string()) return invalid(std::move(v), "justification not a string");

  v.score = static_cast<int>(s);
  v.validity = Validity::Valid;
  v.invalid_reason.reset();
  return v;
}

std::string format_judge_reply(int score, std::string_view justification) {
  return "{\"justification\": " + nlohmann::json(std::string(justification)).dump() +
         ", \"score\": " + std::to_string(score) + "}";
}

AggregateOutcome aggregate_verdicts(std::span<const JudgeVerdict> verdicts) {
  AggregateOutcome out;
  int sum = 0;
  for (const auto& v : verdicts) {
    if (v.valid() && v.score) {
      ++out.valid_count;
      sum += *v.score;
    } else {
      ++out.invalid_count;
    }
  }
  if (out.valid_count > 0) {
    out.mean_score = static_cast<double>(sum) / static_cast<double>(out.valid_count);
  }
  out.determination = determine(out.mean_score, out.valid_count, std::nullopt);
  return out;
}

FinalOutcome apply_override(const AggregateOutcome& outcome,
                            const std::optional<HumanOverride>& override_) {
  FinalOutcome out{outcome.determination, outcome.mean_score, std::nullopt};
  if (override_) {
    out.determination = determine(outcome.mean_score, outcome.valid_count, override_);
    out.justification = override_->justification;
  }
  return out;
}

}  // namespace gradeline
