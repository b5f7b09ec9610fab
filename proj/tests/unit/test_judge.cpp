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

#include <algorithm>
#include <random>

#include "gradeline/judge.hpp"
#include "test_support.hpp"

namespace gradeline {
namespace {

using testkit::geometry_test;
using testkit::invalid_verdict;
using testkit::read_file;
using testkit::source_path;
using testkit::valid_verdict;

const gradeline::Test& seed_test(const std::string& title) {
  static const json bundle = testkit::seed_bundle();
  static std::map<std::string, gradeline::Test> by_title;
  if (by_title.empty()) {
    for (const auto& ij : bundle["issues"]) {
      gradeline::Test t = decode<gradeline::Test>(ij["tests"][0], "test");
      t.issue_id = IssueId{ij["id"].get<std::string>()};
      by_title[ij["title"].get<std::string>()] = t;
    }
  }
  return by_title.at(title);
}

TEST(RenderGolden, T1Geometry) {
  const auto p = render_judge_prompt(seed_test("Math - Geometry"), "Area = 13.975 square meters");
  EXPECT_EQ(p.text, read_file(source_path("tests/golden/t1_geometry.txt")));
  EXPECT_EQ(residual_placeholders(p.text), 0u);
}

TEST(RenderGolden, T2Translation) {
  const auto p =
      render_judge_prompt(seed_test("Multilingual - Translation"), "La bibliothèque est fermée le dimanche.");
  EXPECT_EQ(p.text, read_file(source_path("tests/golden/t2_translation.txt")));
}

TEST(RenderGolden, T3Creative) {
  const auto p = render_judge_prompt(seed_test("Creative - General Writing"),
                                     "Snow falls without sound\nWhite blanket on sleeping fields\nThe world holds its breath");
  EXPECT_EQ(p.text, read_file(source_path("tests/golden/t3_creative.txt")));
}

TEST(Render, GeometrySections) {
  gradeline::Test t = seed_test("Math - Geometry");
  const auto p = render_judge_prompt(t, "Area = 13.975 square meters");
  const auto truth = p.text.find("**Ground truth text**\n");
  ASSERT_NE(truth, std::string::npos);
  EXPECT_NE(p.text.find("13.975 square meters", truth), std::string::npos);
  EXPECT_NE(p.text.find("following guidelines:\n1. Use the correct geometric equation"), std::string::npos);
}

TEST(Render, T3HasNoGroundTruthSection) {
  const auto p = render_judge_prompt(seed_test("Creative - General Writing"), "anything");
  EXPECT_EQ(p.text.find("**Ground truth text**"), std::string::npos);
  EXPECT_NE(p.text.find("**Input to the model**"), std::string::npos);
}

TEST(Render, EmptyInputStillHasInputHeader) {
  gradeline::Test t = geometry_test();
  t.judge_guidelines = {"A"};
  t.input_prompt = "";
  const auto p = render_judge_prompt(t, "out");
  EXPECT_NE(p.text.find("**Input to the model**\n\n\n**Model output to be rated**"), std::string::npos);
  t.judge_template = JudgeTemplate::T3;
  EXPECT_NE(render_judge_prompt(t, "out").text.find("**Input to the model**\n\n\n\n**Model output"),
            std::string::npos);
}

TEST(Render, MissingReferenceIsRejected) {
  gradeline::Test t = geometry_test();
  t.reference_answer.reset();
  EXPECT_THROW(render_judge_prompt(t, "x"), ValidationFailed);
  t.judge_template = JudgeTemplate::T2;
  EXPECT_THROW(render_judge_prompt(t, "x"), ValidationFailed);
}

TEST(Render, HeaderPresenceByTemplate) {
  for (auto tpl : {JudgeTemplate::T1, JudgeTemplate::T2, JudgeTemplate::T3}) {
    gradeline::Test t = geometry_test();
    t.judge_template = tpl;
    const auto text = render_judge_prompt(t, "out").text;
    EXPECT_EQ(text.rfind("Act as an impartial judge", 0), 0u);
    EXPECT_EQ(text.find("**Ground truth text**") != std::string::npos, tpl != JudgeTemplate::T3);
    EXPECT_EQ(text.find("**Input to the model**") != std::string::npos, tpl != JudgeTemplate::T2);
    EXPECT_EQ(text.find("{{"), std::string::npos);
  }
}

TEST(Render, PlaceholderTextInValuesIsNotExpanded) {
  gradeline::Test t = geometry_test();
  const auto p = render_judge_prompt(t, "I echo {{ground_truth}} back");
  EXPECT_NE(p.text.find("I echo {{ground_truth}} back"), std::string::npos);
  EXPECT_EQ(residual_placeholders(p.text), 1u);
}

TEST(Render, GuidelinesKeepAuthorNumbering) {
  gradeline::Test t = geometry_test();
  t.judge_guidelines = {"3. third", "1. first"};
  const auto p = render_judge_prompt(t, "x");
  EXPECT_NE(p.text.find("guidelines:\n3. third\n1. first\n\n**Scoring Criteria**"), std::string::npos);
}

TEST(Render, InjectiveOnModelOutput) {
  const gradeline::Test t = geometry_test();
  std::set<std::string> seen;
  for (const char* out : {"", "a", "b", "ab", "a\nb", "{{x}}"}) {
    EXPECT_TRUE(seen.insert(render_judge_prompt(t, out).text).second) << out;
  }
}

TEST(TemplateAssets, VersionAndHeader) {
  EXPECT_EQ(judge_template_version(), "v1");
  for (auto tpl : {JudgeTemplate::T1, JudgeTemplate::T2, JudgeTemplate::T3}) {
    EXPECT_EQ(judge_template_text(tpl).rfind("Act as an impartial judge and evaluate", 0), 0u);
  }
}

TEST(ParseReply, Examples) {
  auto v = parse_judge_reply(R"({"justification": "correct area", "score": 1})");
  EXPECT_TRUE(v.valid());
  EXPECT_EQ(v.score, 1);
  EXPECT_EQ(v.justification, "correct area");

  v = parse_judge_reply("Here is my rating:\n```json\n{\"justification\": \"wrong formula\", \"score\": 0}\n```");
  EXPECT_TRUE(v.valid());
  EXPECT_EQ(v.score, 0);

  v = parse_judge_reply("The answer looks fine.");
  EXPECT_FALSE(v.valid());
  EXPECT_EQ(v.invalid_reason, "no JSON object found");
  EXPECT_EQ(v.raw_reply, "The answer looks fine.");

  v = parse_judge_reply(R"({"justification": "partial", "score": 0.7})");
  EXPECT_FALSE(v.valid());
  EXPECT_EQ(v.invalid_reason, "score not in {0,1}");
}

TEST(ParseReply, Corpus) {
  const json corpus = json::parse(read_file(source_path("tests/fixtures/judge_replies.json")));
  ASSERT_GE(corpus.size(), 30u);
  for (const auto& c : corpus) {
    SCOPED_TRACE(c["name"].get<std::string>());
    const auto raw = c["raw"].get<std::string>();
    const auto v = parse_judge_reply(raw, "judge");
    EXPECT_EQ(v.raw_reply, raw);
    EXPECT_EQ(v.judge_model, "judge");
    EXPECT_TRUE(validate_verdict(v).ok());
    ASSERT_EQ(v.valid(), c["valid"].get<bool>());
    if (v.valid()) {
      EXPECT_EQ(v.score, c["score"].get<int>());
      if (c.contains("justification")) {
        EXPECT_EQ(v.justification, c["justification"].get<std::string>());
      }
    } else {
      EXPECT_EQ(v.invalid_reason, c["reason"].get<std::string>());
      EXPECT_FALSE(v.score);
    }
  }
}

std::string random_justification(std::mt19937& rng) {
  static const std::vector<std::string> pieces = {"a", "Z", " ", "\"", "\\", "\n", "\t", "é", "✓", "0", ":", ",", "[", "]"};
  std::uniform_int_distribution<std::size_t> len(0, 40), pick(0, pieces.size() - 1);
  std::string s;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) s += pieces[pick(rng)];
  return s;
}

TEST(ParseReply, ExactFormatRoundTrip) {
  std::mt19937 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const int score = i % 2;
    const std::string j = random_justification(rng);
    const std::string reply = "{\"justification\": " + json(j).dump() + ", \"score\": " + std::to_string(score) + "}";
    const auto v = parse_judge_reply(reply);
    ASSERT_TRUE(v.valid()) << reply;
    EXPECT_EQ(v.score, score);
    EXPECT_EQ(v.justification, j);
    EXPECT_EQ(format_judge_reply(score, j), reply);
  }
}

// Independent oracle: integer arithmetic, no floating point threshold.
Determination oracle(const std::vector<int>& cells) {
  int valid = 0, sum = 0;
  for (int c : cells) {
    if (c >= 0) {
      ++valid;
      sum += c;
    }
  }
  if (valid == 0) return Determination::Undetermined;
  return 2 * sum > valid ? Determination::Pass : Determination::Fail;
}

std::vector<JudgeVerdict> to_verdicts(const std::vector<int>& cells) {
  std::vector<JudgeVerdict> out;
  for (int c : cells) out.push_back(c < 0 ? invalid_verdict() : valid_verdict(c));
  return out;
}

TEST(Aggregate, ExhaustiveUpToFiveJudges) {
  for (int k = 1; k <= 5; ++k) {
    int combos = 1;
    for (int i = 0; i < k; ++i) combos *= 3;
    for (int code = 0; code < combos; ++code) {
      std::vector<int> cells;
      for (int i = 0, c = code; i < k; ++i, c /= 3) cells.push_back(c % 3 - 1);  // -1 invalid, 0, 1
      const auto verdicts = to_verdicts(cells);
      const auto out = aggregate_verdicts(verdicts);
      const int valid = static_cast<int>(std::count_if(cells.begin(), cells.end(), [](int c) { return c >= 0; }));
      ASSERT_EQ(out.determination, oracle(cells));
      ASSERT_EQ(out.valid_count, static_cast<std::size_t>(valid));
      ASSERT_EQ(out.invalid_count, static_cast<std::size_t>(k - valid));
      ASSERT_EQ(out.mean_score.has_value(), valid > 0);
      ASSERT_EQ(determine(out.mean_score, out.valid_count, std::nullopt), out.determination);
    }
  }
}

TEST(Aggregate, Examples) {
  auto out = aggregate_verdicts(to_verdicts({1, 1, 0}));
  EXPECT_DOUBLE_EQ(*out.mean_score, 2.0 / 3.0);
  EXPECT_EQ(out.determination, Determination::Pass);
  out = aggregate_verdicts(to_verdicts({1, 0}));
  EXPECT_DOUBLE_EQ(*out.mean_score, 0.5);
  EXPECT_EQ(out.determination, Determination::Fail);
  out = aggregate_verdicts(to_verdicts({-1, -1}));
  EXPECT_EQ(out.determination, Determination::Undetermined);
  EXPECT_EQ(out.valid_count, 0u);
  out = aggregate_verdicts(to_verdicts({1}));
  EXPECT_DOUBLE_EQ(*out.mean_score, 1.0);
  EXPECT_EQ(out.determination, Determination::Pass);
}

TEST(Aggregate, MonotoneAndPermutationInvariant) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> cell(-1, 1), size(1, 7);
  for (int iter = 0; iter < 3000; ++iter) {
    std::vector<int> cells(size(rng));
    for (auto& c : cells) c = cell(rng);
    const auto base = aggregate_verdicts(to_verdicts(cells));

    auto shuffled = cells;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto perm = aggregate_verdicts(to_verdicts(shuffled));
    ASSERT_EQ(perm.determination, base.determination);
    ASSERT_EQ(perm.mean_score, base.mean_score);

    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i] != 0) continue;
      auto flipped = cells;
      flipped[i] = 1;
      const auto up = aggregate_verdicts(to_verdicts(flipped));
      ASSERT_NEAR(*up.mean_score - *base.mean_score, 1.0 / static_cast<double>(base.valid_count), 1e-12);
      if (base.determination == Determination::Pass) {
        ASSERT_EQ(up.determination, Determination::Pass);
      }
    }
  }
}

TEST(ApplyOverride, Examples) {
  AggregateOutcome fail;
  fail.mean_score = 0.0;
  fail.valid_count = 2;
  fail.determination = Determination::Fail;
  const HumanOverride up{1, "reference itself was wrong", "ann", now()};
  auto out = apply_override(fail, up);
  EXPECT_EQ(out.determination, Determination::Pass);
  EXPECT_EQ(out.justification, "reference itself was wrong");

  AggregateOutcome und;
  out = apply_override(und, HumanOverride{0, "judges failed", "ann", now()});
  EXPECT_EQ(out.determination, Determination::Fail);

  AggregateOutcome pass;
  pass.mean_score = 1.0;
  pass.valid_count = 1;
  pass.determination = Determination::Pass;
  out = apply_override(pass, std::nullopt);
  EXPECT_EQ(out.determination, Determination::Pass);
  EXPECT_FALSE(out.justification);
  EXPECT_EQ(out.mean_score, 1.0);
}

TEST(ApplyOverride, DominatesAnyVerdicts) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> cell(-1, 1), size(0, 6), bit(0, 1);
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<int> cells(size(rng));
    for (auto& c : cells) c = cell(rng);
    const HumanOverride o{bit(rng), "annotated", "ann", now()};
    const auto out = apply_override(aggregate_verdicts(to_verdicts(cells)), o);
    ASSERT_EQ(out.determination, o.score == 1 ? Determination::Pass : Determination::Fail);
  }
}

}  // namespace
}  // namespace gradeline
