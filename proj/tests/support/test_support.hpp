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

#ifndef GRADELINE_TESTS_TEST_SUPPORT_HPP_
#define GRADELINE_TESTS_TEST_SUPPORT_HPP_

#include <stdlib.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include "gradeline/analytics.hpp"
#include "gradeline/codec.hpp"
#include "gradeline/config.hpp"
#include "gradeline/domain.hpp"
#include "gradeline/judge.hpp"
#include "gradeline/mock_server.hpp"

namespace gradeline::testkit {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(GRADELINE_SOURCE_DIR) / rel;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline json seed_bundle() { return json::parse(read_file(source_path("data/seed.json"))); }

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "gradeline-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline Test geometry_test() {
  Test t;
  t.id = TestId{"test-geometry"};
  t.issue_id = IssueId{"issue-geometry"};
  t.input_prompt = "A triangle has a base of 6.5 meters and a height of 4.3 meters. Calculate its area.";
  t.reference_answer = "The area is 13.975 square meters.";
  t.judge_template = JudgeTemplate::T1;
  t.judge_guidelines = {"1. Use the correct geometric equation to solve.",
                        "2. In math, the answer must match the reference exactly to be correct.",
                        "3. The reference and predicted answer should be in the simplest form.",
                        "4. The input should be a geometry math question."};
  return t;
}

inline JudgeVerdict valid_verdict(int score, std::string judge = "j") {
  JudgeVerdict v;
  v.judge_model = std::move(judge);
  v.score = score;
  v.justification = "because";
  v.raw_reply = "{}";
  v.validity = Validity::Valid;
  return v;
}

inline JudgeVerdict invalid_verdict(std::string judge = "j") {
  JudgeVerdict v;
  v.judge_model = std::move(judge);
  v.raw_reply = "prose";
  v.validity = Validity::Invalid;
  v.invalid_reason = "no JSON object found";
  return v;
}

inline ModelRef mock_model(const MockModelServer& server, const std::string& name,
                           Provider provider = Provider::OpenAICompatible) {
  ModelRef m;
  m.provider = provider;
  m.base_url = server.base_url();
  m.model_name = name;
  return m;
}

// Gateway policy for tests: fast backoff, short timeout.
inline GatewayPolicy fast_policy() {
  GatewayPolicy p;
  p.timeout = std::chrono::milliseconds(5000);
  p.backoff_base = std::chrono::milliseconds(5);
  return p;
}

inline bool wait_until(const std::function<bool()>& pred,
                       std::chrono::milliseconds limit = std::chrono::milliseconds(10000)) {
  const auto deadline = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return pred();
}

// Three-judge panel used by the end-to-end checks. Outcomes per template:
//   target  "OK", except HTTP 500 for the Underspecified seed prompt
//   judge1  always 1
//   judge2  0 when the prompt has a ground-truth section, else 1
//   judge3  prose when the prompt has no input section (T2), else 0
// so T1 -> [1,0,0] mean 1/3 fail, T2 -> [1,0,invalid] mean 1/2 fail,
// T3 -> [1,1,0] mean 2/3 pass.
inline constexpr const char* kUnderspecifiedPrompt = "List the upcoming public holidays.";

inline void install_panel(MockModelServer& server, std::chrono::milliseconds delay = std::chrono::milliseconds(20)) {
  server.set_model("target", [delay](const MockCall& c) {
    if (c.prompt == kUnderspecifiedPrompt) return MockReply{500, "upstream exploded", delay};
    return MockReply{200, "OK", delay};
  });
  server.set_model("judge1", judge_reply(1, "adheres to the guidelines", delay));
  server.set_model("judge2", [delay](const MockCall& c) {
    const bool has_truth = c.prompt.find("**Ground truth text**") != std::string::npos;
    return MockReply{200, format_judge_reply(has_truth ? 0 : 1, "compared with ground truth"), delay};
  });
  server.set_model("judge3", [delay](const MockCall& c) {
    if (c.prompt.find("**Input to the model**") == std::string::npos) {
      return MockReply{200, "I would rate this as acceptable overall.", delay};
    }
    return MockReply{200, format_judge_reply(0, "strict reading"), delay};
  });
}

struct Row {
  std::string domain;
  Determination determination;
  std::optional<double> mean;
};

// Builds a completed run with one issue per distinct domain and one test per row.
inline RunData synthetic_run(const std::string& id, const std::string& started, const std::vector<Row>& rows) {
  RunData rd;
  rd.run.id = RunId{id};
  rd.run.status = RunStatus::Completed;
  rd.run.target.model_name = "model-" + id;
  rd.run.target.base_url = "http://127.0.0.1:1";
  rd.run.created_at = *parse_timestamp(started);
  rd.run.started_at = rd.run.created_at;
  rd.run.finished_at = rd.run.created_at;
  std::set<std::string> domains;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Test t = geometry_test();
    t.id = TestId{"t" + std::to_string(i)};
    t.issue_id = IssueId{"issue-" + rows[i].domain};
    rd.run.test_ids.push_back(t.id);
    rd.run.tests.push_back(t);
    if (domains.insert(rows[i].domain).second) {
      rd.run.issues.push_back({t.issue_id, rows[i].domain + " - Task", {Tag{TagKind::Domain, rows[i].domain}}});
    }
    TestResult r;
    r.id = ResultId{id + "-r" + std::to_string(i)};
    r.run_id = rd.run.id;
    r.test_id = t.id;
    r.determination = rows[i].determination;
    r.mean_score = rows[i].mean;
    r.created_at = rd.run.created_at;
    rd.results.push_back(r);
  }
  return rd;
}

}  // namespace gradeline::testkit

#endif  // GRADELINE_TESTS_TEST_SUPPORT_HPP_
