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

#ifndef GRADELINE_ANALYTICS_HPP_
#define GRADELINE_ANALYTICS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gradeline/codec.hpp"
#include "gradeline/domain.hpp"
#include "gradeline/repository.hpp"

namespace gradeline {

struct Counts {
  std::int64_t passed = 0;
  std::int64_t failed = 0;
  std::int64_t undetermined = 0;
  std::int64_t inference_error = 0;
  std::int64_t selection_error = 0;

  std::int64_t total() const { return passed + failed + undetermined + inference_error + selection_error; }
  void add(Determination d);
  bool operator==(const Counts&) const = default;
};

// Percentages are kept unrounded; serialization rounds them.
struct GroupStats {
  std::string key;
  std::string title;
  Counts counts;
  std::optional<double> pass_rate_pct;
  std::optional<double> failure_rate_pct;
  std::optional<double> mean_score_pct;
};

struct RunReport {
  RunId run_id;
  std::string model;
  Counts totals;
  std::optional<double> pass_rate_pct;
  std::optional<double> mean_score_pct;
  std::vector<GroupStats> per_issue;
  std::vector<GroupStats> per_tag;
  // True when some issue carries several domain tags, so per_tag overlaps.
  bool per_tag_overlaps = false;
  Timestamp generated_at;
};

enum class Relation { Outperform, Underperform, Match };
std::string_view to_string(Relation r);

struct RelationCounts {
  std::int64_t outperform = 0;
  std::int64_t underperform = 0;
  std::int64_t match = 0;
  std::int64_t total() const { return outperform + underperform + match; }
  void add(Relation r);
  bool operator==(const RelationCounts&) const = default;
};

struct TestComparison {
  TestId test_id;
  double score_a = 0;
  double score_b = 0;
  Relation relation = Relation::Match;
};

struct ComparisonReport {
  RunId run_a;
  RunId run_b;
  std::vector<TestId> shared_test_ids;
  std::vector<TestComparison> per_test;
  RelationCounts counts;
  std::vector<std::pair<std::string, RelationCounts>> per_tag;
};

enum class GroupBy { Overall, Domain };
std::optional<GroupBy> parse_group_by(std::string_view s);

struct TrendPoint {
  RunId run_id;
  std::string model;
  Timestamp started_at;
  std::optional<double> pass_rate_pct;
  std::optional<double> mean_score_pct;
};

struct TrendSeries {
  std::string group_key;
  std::vector<TrendPoint> points;
};

// Round-half-up to one decimal, e.g. 66.666... -> 66.7.
double round_pct(double pct);
// 100 * numerator / denominator rounded as above, computed exactly.
double ratio_pct(std::int64_t numerator, std::int64_t denominator);

RunReport build_report(const TestRun& run, const std::vector<TestResult>& results);
// Throws UnknownId or RunNotCompleted.
RunReport build_report(const Repository& repo, const RunId& run_id);

// Effective scores (override, else ensemble mean); tests without one on either
// side are left out. Throws NoSharedTests when nothing remains.
ComparisonReport compare_reports(const TestRun& run_a, const std::vector<TestResult>& results_a,
                                 const TestRun& run_b, const std::vector<TestResult>& results_b);
ComparisonReport compare_reports(const Repository& repo, const RunId& a, const RunId& b);

struct RunData {
  TestRun run;
  std::vector<TestResult> results;
};
std::vector<TrendSeries> trend_series(std::vector<RunData> runs, GroupBy group_by);
std::vector<TrendSeries> trend_series(const Repository& repo, const std::vector<RunId>& run_ids, GroupBy group_by);

json to_json(const RunReport& report);
json to_json(const ComparisonReport& report);
json to_json(const std::vector<TrendSeries>& series);

// One row per result.
std::string results_csv(const TestRun& run, const std::vector<TestResult>& results);

}  // namespace gradeline

#endif  // GRADELINE_ANALYTICS_HPP_
