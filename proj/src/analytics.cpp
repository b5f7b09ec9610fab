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

#include "gradeline/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace gradeline {

void Counts::add(Determination d) {
  switch (d) {
    case Determination::Pass: ++passed; break;
    case Determination::Fail: ++failed; break;
    case Determination::Undetermined: ++undetermined; break;
    case Determination::InferenceError: ++inference_error; break;
    case Determination::SelectionError: ++selection_error; break;
  }
}

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::Outperform: return "outperform";
    case Relation::Underperform: return "underperform";
    case Relation::Match: return "match";
  }
  return "?";
}

void RelationCounts::add(Relation r) {
  switch (r) {
    case Relation::Outperform: ++outperform; break;
    case Relation::Underperform: ++underperform; break;
    case Relation::Match: ++match; break;
  }
}

std::optional<GroupBy> parse_group_by(std::string_view s) {
  if (s == "overall") return GroupBy::Overall;
  if (s == "domain") return GroupBy::Domain;
  return std::nullopt;
}

double round_pct(double pct) { return std::floor(pct * 10.0 + 0.5 + 1e-9) / 10.0; }

double ratio_pct(std::int64_t numerator, std::int64_t denominator) {
  // floor((2000 n + d) / (2 d)) tenths of a percent, in integers.
  const std::int64_t tenths = (2000 * numerator + denominator) / (2 * denominator);
  return static_cast<double>(tenths) / 10.0;
}

namespace {

struct Accumulator {
  Counts counts;
  double score_sum = 0;
  std::int64_t scored = 0;

  void add(const TestResult& r) {
    counts.add(r.determination);
    if (auto s = r.effective_score()) {
      score_sum += *s;
      ++scored;
    }
  }
  std::optional<double> pass_rate() const {
    const auto denom = counts.passed + counts.failed;
    if (denom == 0) return std::nullopt;
    return 100.0 * static_cast<double>(counts.passed) / static_cast<double>(denom);
  }
  std::optional<double> failure_rate() const {
    const auto denom = counts.passed + counts.failed;
    if (denom == 0) return std::nullopt;
    return 100.0 * static_cast<double>(counts.failed) / static_cast<double>(denom);
  }
  std::optional<double> mean_score() const {
    if (scored == 0) return std::nullopt;
    return 100.0 * score_sum / static_cast<double>(scored);
  }
  GroupStats stats(std::string key, std::string title) const {
    return {std::move(key), std::move(title), counts, pass_rate(), failure_rate(), mean_score()};
  }
};

std::map<TestId, const Test*> test_index(const TestRun& run) {
  std::map<TestId, const Test*> m;
  for (const auto& t : run.tests) m[t.id] = &t;
  return m;
}

std::map<IssueId, const IssueSnapshot*> issue_index(const TestRun& run) {
  std::map<IssueId, const IssueSnapshot*> m;
  for (const auto& i : run.issues) m[i.id] = &i;
  return m;
}

std::vector<std::string> domains_of(const TestRun& run, const TestId& test) {
  const auto tests = test_index(run);
  const auto issues = issue_index(run);
  std::vector<std::string> out;
  auto t = tests.find(test);
  if (t == tests.end()) return out;
  auto i = issues.find(t->second->issue_id);
  if (i == issues.end()) return out;
  for (const auto& tag : i->second->tags) {
    if (tag.kind == TagKind::Domain) out.push_back(tag.value);
  }
  return out;
}

Timestamp latest_data_time(const TestRun& run, const std::vector<TestResult>& results) {
  Timestamp t = run.finished_at.value_or(run.started_at.value_or(run.created_at));
  for (const auto& r : results) {
    t = std::max(t, r.created_at);
    for (const auto& o : r.override_history) t = std::max(t, o.created_at);
  }
  return t;
}

json pct_json(const std::optional<double>& v) { return v ? json(round_pct(*v)) : json(nullptr); }

json counts_json(const Counts& c) {
  return {{"passed", c.passed},
          {"failed", c.failed},
          {"undetermined", c.undetermined},
          {"inference_error", c.inference_error},
          {"selection_error", c.selection_error},
          {"total", c.total()}};
}

json relation_json(const RelationCounts& c) {
  return {{"outperform", c.outperform}, {"underperform", c.underperform}, {"match", c.match}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string number(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

}  // namespace

RunReport build_report(const TestRun& run, const std::vector<TestResult>& results) {
  RunReport report;
  report.run_id = run.id;
  report.model = run.target.identity();
  report.generated_at = latest_data_time(run, results);

  const auto tests = test_index(run);
  const auto issues = issue_index(run);
  Accumulator overall;
  std::map<IssueId, Accumulator> by_issue;
  std::map<std::string, Accumulator> by_tag;
  for (const auto& r : results) {
    overall.add(r);
    auto t = tests.find(r.test_id);
    if (t == tests.end()) continue;
    by_issue[t->second->issue_id].add(r);
    const auto domains = domains_of(run, r.test_id);
    if (domains.size() > 1) report.per_tag_overlaps = true;
    for (const auto& d : domains) by_tag[d].add(r);
  }
  report.totals = overall.counts;
  report.pass_rate_pct = overall.pass_rate();
  report.mean_score_pct = overall.mean_score();
  for (const auto& [iid, acc] : by_issue) {
    auto i = issues.find(iid);
    report.per_issue.push_back(acc.stats(iid.str(), i == issues.end() ? std::string{} : i->second->title));
  }
  for (const auto& [tag, acc] : by_tag) report.per_tag.push_back(acc.stats(tag, tag));
  return report;
}

RunReport build_report(const Repository& repo, const RunId& run_id) {
  const TestRun run = repo.get_run(run_id);
  if (run.status != RunStatus::Completed) throw RunNotCompleted(run_id.str());
  return build_report(run, repo.results_for_run(run_id));
}

ComparisonReport compare_reports(const TestRun& run_a, const std::vector<TestResult>& results_a,
                                 const TestRun& run_b, const std::vector<TestResult>& results_b) {
  std::map<TestId, double> scores_b;
  for (const auto& r : results_b) {
    if (auto s = r.effective_score()) scores_b[r.test_id] = *s;
  }
  ComparisonReport out;
  out.run_a = run_a.id;
  out.run_b = run_b.id;
  std::map<std::string, RelationCounts> by_tag;
  std::vector<const TestResult*> ordered;
  for (const auto& r : results_a) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](auto* x, auto* y) { return x->test_id < y->test_id; });
  for (const auto* r : ordered) {
    const auto a = r->effective_score();
    auto b = scores_b.find(r->test_id);
    if (!a || b == scores_b.end()) continue;
    TestComparison c{r->test_id, *a, b->second, Relation::Match};
    if (c.score_a > c.score_b) {
      c.relation = Relation::Outperform;
    } else if (c.score_a < c.score_b) {
      c.relation = Relation::Underperform;
    }
    out.shared_test_ids.push_back(c.test_id);
    out.counts.add(c.relation);
    auto domains = domains_of(run_a, c.test_id);
    if (domains.empty()) domains = domains_of(run_b, c.test_id);
    for (const auto& d : domains) by_tag[d].add(c.relation);
    out.per_test.push_back(c);
  }
  if (out.per_test.empty()) throw NoSharedTests(run_a.id.str(), run_b.id.str());
  out.per_tag.assign(by_tag.begin(), by_tag.end());
  return out;
}

ComparisonReport compare_reports(const Repository& repo, const RunId& a, const RunId& b) {
  const TestRun ra = repo.get_run(a);
  const TestRun rb = repo.get_run(b);
  if (ra.status != RunStatus::Completed) throw RunNotCompleted(a.str());
  if (rb.status != RunStatus::Completed) throw RunNotCompleted(b.str());
  return compare_reports(ra, repo.results_for_run(a), rb, repo.results_for_run(b));
}

std::vector<TrendSeries> trend_series(std::vector<RunData> runs, GroupBy group_by) {
  auto started = [](const TestRun& r) { return r.started_at.value_or(r.created_at); };
  std::sort(runs.begin(), runs.end(), [&](const RunData& x, const RunData& y) {
    return std::make_pair(started(x.run), x.run.id) < std::make_pair(started(y.run), y.run.id);
  });
  std::map<std::string, TrendSeries> series;
  for (const auto& rd : runs) {
    const RunReport report = build_report(rd.run, rd.results);
    auto point = [&](const std::optional<double>& pass, const std::optional<double>& mean) {
      return TrendPoint{rd.run.id, report.model, started(rd.run), pass, mean};
    };
    if (group_by == GroupBy::Overall) {
      auto& s = series["overall"];
      s.group_key = "overall";
      s.points.push_back(point(report.pass_rate_pct, report.mean_score_pct));
    } else {
      for (const auto& g : report.per_tag) {
        auto& s = series[g.key];
        s.group_key = g.key;
        s.points.push_back(point(g.pass_rate_pct, g.mean_score_pct));
      }
    }
  }
  std::vector<TrendSeries> out;
  for (auto& [_, s] : series) out.push_back(std::move(s));
  return out;
}

std::vector<TrendSeries> trend_series(const Repository& repo, const std::vector<RunId>& run_ids, GroupBy group_by) {
  std::vector<RunData> runs;
  for (const auto& id : run_ids) {
    TestRun run = repo.get_run(id);
    if (run.status != RunStatus::Completed) throw RunNotCompleted(id.str());
    runs.push_back({run, repo.results_for_run(id)});
  }
  return trend_series(std::move(runs), group_by);
}

json to_json(const RunReport& r) {
  auto group = [](const GroupStats& g) {
    return json{{"key", g.key},
                {"title", g.title},
                {"counts", counts_json(g.counts)},
                {"pass_rate_pct", pct_json(g.pass_rate_pct)},
                {"failure_rate_pct", pct_json(g.failure_rate_pct)},
                {"mean_score_pct", pct_json(g.mean_score_pct)}};
  };
  json per_issue = json::array();
  for (const auto& g : r.per_issue) {
    json j = group(g);
    j["issue_id"] = g.key;
    per_issue.push_back(j);
  }
  json per_tag = json::array();
  for (const auto& g : r.per_tag) {
    json j = group(g);
    j["tag"] = format_tag({TagKind::Domain, g.key});
    per_tag.push_back(j);
  }
  return {{"run_id", r.run_id},
          {"model", r.model},
          {"totals", counts_json(r.totals)},
          {"pass_rate_pct", pct_json(r.pass_rate_pct)},
          {"mean_score_pct", pct_json(r.mean_score_pct)},
          {"per_issue", per_issue},
          {"per_tag", per_tag},
          {"per_tag_overlaps", r.per_tag_overlaps},
          {"generated_at", timestamp_json(r.generated_at)}};
}

json to_json(const ComparisonReport& c) {
  json per_test = json::array();
  for (const auto& t : c.per_test) {
    per_test.push_back({{"test_id", t.test_id},
                        {"score_a", t.score_a},
                        {"score_b", t.score_b},
                        {"delta", t.score_a - t.score_b},
                        {"relation", to_string(t.relation)}});
  }
  json per_tag = json::array();
  for (const auto& [tag, counts] : c.per_tag) {
    json j = relation_json(counts);
    j["tag"] = format_tag({TagKind::Domain, tag});
    per_tag.push_back(j);
  }
  return {{"run_a", c.run_a},
          {"run_b", c.run_b},
          {"shared_test_ids", c.shared_test_ids},
          {"per_test", per_test},
          {"counts", relation_json(c.counts)},
          {"per_tag", per_tag}};
}

json to_json(const std::vector<TrendSeries>& series) {
  json out = json::array();
  for (const auto& s : series) {
    json points = json::array();
    for (const auto& p : s.points) {
      points.push_back({{"run_id", p.run_id},
                        {"model", p.model},
                        {"started_at", timestamp_json(p.started_at)},
                        {"pass_rate_pct", pct_json(p.pass_rate_pct)},
                        {"mean_score_pct", pct_json(p.mean_score_pct)}});
    }
    out.push_back({{"group_key", s.group_key}, {"points", points}});
  }
  return out;
}

std::string results_csv(const TestRun& run, const std::vector<TestResult>& results) {
  const auto tests = test_index(run);
  std::ostringstream out;
  out << "run_id,result_id,test_id,issue_id,domains,determination,mean_score,effective_score,"
         "valid_verdicts,invalid_verdicts,override_score\n";
  for (const auto& r : results) {
    auto t = tests.find(r.test_id);
    std::string domains;
    for (const auto& d : domains_of(run, r.test_id)) domains += (domains.empty() ? "" : ";") + d;
    std::size_t valid = 0;
    for (const auto& v : r.verdicts) valid += v.valid() ? 1 : 0;
    out << csv_field(run.id.str()) << ',' << csv_field(r.id.str()) << ',' << csv_field(r.test_id.str()) << ','
        << csv_field(t == tests.end() ? std::string{} : t->second->issue_id.str()) << ',' << csv_field(domains)
        << ',' << to_string(r.determination) << ',' << (r.mean_score ? number(*r.mean_score) : "") << ','
        << (r.effective_score() ? number(*r.effective_score()) : "") << ',' << valid << ','
        << (r.verdicts.size() - valid) << ',' << (r.override_ ? std::to_string(r.override_->score) : "") << '\n';
  }
  return out.str();
}

}  // namespace gradeline
