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

#include "gradeline/repository.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gradeline {

namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kCompactEvery = 2000;
constexpr const char* kJournal = "journal.jsonl";
constexpr const char* kSnapshot = "snapshot.json";
constexpr const char* kLock = "lock";

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool intersects(const std::set<Tag>& a, const std::set<Tag>& b) {
  for (const auto& t : a) {
    if (b.contains(t)) return true;
  }
  return false;
}

void write_all(int fd, const std::string& data) {
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StorageUnavailable(std::string("journal write failed: ") + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string gunzip_file(const fs::path& path) {
  gzFile gz = gzopen(path.c_str(), "rb");
  if (!gz) throw IoError("cannot open '" + path.string() + "'");
  std::string out;
  char buf[1 << 15];
  int n;
  while ((n = gzread(gz, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(gz);
  if (failed) throw IoError("corrupt gzip stream in '" + path.string() + "'");
  return out;
}

template <class Map, class Key>
const auto& find_or_throw(const Map& m, const Key& key, const char* collection) {
  auto it = m.find(key);
  if (it == m.end()) throw UnknownId(collection, key.str());
  return it->second;
}

void require(const ValidationOutcome& v, const std::string& record) {
  if (!v.ok()) throw ValidationFailed(v.violations, record);
}

}  // namespace

json read_json_file(const fs::path& path) {
  std::string text;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    char magic[2] = {0, 0};
    in.read(magic, 2);
    const bool gz = in.gcount() == 2 && static_cast<unsigned char>(magic[0]) == 0x1f &&
                    static_cast<unsigned char>(magic[1]) == 0x8b;
    in.close();
    text = gz ? gunzip_file(path) : read_file_bytes(path);
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationFailed({{path.string(), std::string("not valid JSON: ") + e.what()}}, path.string());
  }
}

Repository::Repository(fs::path data_dir) : dir_(std::move(data_dir)) {
  for (const auto& d : default_domains()) state_.domains.insert(d);
  if (dir_.empty()) return;
  try {
    load();
  } catch (...) {
    if (journal_fd_ >= 0) ::close(journal_fd_);
    if (lock_fd_ >= 0) ::close(lock_fd_);
    throw;
  }
}

Repository::~Repository() {
  if (journal_fd_ >= 0) ::close(journal_fd_);
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void Repository::load() {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw StorageUnavailable("cannot create data dir '" + dir_.string() + "': " + ec.message());

  // One writer per directory; the kernel drops the lock if the process dies.
  lock_fd_ = ::open((dir_ / kLock).c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw StorageUnavailable("cannot open lock file: " + std::string(std::strerror(errno)));
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    throw StorageUnavailable("data dir '" + dir_.string() + "' is in use by another process");
  }

  const fs::path snap = dir_ / kSnapshot;
  if (fs::exists(snap)) {
    const json j = read_json_file(snap);
    state_.revision = j.at("revision").get<std::int64_t>();
    for (const auto& [collection, docs] : j.at("collections").items()) {
      for (const auto& doc : docs) apply(state_, {collection, doc});
    }
  }

  const fs::path journal = dir_ / kJournal;
  std::string text;
  if (fs::exists(journal)) text = read_file_bytes(journal);
  std::size_t good_end = 0;
  std::size_t pos = 0;
  std::int64_t line_no = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail from an interrupted append
    ++line_no;
    const auto parsed = json::parse(text.substr(pos, nl - pos), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("rev")) {
      if (text.find('\n', nl + 1) == std::string::npos) break;  // garbage last line
      throw StorageUnavailable("journal corrupt at line " + std::to_string(line_no));
    }
    const auto rev = parsed.at("rev").get<std::int64_t>();
    if (rev > state_.revision) {
      for (const auto& op : parsed.at("ops")) apply(state_, {op.at("c").get<std::string>(), op.at("doc")});
      state_.revision = rev;
      ++journal_commits_;
    }
    pos = nl + 1;
    good_end = pos;
  }

  journal_fd_ = ::open(journal.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (journal_fd_ < 0) {
    throw StorageUnavailable("cannot open journal '" + journal.string() + "': " + std::strerror(errno));
  }
  if (good_end < text.size() && ::ftruncate(journal_fd_, static_cast<off_t>(good_end)) != 0) {
    throw StorageUnavailable("cannot truncate torn journal tail");
  }
}

void Repository::apply(StoreState& s, const Op& op) {
  const auto& c = op.collection;
  if (c == "issues") {
    auto v = op.doc.get<Issue>();
    s.issues[v.id] = std::move(v);
  } else if (c == "feedback") {
    auto v = op.doc.get<Feedback>();
    s.feedback[v.id] = std::move(v);
  } else if (c == "tests") {
    auto v = op.doc.get<Test>();
    s.tests[v.id] = std::move(v);
  } else if (c == "runs") {
    auto v = op.doc.get<TestRun>();
    s.runs[v.id] = std::move(v);
  } else if (c == "results") {
    auto v = op.doc.get<TestResult>();
    s.result_index[{v.run_id, v.test_id}] = v.id;
    s.results[v.id] = std::move(v);
  } else if (c == "inferences") {
    auto v = op.doc.get<InferenceRecord>();
    s.inferences[{v.run_id, v.test_id}] = std::move(v);
  } else if (c == "domains") {
    s.domains.insert(op.doc.get<std::string>());
  } else {
    throw StorageUnavailable("unknown collection '" + c + "' in journal");
  }
}

void Repository::commit(std::vector<Op> ops) {
  if (ops.empty()) return;
  if (fail_writes_) throw StorageUnavailable("storage is unavailable");
  const std::int64_t rev = state_.revision + 1;
  if (journal_fd_ >= 0) {
    json arr = json::array();
    for (const auto& op : ops) arr.push_back({{"c", op.collection}, {"doc", op.doc}});
    const off_t before = ::lseek(journal_fd_, 0, SEEK_END);
    try {
      write_all(journal_fd_, json{{"rev", rev}, {"ops", std::move(arr)}}.dump() + "\n");
      if (::fdatasync(journal_fd_) != 0) {
        throw StorageUnavailable(std::string("journal sync failed: ") + std::strerror(errno));
      }
    } catch (...) {
      // Drop the partial line so later commits do not land behind garbage.
      if (before >= 0 && ::ftruncate(journal_fd_, before) != 0) {
        // Nothing more to do; load() discards a torn tail.
      }
      throw;
    }
  }
  {
    std::unique_lock lock(state_mu_);
    for (const auto& op : ops) apply(state_, op);
    state_.revision = rev;
  }
  if (journal_fd_ >= 0 && ++journal_commits_ >= kCompactEvery) compact_locked();
}

void Repository::compact() {
  std::lock_guard guard(commit_mu_);
  compact_locked();
}

void Repository::compact_locked() {
  if (dir_.empty()) return;
  json collections = {{"issues", json::array()},  {"feedback", json::array()}, {"tests", json::array()},
                      {"runs", json::array()},    {"results", json::array()},  {"inferences", json::array()},
                      {"domains", json::array()}};
  std::int64_t rev;
  {
    std::shared_lock lock(state_mu_);
    rev = state_.revision;
    for (const auto& [_, v] : state_.issues) collections["issues"].push_back(v);
    for (const auto& [_, v] : state_.feedback) collections["feedback"].push_back(v);
    for (const auto& [_, v] : state_.tests) collections["tests"].push_back(v);
    for (const auto& [_, v] : state_.runs) collections["runs"].push_back(v);
    for (const auto& [_, v] : state_.results) collections["results"].push_back(v);
    for (const auto& [_, v] : state_.inferences) collections["inferences"].push_back(v);
    for (const auto& d : state_.domains) collections["domains"].push_back(d);
  }
  const fs::path tmp = dir_ / (std::string(kSnapshot) + ".tmp");
  {
    const std::string data = json{{"revision", rev}, {"collections", collections}}.dump();
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw StorageUnavailable("cannot write snapshot: " + std::string(std::strerror(errno)));
    try {
      write_all(fd, data);
    } catch (...) {
      ::close(fd);
      throw;
    }
    ::fsync(fd);
    ::close(fd);
  }
  std::error_code ec;
  fs::rename(tmp, dir_ / kSnapshot, ec);
  if (ec) throw StorageUnavailable("cannot install snapshot: " + ec.message());
  fsync_dir(dir_);
  // Journal entries at or below the snapshot revision are skipped on replay,
  // so a crash before this truncate is harmless.
  if (::ftruncate(journal_fd_, 0) != 0) throw StorageUnavailable("cannot truncate journal");
  journal_commits_ = 0;
}

void Repository::inject_write_failure(bool fail) {
  std::lock_guard guard(commit_mu_);
  fail_writes_ = fail;
}

std::int64_t Repository::revision() const {
  std::shared_lock lock(state_mu_);
  return state_.revision;
}

std::shared_ptr<const StoreState> Repository::snapshot() const {
  std::shared_lock lock(state_mu_);
  return std::make_shared<const StoreState>(state_);
}

std::set<std::string> Repository::domains() const {
  std::shared_lock lock(state_mu_);
  return state_.domains;
}

void Repository::register_domain(const std::string& domain) {
  std::lock_guard guard(commit_mu_);
  if (domain.empty()) throw ValidationFailed({{"domain", "must be non-empty"}}, "tag");
  if (state_.domains.contains(domain)) return;
  commit({{"domains", domain}});
}

Issue Repository::create_issue(const IssueDraft& draft) {
  std::lock_guard guard(commit_mu_);
  Issue issue;
  issue.id = draft.id.value_or(IssueId{new_ulid()});
  if (state_.issues.contains(issue.id)) throw DuplicateId(issue.id.str());
  issue.title = draft.title;
  issue.description = draft.description;
  issue.tags = draft.tags;
  issue.status = draft.status;
  issue.created_at = issue.updated_at = now();
  require(validate_issue(issue, state_.domains), "issue");
  commit({{"issues", issue}});
  return issue;
}

Issue Repository::update_issue(const IssueId& id, const IssuePatch& patch) {
  std::lock_guard guard(commit_mu_);
  Issue issue = find_or_throw(state_.issues, id, "issue");
  const auto at = now();
  if (patch.title) issue.title = *patch.title;
  if (patch.description) issue.description = *patch.description;
  if (patch.tags) issue.tags = *patch.tags;
  if (patch.hidden) issue.hidden = *patch.hidden;
  if (patch.status && *patch.status != issue.status) issue = transition_issue_status(std::move(issue), *patch.status, at);
  issue.updated_at = at;
  require(validate_issue(issue, state_.domains), id.str());
  commit({{"issues", issue}});
  return issue;
}

Issue Repository::get_issue(const IssueId& id) const {
  std::shared_lock lock(state_mu_);
  return find_or_throw(state_.issues, id, "issue");
}

std::vector<Issue> Repository::list_issues(const IssueFilter& filter) const {
  std::vector<Issue> out;
  const std::string needle = lower(filter.text);
  {
    std::shared_lock lock(state_mu_);
    for (const auto& [_, issue] : state_.issues) {
      if (issue.hidden && !filter.include_hidden) continue;
      if (!filter.tags.empty() && !intersects(filter.tags, issue.tags)) continue;
      if (filter.status && issue.status != *filter.status) continue;
      if (!needle.empty() && lower(issue.title + "\n" + issue.description).find(needle) == std::string::npos) {
        continue;
      }
      out.push_back(issue);
    }
  }
  std::sort(out.begin(), out.end(), [](const Issue& a, const Issue& b) {
    return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
  });
  return out;
}

Issue Repository::delete_issue(const IssueId& id) {
  IssuePatch patch;
  patch.status = IssueStatus::WontFix;
  patch.hidden = true;
  return update_issue(id, patch);
}

Test Repository::add_test(const IssueId& issue_id, Test draft, const std::optional<TestId>& inherit_from) {
  std::lock_guard guard(commit_mu_);
  find_or_throw(state_.issues, issue_id, "issue");
  if (inherit_from) {
    const Test& sibling = find_or_throw(state_.tests, *inherit_from, "test");
    if (sibling.issue_id != issue_id) {
      throw ValidationFailed({{"inherit_from", "guidelines can only be inherited within the same issue"}}, "test");
    }
    if (draft.judge_guidelines.empty()) draft.judge_guidelines = sibling.judge_guidelines;
  }
  if (draft.id.empty()) draft.id = TestId{new_ulid()};
  if (state_.tests.contains(draft.id)) throw DuplicateId(draft.id.str());
  draft.issue_id = issue_id;
  draft.created_at = now();
  draft.deleted = false;
  require(validate_test(draft), draft.id.str());
  commit({{"tests", draft}});
  return draft;
}

Test Repository::get_test(const TestId& id) const {
  std::shared_lock lock(state_mu_);
  return find_or_throw(state_.tests, id, "test");
}

std::vector<Test> Repository::list_tests(const std::set<Tag>& tags, const std::optional<IssueId>& issue,
                                         bool include_deleted) const {
  std::vector<Test> out;
  std::shared_lock lock(state_mu_);
  for (const auto& [_, t] : state_.tests) {
    if (t.deleted && !include_deleted) continue;
    if (issue && t.issue_id != *issue) continue;
    if (!tags.empty()) {
      auto it = state_.issues.find(t.issue_id);
      if (it == state_.issues.end() || !intersects(tags, it->second.tags)) continue;
    }
    out.push_back(t);
  }
  std::sort(out.begin(), out.end(),
            [](const Test& a, const Test& b) { return std::tie(a.issue_id, a.id) < std::tie(b.issue_id, b.id); });
  return out;
}

Test Repository::delete_test(const TestId& id) {
  std::lock_guard guard(commit_mu_);
  Test t = find_or_throw(state_.tests, id, "test");
  t.deleted = true;
  commit({{"tests", t}});
  return t;
}

Issue Repository::attach_feedback(const IssueId& issue_id, Feedback feedback) {
  std::lock_guard guard(commit_mu_);
  Issue issue = find_or_throw(state_.issues, issue_id, "issue");
  if (feedback.id.empty()) feedback.id = FeedbackId{new_ulid()};
  require(validate_feedback(feedback), feedback.id.str());
  std::vector<Op> ops;
  if (auto it = state_.feedback.find(feedback.id); it != state_.feedback.end()) {
    const Feedback& stored = it->second;
    if (stored.user_input != feedback.user_input || stored.model_output != feedback.model_output ||
        stored.signal != feedback.signal || stored.source_model != feedback.source_model) {
      throw Conflict("feedback '" + feedback.id.str() + "' is immutable and differs from the stored record");
    }
  } else {
    if (feedback.received_at == Timestamp{}) feedback.received_at = now();
    ops.push_back({"feedback", feedback});
  }
  if (std::find(issue.feedback_ids.begin(), issue.feedback_ids.end(), feedback.id) == issue.feedback_ids.end()) {
    issue.feedback_ids.push_back(feedback.id);
    issue.updated_at = now();
    ops.push_back({"issues", issue});
  }
  commit(std::move(ops));
  return issue;
}

Feedback Repository::get_feedback(const FeedbackId& id) const {
  std::shared_lock lock(state_mu_);
  return find_or_throw(state_.feedback, id, "feedback");
}

SeedCounts Repository::import_seed(const json& bundle, bool replace) {
  if (!bundle.is_object()) throw ValidationFailed({{"bundle", "must be a JSON object"}}, "bundle");
  const int version = bundle.value("format_version", 0);
  if (version != kSeedFormatVersion) {
    throw ValidationFailed({{"format_version", "unsupported version " + std::to_string(version)}}, "bundle");
  }
  if (!bundle.contains("issues") || !bundle["issues"].is_array()) {
    throw ValidationFailed({{"issues", "must be an array"}}, "bundle");
  }

  std::lock_guard guard(commit_mu_);
  std::set<std::string> domains = state_.domains;
  std::vector<Op> ops;
  for (const auto& d : bundle.value("domains", std::vector<std::string>{})) {
    if (!domains.contains(d)) {
      domains.insert(d);
      ops.push_back({"domains", d});
    }
  }

  std::set<IssueId> issue_ids;
  std::set<TestId> test_ids;
  std::set<FeedbackId> feedback_ids;
  SeedCounts counts;
  const auto base = now();
  std::int64_t ordinal = 0;
  for (const auto& ij : bundle["issues"]) {
    Issue issue = decode<Issue>(ij, "issue");
    const std::string label = "issue '" + issue.id.str() + "'";
    if (issue.id.empty()) throw ValidationFailed({{"id", "bundle issues need an id"}}, "issue");
    if (!issue_ids.insert(issue.id).second) throw DuplicateId(issue.id.str());
    if (!replace && state_.issues.contains(issue.id)) throw DuplicateId(issue.id.str());
    // Bundle order becomes listing order.
    if (!ij.contains("created_at")) issue.created_at = base + std::chrono::milliseconds{ordinal++};
    issue.updated_at = issue.created_at;
    require(validate_issue(issue, domains), label);

    issue.feedback_ids.clear();
    for (const auto& fj : ij.value("feedback", json::array())) {
      Feedback fb = decode<Feedback>(fj, "feedback");
      if (fb.id.empty()) throw ValidationFailed({{"id", "bundle feedback needs an id"}}, label);
      if (!feedback_ids.insert(fb.id).second) throw DuplicateId(fb.id.str());
      if (!replace && state_.feedback.contains(fb.id)) throw DuplicateId(fb.id.str());
      require(validate_feedback(fb), "feedback '" + fb.id.str() + "'");
      if (fb.received_at == Timestamp{}) fb.received_at = issue.created_at;
      issue.feedback_ids.push_back(fb.id);
      ops.push_back({"feedback", fb});
      ++counts.feedback;
    }
    for (const auto& tj : ij.value("tests", json::array())) {
      Test t = decode<Test>(tj, "test");
      if (t.id.empty()) throw ValidationFailed({{"id", "bundle tests need an id"}}, label);
      if (!test_ids.insert(t.id).second) throw DuplicateId(t.id.str());
      if (!replace && state_.tests.contains(t.id)) throw DuplicateId(t.id.str());
      if (!t.issue_id.empty() && t.issue_id != issue.id) {
        throw ValidationFailed({{"issue_id", "inline test belongs to its enclosing issue"}}, "test '" + t.id.str() + "'");
      }
      t.issue_id = issue.id;
      if (!tj.contains("created_at")) t.created_at = issue.created_at;
      require(validate_test(t), "test '" + t.id.str() + "'");
      ops.push_back({"tests", t});
      ++counts.tests;
    }
    ops.push_back({"issues", issue});
    ++counts.issues;
  }
  commit(std::move(ops));
  return counts;
}

json Repository::export_seed() const {
  json issues = json::array();
  for (const auto& issue : list_issues()) {
    json ij = issue;
    ij.erase("status_history");
    ij.erase("hidden");
    ij.erase("feedback_ids");
    json fbs = json::array();
    for (const auto& fid : issue.feedback_ids) fbs.push_back(get_feedback(fid));
    json tests = json::array();
    for (const auto& t : list_tests({}, issue.id)) {
      json tj = t;
      tj.erase("deleted");
      tj.erase("issue_id");
      tests.push_back(tj);
    }
    ij["feedback"] = fbs;
    ij["tests"] = tests;
    issues.push_back(ij);
  }
  std::vector<std::string> extra;
  for (const auto& d : domains()) {
    if (std::find(default_domains().begin(), default_domains().end(), d) == default_domains().end()) extra.push_back(d);
  }
  return {{"format_version", kSeedFormatVersion},
          {"provenance", "exported store"},
          {"domains", extra},
          {"issues", issues}};
}

TestRun Repository::create_run(TestRun run) {
  std::lock_guard guard(commit_mu_);
  if (run.id.empty()) run.id = RunId{new_ulid()};
  if (state_.runs.contains(run.id)) throw DuplicateId(run.id.str());
  if (run.judges.empty()) throw ValidationFailed({{"judge_models", "at least one judge required"}}, "run");
  require(validate_model(run.target), "target_model");
  for (const auto& j : run.judges) require(validate_model(j), "judge_models");
  if (run.created_at == Timestamp{}) run.created_at = now();
  run.result_ids.clear();
  run.progress = RunProgress{static_cast<std::int64_t>(run.test_ids.size()), 0, 0, 0};
  commit({{"runs", run}});
  return run;
}

TestRun Repository::update_run(const TestRun& run) {
  std::lock_guard guard(commit_mu_);
  find_or_throw(state_.runs, run.id, "run");
  TestRun stored = run;
  stored.result_ids.clear();
  commit({{"runs", stored}});
  return get_run(run.id);
}

RunProgress Repository::progress_locked(const StoreState& s, const TestRun& run) const {
  RunProgress p;
  p.total = static_cast<std::int64_t>(run.test_ids.size());
  for (const auto& tid : run.test_ids) {
    const bool has_inference = s.inferences.contains({run.id, tid});
    auto rit = s.result_index.find({run.id, tid});
    if (rit == s.result_index.end()) {
      p.inferred += has_inference ? 1 : 0;
      continue;
    }
    const auto& r = s.results.at(rit->second);
    if (r.determination == Determination::InferenceError || r.determination == Determination::SelectionError) {
      ++p.errored;
    } else {
      ++p.judged;
      ++p.inferred;
    }
  }
  return p;
}

TestRun Repository::get_run(const RunId& id) const {
  std::shared_lock lock(state_mu_);
  TestRun run = find_or_throw(state_.runs, id, "run");
  run.result_ids.clear();
  for (const auto& tid : run.test_ids) {
    if (auto it = state_.result_index.find({id, tid}); it != state_.result_index.end()) run.result_ids.push_back(it->second);
  }
  run.progress = progress_locked(state_, run);
  return run;
}

std::vector<TestRun> Repository::list_runs() const {
  std::vector<RunId> ids;
  {
    std::shared_lock lock(state_mu_);
    for (const auto& [id, _] : state_.runs) ids.push_back(id);
  }
  std::vector<TestRun> out;
  for (const auto& id : ids) out.push_back(get_run(id));
  std::sort(out.begin(), out.end(), [](const TestRun& a, const TestRun& b) {
    return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
  });
  return out;
}

void Repository::put_inference(const InferenceRecord& record) {
  std::lock_guard guard(commit_mu_);
  find_or_throw(state_.runs, record.run_id, "run");
  if (state_.inferences.contains({record.run_id, record.test_id})) {
    throw Conflict("inference for test '" + record.test_id.str() + "' already recorded");
  }
  commit({{"inferences", record}});
}

std::optional<InferenceRecord> Repository::get_inference(const RunId& run, const TestId& test) const {
  std::shared_lock lock(state_mu_);
  auto it = state_.inferences.find({run, test});
  if (it == state_.inferences.end()) return std::nullopt;
  return it->second;
}

TestResult Repository::persist_result(TestResult result) {
  std::lock_guard guard(commit_mu_);
  const TestRun& run = find_or_throw(state_.runs, result.run_id, "run");
  if (std::find(run.test_ids.begin(), run.test_ids.end(), result.test_id) == run.test_ids.end()) {
    throw ValidationFailed({{"test_id", "test is not part of run '" + run.id.str() + "'"}}, result.test_id.str());
  }
  if (state_.result_index.contains({result.run_id, result.test_id})) {
    throw Conflict("run '" + result.run_id.str() + "' already has a result for test '" + result.test_id.str() + "'");
  }
  if (result.id.empty()) result.id = ResultId{new_ulid()};
  if (state_.results.contains(result.id)) throw DuplicateId(result.id.str());
  if (result.created_at == Timestamp{}) result.created_at = now();
  for (const auto& v : result.verdicts) require(validate_verdict(v), result.id.str());
  commit({{"results", result}});
  return result;
}

TestResult Repository::get_result(const ResultId& id) const {
  std::shared_lock lock(state_mu_);
  return find_or_throw(state_.results, id, "result");
}

std::optional<TestResult> Repository::result_for(const RunId& run, const TestId& test) const {
  std::shared_lock lock(state_mu_);
  auto it = state_.result_index.find({run, test});
  if (it == state_.result_index.end()) return std::nullopt;
  return state_.results.at(it->second);
}

std::vector<TestResult> Repository::results_for_run(const RunId& run_id) const {
  std::shared_lock lock(state_mu_);
  const TestRun& run = find_or_throw(state_.runs, run_id, "run");
  std::vector<TestResult> out;
  for (const auto& tid : run.test_ids) {
    if (auto it = state_.result_index.find({run_id, tid}); it != state_.result_index.end()) {
      out.push_back(state_.results.at(it->second));
    }
  }
  return out;
}

TestResult Repository::set_override(const ResultId& id, HumanOverride override_) {
  std::lock_guard guard(commit_mu_);
  TestResult r = find_or_throw(state_.results, id, "result");
  require(validate_override(override_), id.str());
  if (override_.created_at == Timestamp{}) override_.created_at = now();
  r.override_history.push_back(override_);
  r.override_ = std::move(override_);
  std::size_t valid = 0;
  for (const auto& v : r.verdicts) valid += v.valid() ? 1 : 0;
  r.determination = determine(r.mean_score, valid, r.override_);
  commit({{"results", r}});
  return r;
}

json Repository::export_run(const RunId& id) const {
  const TestRun run = get_run(id);
  json results = json::array();
  for (const auto& r : results_for_run(id)) results.push_back(r);
  return {{"format_version", kRunExportFormatVersion}, {"run", run}, {"results", results}};
}

void Repository::export_run_to_file(const RunId& id, const fs::path& path) const {
  const std::string data = export_run(id).dump(2) + "\n";
  if (path.extension() == ".gz") {
    gzFile gz = gzopen(path.c_str(), "wb9");
    if (!gz) throw IoError("cannot write '" + path.string() + "'");
    const int n = gzwrite(gz, data.data(), static_cast<unsigned>(data.size()));
    if (gzclose(gz) != Z_OK || n != static_cast<int>(data.size())) throw IoError("gzip write failed for '" + path.string() + "'");
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << data;
  if (!out.flush()) throw IoError("write failed for '" + path.string() + "'");
}

RunId Repository::import_run(const json& document) {
  if (!document.is_object() || document.value("format_version", 0) != kRunExportFormatVersion) {
    throw ValidationFailed({{"format_version", "unsupported run export"}}, "run export");
  }
  TestRun run = decode<TestRun>(document.at("run"), "run");
  auto results = decode<std::vector<TestResult>>(document.value("results", json::array()), "results");

  std::lock_guard guard(commit_mu_);
  const RunId original = run.id;
  if (run.id.empty() || state_.runs.contains(run.id)) {
    run.imported_from = original.str();
    run.id = RunId{new_ulid()};
  }
  run.result_ids.clear();
  std::set<TestId> seen;
  std::vector<Op> ops;
  ops.push_back({"runs", run});
  for (auto& r : results) {
    if (std::find(run.test_ids.begin(), run.test_ids.end(), r.test_id) == run.test_ids.end()) {
      throw ValidationFailed({{"test_id", "result for a test outside the run"}}, r.id.str());
    }
    if (!seen.insert(r.test_id).second) throw DuplicateId(r.test_id.str());
    r.run_id = run.id;
    if (state_.results.contains(r.id)) r.id = ResultId{new_ulid()};
    ops.push_back({"results", r});
  }
  commit(std::move(ops));
  return run.id;
}

RunId Repository::import_run_from_file(const fs::path& path) { return import_run(read_json_file(path)); }

}  // namespace gradeline
