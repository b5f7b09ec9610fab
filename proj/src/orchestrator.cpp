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

#include "gradeline/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <future>
#include <thread>

#include "gradeline/judge.hpp"

namespace gradeline {

ProviderLimiter::Permit::Permit(ProviderLimiter& owner, std::string key) : owner_(owner), key_(std::move(key)) {
  std::unique_lock lock(owner_.mu_);
  owner_.cv_.wait(lock, [&] { return owner_.in_use_[key_] < owner_.cap_; });
  ++owner_.in_use_[key_];
}

ProviderLimiter::Permit::~Permit() {
  {
    std::lock_guard lock(owner_.mu_);
    --owner_.in_use_[key_];
  }
  owner_.cv_.notify_all();
}

Orchestrator::Orchestrator(Repository& repo, CompletionClient& client, OrchestratorOptions options)
    : repo_(repo), client_(client), options_(options), limiter_(std::max(1, options.concurrency_per_provider)) {}

void Orchestrator::add_listener(ProgressListener listener) {
  std::lock_guard lock(mu_);
  listeners_.push_back(std::move(listener));
}

std::vector<Test> Orchestrator::select_tests(const TestSelection& selection) const {
  const auto state = repo_.snapshot();
  auto live = [&](const Test& t) {
    if (t.deleted) return false;
    auto it = state->issues.find(t.issue_id);
    return it != state->issues.end() && !it->second.hidden;
  };

  std::set<TestId> chosen;
  for (const auto& tid : selection.test_ids) {
    auto it = state->tests.find(tid);
    if (it == state->tests.end() || it->second.deleted) throw UnknownId("test", tid.str());
    chosen.insert(tid);
  }
  for (const auto& iid : selection.issue_ids) {
    if (!state->issues.contains(iid)) throw UnknownId("issue", iid.str());
    for (const auto& [tid, t] : state->tests) {
      if (t.issue_id == iid && !t.deleted) chosen.insert(tid);
    }
  }
  for (const auto& [tid, t] : state->tests) {
    if (!live(t)) continue;
    if (selection.empty()) {
      chosen.insert(tid);
      continue;
    }
    if (selection.tags.empty()) continue;
    const auto& issue_tags = state->issues.at(t.issue_id).tags;
    if (std::any_of(selection.tags.begin(), selection.tags.end(),
                    [&](const Tag& tag) { return issue_tags.contains(tag); })) {
      chosen.insert(tid);
    }
  }

  std::vector<Test> out;
  for (const auto& tid : chosen) out.push_back(state->tests.at(tid));
  std::sort(out.begin(), out.end(),
            [](const Test& a, const Test& b) { return std::tie(a.issue_id, a.id) < std::tie(b.issue_id, b.id); });
  return out;
}

TestRun Orchestrator::prepare_run(const RunSpec& spec) {
  if (spec.judges.empty()) throw ValidationFailed({{"judge_models", "at least one judge required"}}, "run");
  auto check_model = [](const ModelRef& m, const char* role) {
    if (auto v = validate_model(m); !v.ok()) {
      throw ConfigError(std::string(role) + " '" + m.identity() + "': " + v.violations.front().field + " " +
                        v.violations.front().rule);
    }
    parse_base_url(m.base_url);
  };
  check_model(spec.target, "target model");
  for (const auto& j : spec.judges) check_model(j, "judge model");

  const auto tests = select_tests(spec.selection);
  if (tests.empty()) throw ValidationFailed({{"selection", "selection matches no tests"}}, "run");

  TestRun run;
  run.target = spec.target;
  run.judges = spec.judges;
  run.selection = spec.selection;
  run.status = RunStatus::Pending;
  std::set<IssueId> issue_ids;
  for (const auto& t : tests) {
    run.test_ids.push_back(t.id);
    run.tests.push_back(t);
    issue_ids.insert(t.issue_id);
  }
  for (const auto& iid : issue_ids) {
    const Issue issue = repo_.get_issue(iid);
    run.issues.push_back({issue.id, issue.title, issue.tags});
  }
  return repo_.create_run(std::move(run));
}

TestRun Orchestrator::execute_run(const RunId& id, std::stop_token stop) {
  TestRun run = repo_.get_run(id);
  if (run.status != RunStatus::Pending) {
    throw Conflict("run '" + id.str() + "' is " + std::string(to_string(run.status)) + ", expected pending");
  }
  return drive(std::move(run), std::move(stop));
}

TestRun Orchestrator::resume_run(const RunId& id, std::stop_token stop) {
  TestRun run = repo_.get_run(id);
  if (run.status == RunStatus::Completed) return run;
  return drive(std::move(run), std::move(stop));
}

TestRun Orchestrator::drive(TestRun run, std::stop_token stop) {
  {
    std::lock_guard lock(mu_);
    if (!active_.insert(run.id).second) throw Conflict("run '" + run.id.str() + "' is already executing");
  }
  struct Release {
    Orchestrator& self;
    RunId id;
    ~Release() {
      std::lock_guard lock(self.mu_);
      self.active_.erase(id);
    }
  } release{*this, run.id};

  run.status = RunStatus::Running;
  run.failure_reason.reset();
  if (!run.started_at) run.started_at = now();
  run = repo_.update_run(run);
  notify(run.id);

  std::vector<const Test*> todo;
  for (const auto& t : run.tests) {
    if (!repo_.result_for(run.id, t.id)) todo.push_back(&t);
  }

  const int workers = std::max(1, options_.test_parallelism > 0 ? options_.test_parallelism
                                                                 : options_.concurrency_per_provider);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fault;
  std::mutex fault_mu;
  auto worker = [&] {
    while (!abort.load() && !stop.stop_requested()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      try {
        process_test(run, *todo[i]);
      } catch (...) {
        std::lock_guard lock(fault_mu);
        if (!fault) fault = std::current_exception();
        abort = true;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), todo.size());
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  }

  if (fault) {
    run = repo_.get_run(run.id);
    run.status = RunStatus::Failed;
    try {
      std::rethrow_exception(fault);
    } catch (const std::exception& e) {
      run.failure_reason = e.what();
    }
    try {
      repo_.update_run(run);
    } catch (const StorageUnavailable&) {
      // The store is the fault; the run stays resumable from its last commit.
    }
    std::rethrow_exception(fault);
  }

  run = repo_.get_run(run.id);
  if (run.progress.done()) {
    run.status = RunStatus::Completed;
    run.finished_at = now();
    run = repo_.update_run(run);
  }
  notify(run.id);
  return run;
}

CompletionResult Orchestrator::call(const CompletionRequest& request) {
  auto permit = limiter_.acquire(request.model.base_url);
  return client_.complete(request);
}

JudgeVerdict Orchestrator::ask_judge(const ModelRef& judge, const std::string& prompt) {
  JudgeVerdict verdict;
  for (int attempt = 0; attempt <= options_.judge_retry; ++attempt) {
    try {
      auto reply = call({judge, prompt, Purpose::Judging});
      verdict = parse_judge_reply(reply.text, judge.identity());
    } catch (const GatewayError& e) {
      verdict = JudgeVerdict{};
      verdict.judge_model = judge.identity();
      verdict.validity = Validity::Invalid;
      verdict.invalid_reason = std::string("judge call failed: ") + e.what();
    }
    if (verdict.valid()) break;
  }
  return verdict;
}

void Orchestrator::process_test(const TestRun& run, const Test& snapshot) {
  TestResult result;
  result.run_id = run.id;
  result.test_id = snapshot.id;

  bool missing = false;
  try {
    missing = repo_.get_test(snapshot.id).deleted;
  } catch (const UnknownId&) {
    missing = true;
  }
  if (missing) {
    result.determination = Determination::SelectionError;
    result.error = "test was removed from the repository after the run started";
    repo_.persist_result(std::move(result));
    notify(run.id);
    return;
  }

  if (auto cached = repo_.get_inference(run.id, snapshot.id)) {
    result.model_output = cached->model_output;
  } else {
    try {
      auto out = call({run.target, snapshot.input_prompt, Purpose::TargetInference});
      result.model_output = out.text;
      repo_.put_inference({run.id, snapshot.id, out.text, out.latency_ms, out.attempt_count, now()});
    } catch (const GatewayError& e) {
      result.determination = Determination::InferenceError;
      result.error = e.what();
      repo_.persist_result(std::move(result));
      notify(run.id);
      return;
    }
    notify(run.id);
  }

  const std::string prompt = render_judge_prompt(snapshot, result.model_output).text;
  std::vector<std::future<JudgeVerdict>> pending;
  for (const auto& judge : run.judges) {
    pending.push_back(std::async(std::launch::async, [this, &judge, &prompt] { return ask_judge(judge, prompt); }));
  }
  for (auto& f : pending) result.verdicts.push_back(f.get());

  const auto outcome = aggregate_verdicts(result.verdicts);
  result.mean_score = outcome.mean_score;
  result.determination = outcome.determination;
  repo_.persist_result(std::move(result));
  notify(run.id);
}

void Orchestrator::notify(const RunId& id) {
  std::vector<ProgressListener> listeners;
  {
    std::lock_guard lock(mu_);
    listeners = listeners_;
  }
  if (listeners.empty()) return;
  const auto progress = repo_.get_run(id).progress;
  for (const auto& l : listeners) l(id, progress);
}

}  // namespace gradeline
