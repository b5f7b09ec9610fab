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

#ifndef GRADELINE_ORCHESTRATOR_HPP_
#define GRADELINE_ORCHESTRATOR_HPP_

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stop_token>
#include <string>
#include <vector>

#include "gradeline/domain.hpp"
#include "gradeline/gateway.hpp"
#include "gradeline/repository.hpp"

namespace gradeline {

struct OrchestratorOptions {
  // Upper bound on in-flight requests to one base_url, across all runs.
  int concurrency_per_provider = 4;
  // Re-asks of a judge whose reply was unparseable or whose call failed.
  int judge_retry = 1;
  // Tests processed at once per run; 0 means concurrency_per_provider.
  int test_parallelism = 0;
};

struct RunSpec {
  ModelRef target;
  std::vector<ModelRef> judges;
  TestSelection selection;
};

using ProgressListener = std::function<void(const RunId&, const RunProgress&)>;

// Counting semaphore keyed by endpoint.
class ProviderLimiter {
 public:
  explicit ProviderLimiter(int per_provider) : cap_(per_provider) {}

  class Permit {
   public:
    Permit(ProviderLimiter& owner, std::string key);
    ~Permit();
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    ProviderLimiter& owner_;
    std::string key_;
  };

  Permit acquire(const std::string& key) { return Permit(*this, key); }
  int cap() const { return cap_; }

 private:
  int cap_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, int> in_use_;
};

class Orchestrator {
 public:
  Orchestrator(Repository& repo, CompletionClient& client, OrchestratorOptions options = {});

  // Union of tag matches, explicit tests and tests of explicit issues, ordered
  // by (issue id, test id); everything live when the selection is empty.
  std::vector<Test> select_tests(const TestSelection& selection) const;

  // Validates the RunSpec, resolves the selection and stores a pending run that
  // carries snapshots of the selected tests and their issues.
  TestRun prepare_run(const RunSpec& spec);

  // Runs a pending run to completion. A stop request leaves the run in the
  // running state with whatever results were persisted; resume_run() finishes it.
  TestRun execute_run(const RunId& id, std::stop_token stop = {});

  // Computes only missing results; a completed run is returned untouched.
  TestRun resume_run(const RunId& id, std::stop_token stop = {});

  void add_listener(ProgressListener listener);

 private:
  TestRun drive(TestRun run, std::stop_token stop);
  void process_test(const TestRun& run, const Test& snapshot);
  JudgeVerdict ask_judge(const ModelRef& judge, const std::string& prompt);
  CompletionResult call(const CompletionRequest& request);
  void notify(const RunId& id);

  Repository& repo_;
  CompletionClient& client_;
  OrchestratorOptions options_;
  ProviderLimiter limiter_;

  std::mutex mu_;
  std::set<RunId> active_;
  std::vector<ProgressListener> listeners_;
};

}  // namespace gradeline

#endif  // GRADELINE_ORCHESTRATOR_HPP_
