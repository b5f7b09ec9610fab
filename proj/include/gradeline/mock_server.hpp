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

#ifndef GRADELINE_MOCK_SERVER_HPP_
#define GRADELINE_MOCK_SERVER_HPP_

// In-process model endpoint speaking both the OpenAI-compatible and the Ollama
// wire formats. Used by the test suites and by the CLI's built-in "mock" model.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "gradeline/domain.hpp"

namespace httplib {
class Server;
}

namespace gradeline {

struct MockCall {
  Provider provider = Provider::OpenAICompatible;
  std::string model;
  std::string prompt;
  // 0-based count of earlier calls to the same model.
  int model_call_index = 0;
};

struct MockReply {
  int status = 200;
  std::string text;
  std::chrono::milliseconds delay{0};
};

using MockBehavior = std::function<MockReply(const MockCall&)>;

struct RecordedRequest {
  std::string path;
  std::string model;
  std::string prompt;
  std::string body;
  int status = 0;
  // False for requests that were still held by freeze() when released.
  bool answered = false;
};

class MockModelServer {
 public:
  MockModelServer();
  ~MockModelServer();
  MockModelServer(const MockModelServer&) = delete;
  MockModelServer& operator=(const MockModelServer&) = delete;

  void set_model(const std::string& name, MockBehavior behavior);

  // Binds 127.0.0.1 on an ephemeral port and serves on a background thread.
  void start();
  void stop();
  int port() const { return port_; }
  std::string base_url() const;

  std::vector<RecordedRequest> requests() const;
  std::size_t answered_count(const std::string& model) const;
  void clear_log();

  int max_in_flight() const { return max_in_flight_.load(); }
  int in_flight() const { return in_flight_.load(); }

  // While frozen, every new request is held without a reply. unfreeze()
  // releases held requests with HTTP 503 and marks them unanswered.
  void freeze();
  void unfreeze();
  std::size_t held_count() const;

 private:
  struct Handled {
    int status;
    std::string body;
  };
  Handled handle(Provider provider, const std::string& path, const std::string& body);

  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, MockBehavior> models_;
  std::map<std::string, int> call_counts_;
  std::vector<RecordedRequest> log_;
  bool frozen_ = false;
  bool stopping_ = false;
  std::size_t held_ = 0;

  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

MockBehavior fixed_reply(std::string text, std::chrono::milliseconds delay = {});
MockBehavior judge_reply(int score, std::string justification, std::chrono::milliseconds delay = {});
MockBehavior status_reply(int status);
// Replies with `status` for the first `failures` calls, then defers to `then`.
MockBehavior fail_first(int failures, int status, MockBehavior then);
// Judges-and-targets in one: judge prompts get score 1, everything else "OK".
MockBehavior builtin_mock_behavior();

}  // namespace gradeline

#endif  // GRADELINE_MOCK_SERVER_HPP_
