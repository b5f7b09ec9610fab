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

#ifndef GRADELINE_API_HPP_
#define GRADELINE_API_HPP_

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "gradeline/codec.hpp"
#include "gradeline/orchestrator.hpp"
#include "gradeline/repository.hpp"

namespace httplib {
class Server;
}

namespace gradeline {

// Maps a model designation (alias, "provider:model[@url]" or "mock") to a ModelRef.
using ModelResolver = std::function<ModelRef(const std::string&)>;

struct ApiErrorBody {
  int http_status = 500;
  json body;  // {"code", "message", "detail"}
};

// Translates the exception currently being handled into an ApiError.
ApiErrorBody api_error_from_current_exception();
ApiErrorBody api_error(int http_status, const std::string& code, const std::string& message,
                       json detail = nullptr);

// Parses a POST /runs body. `target` and each of `judges` may be a string
// (resolved through `resolve`) or a full ModelRef object.
RunSpec run_spec_from_json(const json& body, const ModelResolver& resolve);

class ApiServer {
 public:
  ApiServer(Repository& repo, Orchestrator& orchestrator, ModelResolver resolve);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // port 0 picks a free port. Returns the bound port; throws ConfigError.
  int bind(const std::string& host, int port);
  // Serves on a background thread.
  void start_background();
  // Serves on the calling thread until stop().
  void listen();
  void stop();
  int port() const { return port_; }
  std::string base_url() const;

  // Blocks until every run launched through this server has finished.
  void wait_for_runs();

 private:
  void routes();
  void launch(const RunId& id, bool resume);

  Repository& repo_;
  Orchestrator& orchestrator_;
  ModelResolver resolve_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;

  std::mutex runs_mu_;
  std::vector<std::jthread> runs_;
};

}  // namespace gradeline

#endif  // GRADELINE_API_HPP_
