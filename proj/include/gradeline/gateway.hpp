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

#ifndef GRADELINE_GATEWAY_HPP_
#define GRADELINE_GATEWAY_HPP_

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradeline/config.hpp"
#include "gradeline/domain.hpp"
#include "json.hpp"

namespace gradeline {

enum class Purpose { TargetInference, Judging };
std::string_view to_string(Purpose p);

struct CompletionRequest {
  ModelRef model;
  std::string prompt;
  Purpose purpose = Purpose::TargetInference;
};

struct CompletionResult {
  std::string text;
  std::int64_t latency_ms = 0;
  int attempt_count = 1;
  std::map<std::string, std::string> provider_meta;
};

// Failure talking to a model endpoint. Carries the model, the purpose of the
// call and how many attempts were made before giving up.
class GatewayError : public Error {
 public:
  GatewayError(const std::string& what, std::string model, Purpose purpose, int attempts,
               std::optional<int> http_status = std::nullopt);
  const char* kind() const noexcept override { return "upstream_unavailable"; }
  const std::string& model() const { return model_; }
  Purpose purpose() const { return purpose_; }
  int attempt_count() const { return attempts_; }
  std::optional<int> http_status() const { return http_status_; }

 private:
  std::string model_;
  Purpose purpose_;
  int attempts_;
  std::optional<int> http_status_;
};

class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class ProtocolError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class TimeoutError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

enum class Health { Reachable, Unreachable, ModelMissing };
std::string_view to_string(Health h);

struct HealthStatus {
  Health state = Health::Unreachable;
  std::string reason;
  std::vector<std::string> available_models;
};

// Everything the orchestrator needs from a model backend.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
  virtual HealthStatus probe(const ModelRef& model) = 0;
};

// Wire helpers, exposed for tests.
std::string request_path(Provider provider);
nlohmann::json request_body(const CompletionRequest& request, const GatewayPolicy& policy);
// Throws std::invalid_argument describing the missing field.
std::string extract_completion_text(Provider provider, const nlohmann::json& body);

struct Endpoint {
  std::string scheme_host_port;  // "http://host:port"
  std::string path_prefix;       // "" or "/prefix" without trailing slash
};
Endpoint parse_base_url(const std::string& base_url);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class HttpGateway : public CompletionClient {
 public:
  explicit HttpGateway(GatewayPolicy policy, std::map<Provider, std::string> api_keys = {},
                       Sleeper sleeper = {});

  CompletionResult complete(const CompletionRequest& request) override;
  HealthStatus probe(const ModelRef& model) override;

  const GatewayPolicy& policy() const { return policy_; }

 private:
  GatewayPolicy policy_;
  std::map<Provider, std::string> api_keys_;
  Sleeper sleep_;
};

}  // namespace gradeline

#endif  // GRADELINE_GATEWAY_HPP_
