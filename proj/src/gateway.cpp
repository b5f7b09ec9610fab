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

#include "gradeline/gateway.hpp"

#include <stdexcept>
#include <thread>

#include "httplib.h"

namespace gradeline {

using nlohmann::json;

std::string_view to_string(Purpose p) {
  return p == Purpose::Judging ? "judging" : "target_inference";
}

std::string_view to_string(Health h) {
  switch (h) {
    case Health::Reachable: return "reachable";
    case Health::Unreachable: return "unreachable";
    case Health::ModelMissing: return "model_missing";
  }
  return "?";
}

GatewayError::GatewayError(const std::string& what, std::string model, Purpose purpose, int attempts,
                           std::optional<int> http_status)
    : Error(what + " [model " + model + ", " + std::string(to_string(purpose)) + ", attempts " +
            std::to_string(attempts) + "]"),
      model_(std::move(model)),
      purpose_(purpose),
      attempts_(attempts),
      http_status_(http_status) {}

std::string request_path(Provider provider) {
  return provider == Provider::Ollama ? "/api/generate" : "/v1/chat/completions";
}

json request_body(const CompletionRequest& request, const GatewayPolicy& policy) {
  GenerationParams params = request.model.params;
  if (request.purpose == Purpose::Judging) {
    params.temperature = 0.0;
    if (!params.seed) params.seed = policy.judge_seed;
  }
  json body;
  if (request.model.provider == Provider::Ollama) {
    json options = {{"temperature", params.temperature}, {"num_predict", params.max_tokens}};
    if (params.seed) options["seed"] = *params.seed;
    body = {{"model", request.model.model_name},
            {"prompt", request.prompt},
            {"stream", false},
            {"options", options}};
  } else {
    body = {{"model", request.model.model_name},
            {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", params.temperature},
            {"max_tokens", params.max_tokens}};
    if (params.seed) body["seed"] = *params.seed;
  }
  return body;
}

std::string extract_completion_text(Provider provider, const json& body) {
  if (!body.is_object()) throw std::invalid_argument("response is not a JSON object");
  if (provider == Provider::Ollama) {
    auto it = body.find("response");
    if (it == body.end() || !it->is_string()) throw std::invalid_argument("missing 'response'");
    return it->get<std::string>();
  }
  auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) {
    throw std::invalid_argument("missing 'choices[0]'");
  }
  const auto& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    throw std::invalid_argument("missing 'choices[0].message'");
  }
  const auto& content = first["message"].find("content");
  if (content == first["message"].end()) throw std::invalid_argument("missing 'choices[0].message.content'");
  if (content->is_null()) return {};
  if (!content->is_string()) throw std::invalid_argument("'choices[0].message.content' is not a string");
  return content->get<std::string>();
}

Endpoint parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url needs a scheme: '" + base_url + "'");
  const auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = base_url.substr(0, path_start);
  if (path_start != std::string::npos) {
    e.path_prefix = base_url.substr(path_start);
    while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  }
  return e;
}

namespace {

std::unique_ptr<httplib::Client> make_client(const Endpoint& ep, std::chrono::milliseconds timeout) {
  auto client = std::make_unique<httplib::Client>(ep.scheme_host_port);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client->set_connection_timeout(secs, usecs);
  client->set_read_timeout(secs, usecs);
  client->set_write_timeout(secs, usecs);
  client->set_keep_alive(false);
  return client;
}

}  // namespace

HttpGateway::HttpGateway(GatewayPolicy policy, std::map<Provider, std::string> api_keys, Sleeper sleeper)
    : policy_(policy), api_keys_(std::move(api_keys)), sleep_(std::move(sleeper)) {
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

CompletionResult HttpGateway::complete(const CompletionRequest& request) {
  const std::string model = request.model.identity();
  if (request.purpose == Purpose::Judging && request.prompt.empty()) {
    throw ProtocolError("empty judge prompt", model, request.purpose, 0);
  }
  Endpoint ep;
  try {
    ep = parse_base_url(request.model.base_url);
  } catch (const ConfigError& e) {
    throw TransportError(e.what(), model, request.purpose, 0);
  }
  const std::string path = ep.path_prefix + request_path(request.model.provider);
  const std::string body = request_body(request, policy_).dump();
  httplib::Headers headers;
  if (auto it = api_keys_.find(request.model.provider); it != api_keys_.end() && !it->second.empty()) {
    headers.emplace("Authorization", "Bearer " + it->second);
  }

  const int max_attempts = policy_.retry_limit + 1;
  std::string last_error;
  bool last_was_timeout = false;
  std::optional<int> last_status;
  const auto started = std::chrono::steady_clock::now();
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1) sleep_(policy_.backoff_base * (1LL << (attempt - 2)));
    auto client = make_client(ep, policy_.timeout);
    const auto t0 = std::chrono::steady_clock::now();
    auto res = client->Post(path, headers, body, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    if (!res) {
      last_status.reset();
      last_was_timeout = (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
                          res.error() == httplib::Error::ConnectionTimeout) &&
                         elapsed >= policy_.timeout * 9 / 10;
      last_error = last_was_timeout ? "request deadline of " + std::to_string(policy_.timeout.count()) +
                                          " ms exceeded"
                                    : "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    last_status = res->status;
    last_was_timeout = false;
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400 || res->status < 200 || res->status >= 300) {
      throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200), model,
                           request.purpose, attempt, res->status);
    }
    CompletionResult out;
    try {
      out.text = extract_completion_text(request.model.provider, json::parse(res->body));
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("response is not JSON: ") + e.what(), model, request.purpose, attempt,
                          res->status);
    } catch (const std::invalid_argument& e) {
      throw ProtocolError(std::string("unexpected response shape: ") + e.what(), model, request.purpose,
                          attempt, res->status);
    }
    out.attempt_count = attempt;
    out.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    out.provider_meta["http_status"] = std::to_string(res->status);
    out.provider_meta["provider"] = std::string(to_string(request.model.provider));
    return out;
  }
  if (last_was_timeout) throw TimeoutError(last_error, model, request.purpose, max_attempts);
  throw TransportError(last_error, model, request.purpose, max_attempts, last_status);
}

HealthStatus HttpGateway::probe(const ModelRef& model) {
  HealthStatus status;
  try {
    const Endpoint ep = parse_base_url(model.base_url);
    auto client = make_client(ep, std::min(policy_.timeout, std::chrono::milliseconds{5000}));
    const bool ollama = model.provider == Provider::Ollama;
    auto res = client->Get(ep.path_prefix + (ollama ? "/api/tags" : "/v1/models"));
    if (!res) {
      status.state = Health::Unreachable;
      status.reason = httplib::to_string(res.error());
      return status;
    }
    status.state = Health::Reachable;
    if (res->status != 200) {
      status.reason = "model listing returned HTTP " + std::to_string(res->status);
      return status;
    }
    const auto body = json::parse(res->body, nullptr, false);
    const auto list_key = ollama ? "models" : "data";
    const auto name_key = ollama ? "name" : "id";
    if (body.is_object() && body.contains(list_key) && body[list_key].is_array()) {
      for (const auto& m : body[list_key]) {
        if (m.is_object() && m.contains(name_key) && m[name_key].is_string()) {
          status.available_models.push_back(m[name_key].get<std::string>());
        }
      }
    }
    bool found = false;
    for (const auto& name : status.available_models) {
      if (name == model.model_name || (ollama && name == model.model_name + ":latest")) found = true;
    }
    if (!found) {
      status.state = Health::ModelMissing;
      status.reason = "endpoint does not list model '" + model.model_name + "'";
    }
  } catch (const std::exception& e) {
    status.state = Health::Unreachable;
    status.reason = e.what();
  }
  return status;
}

}  // namespace gradeline
