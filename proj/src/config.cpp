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

#include "gradeline/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gradeline/codec.hpp"

namespace gradeline {

namespace {

std::string env_name(Provider p) {
  return p == Provider::Ollama ? "OLLAMA" : "OPENAI_COMPATIBLE";
}

void apply_env(Config& cfg, const EnvLookup& env) {
  for (Provider p : {Provider::OpenAICompatible, Provider::Ollama}) {
    const std::string prefix = "GRADELINE_" + env_name(p) + "_";
    if (auto url = env(prefix + "BASE_URL")) cfg.providers[p].base_url = *url;
    if (auto key = env(prefix + "API_KEY")) cfg.providers[p].api_key = *key;
  }
  if (auto t = env("GRADELINE_TIMEOUT_MS")) {
    try {
      cfg.gateway.timeout = std::chrono::milliseconds{std::stoll(*t)};
    } catch (const std::exception&) {
      throw ConfigError("GRADELINE_TIMEOUT_MS is not an integer: '" + *t + "'");
    }
  }
}

}  // namespace

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

Config config_from_json(const std::string& text, const EnvLookup& env) {
  Config cfg;
  if (!text.empty()) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
      if (j.contains("data_dir")) cfg.data_dir = j.at("data_dir").get<std::string>();
      cfg.bind_host = j.value("bind_host", cfg.bind_host);
      cfg.port = j.value("port", cfg.port);
      cfg.concurrency_per_provider = j.value("concurrency_per_provider", cfg.concurrency_per_provider);
      cfg.judge_retry = j.value("judge_retry", cfg.judge_retry);
      if (j.contains("timeout_ms")) cfg.gateway.timeout = std::chrono::milliseconds{j.at("timeout_ms").get<std::int64_t>()};
      cfg.gateway.retry_limit = j.value("retry_limit", cfg.gateway.retry_limit);
      if (j.contains("backoff_base_ms")) {
        cfg.gateway.backoff_base = std::chrono::milliseconds{j.at("backoff_base_ms").get<std::int64_t>()};
      }
      cfg.gateway.judge_seed = j.value("judge_seed", cfg.gateway.judge_seed);
      if (j.contains("providers")) {
        for (const auto& [name, p] : j.at("providers").items()) {
          auto provider = parse_provider(name);
          if (!provider) throw ConfigError("unknown provider '" + name + "'");
          cfg.providers[*provider] = {p.value("base_url", std::string{}), p.value("api_key", std::string{})};
        }
      }
      if (j.contains("models")) {
        for (const auto& [alias, m] : j.at("models").items()) cfg.models[alias] = m.get<ModelRef>();
      }
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    } catch (const ValidationFailed& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
  }
  apply_env(cfg, env);
  if (cfg.concurrency_per_provider < 1) throw ConfigError("concurrency_per_provider must be >= 1");
  if (cfg.gateway.retry_limit < 0) throw ConfigError("retry_limit must be >= 0");
  // Aliases without a base_url inherit the provider's.
  for (auto& [alias, m] : cfg.models) {
    if (m.base_url.empty()) {
      if (auto it = cfg.providers.find(m.provider); it != cfg.providers.end()) m.base_url = it->second.base_url;
    }
  }
  return cfg;
}

Config load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  std::string text;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot read config file '" + file->string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return config_from_json(text, env);
}

ModelRef resolve_model(const Config& config, const std::string& spec) {
  if (auto it = config.models.find(spec); it != config.models.end()) return it->second;
  const auto colon = spec.find(':');
  if (colon != std::string::npos) {
    if (auto provider = parse_provider(spec.substr(0, colon))) {
      ModelRef m;
      m.provider = *provider;
      std::string rest = spec.substr(colon + 1);
      const auto at = rest.rfind('@');
      if (at != std::string::npos) {
        m.base_url = rest.substr(at + 1);
        rest = rest.substr(0, at);
      } else if (auto p = config.providers.find(*provider); p != config.providers.end()) {
        m.base_url = p->second.base_url;
      }
      m.model_name = rest;
      if (m.base_url.empty()) throw ConfigError("no base_url configured for model '" + spec + "'");
      if (auto check = validate_model(m); !check.ok()) {
        throw ConfigError("invalid model '" + spec + "': " + check.violations.front().rule);
      }
      return m;
    }
  }
  throw ConfigError("unknown model '" + spec + "'");
}

std::string api_key_for(const Config& config, Provider provider) {
  auto it = config.providers.find(provider);
  return it == config.providers.end() ? std::string{} : it->second.api_key;
}

}  // namespace gradeline
