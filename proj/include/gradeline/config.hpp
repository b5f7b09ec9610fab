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

#ifndef GRADELINE_CONFIG_HPP_
#define GRADELINE_CONFIG_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "gradeline/domain.hpp"

namespace gradeline {

struct GatewayPolicy {
  std::chrono::milliseconds timeout{120000};
  int retry_limit = 2;
  // Delay before retry n (1-based) is backoff_base * 2^(n-1).
  std::chrono::milliseconds backoff_base{1000};
  std::int64_t judge_seed = 42;
};

struct ProviderSettings {
  std::string base_url;
  std::string api_key;
};

struct Config {
  std::filesystem::path data_dir = ".gradeline";
  std::string bind_host = "127.0.0.1";
  int port = 8080;
  GatewayPolicy gateway;
  int concurrency_per_provider = 4;
  int judge_retry = 1;
  std::map<Provider, ProviderSettings> providers;
  // Named model references usable wherever a model is expected.
  std::map<std::string, ModelRef> models;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_env();

// Reads a JSON config file (if given) and applies GRADELINE_<PROVIDER>_BASE_URL,
// GRADELINE_<PROVIDER>_API_KEY and GRADELINE_TIMEOUT_MS overrides, where
// <PROVIDER> is OPENAI_COMPATIBLE or OLLAMA. Throws ConfigError.
Config load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env());
Config config_from_json(const std::string& text, const EnvLookup& env);

// Resolves a model designation:
//   "<alias>"                   entry of config.models
//   "<provider>:<model>"        provider base_url from config.providers
//   "<provider>:<model>@<url>"  explicit endpoint
// Throws ConfigError when nothing matches.
ModelRef resolve_model(const Config& config, const std::string& spec);

std::string api_key_for(const Config& config, Provider provider);

}  // namespace gradeline

#endif  // GRADELINE_CONFIG_HPP_
