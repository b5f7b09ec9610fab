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

#include "gradeline/mock_server.hpp"

#include "gradeline/judge.hpp"
#include "httplib.h"
#include "json.hpp"

namespace gradeline {

using nlohmann::json;

MockModelServer::MockModelServer() = default;

MockModelServer::~MockModelServer() { stop(); }

void MockModelServer::set_model(const std::string& name, MockBehavior behavior) {
  std::lock_guard lock(mu_);
  models_[name] = std::move(behavior);
}

std::string MockModelServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

void MockModelServer::start() {
  server_ = std::make_unique<httplib::Server>();
  server_->new_task_queue = [] { return new httplib::ThreadPool(64); };
  auto respond = [this](Provider provider) {
    return [this, provider](const httplib::Request& req, httplib::Response& res) {
      auto h = handle(provider, req.path, req.body);
      res.status = h.status;
      res.set_content(h.body, "application/json");
    };
  };
  server_->Post("/v1/chat/completions", respond(Provider::OpenAICompatible));
  server_->Post("/api/generate", respond(Provider::Ollama));
  server_->Get("/v1/models", [this](const httplib::Request&, httplib::Response& res) {
    json data = json::array();
    std::lock_guard lock(mu_);
    for (const auto& [name, _] : models_) data.push_back({{"id", name}, {"object", "model"}});
    res.set_content(json{{"object", "list"}, {"data", data}}.dump(), "application/json");
  });
  server_->Get("/api/tags", [this](const httplib::Request&, httplib::Response& res) {
    json data = json::array();
    std::lock_guard lock(mu_);
    for (const auto& [name, _] : models_) data.push_back({{"name", name}, {"model", name}});
    res.set_content(json{{"models", data}}.dump(), "application/json");
  });
  port_ = server_->bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw IoError("mock server could not bind a port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockModelServer::stop() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    frozen_ = false;
  }
  cv_.notify_all();
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

MockModelServer::Handled MockModelServer::handle(Provider provider, const std::string& path,
                                                 const std::string& body) {
  const int now_in_flight = ++in_flight_;
  int prev = max_in_flight_.load();
  while (now_in_flight > prev && !max_in_flight_.compare_exchange_weak(prev, now_in_flight)) {
  }
  struct Leave {
    std::atomic<int>& n;
    ~Leave() { --n; }
  } leave{in_flight_};

  RecordedRequest rec;
  rec.path = path;
  rec.body = body;
  const auto j = json::parse(body, nullptr, false);
  if (j.is_object()) {
    rec.model = j.value("model", std::string{});
    if (provider == Provider::Ollama) {
      rec.prompt = j.value("prompt", std::string{});
    } else if (j.contains("messages") && j["messages"].is_array() && !j["messages"].empty()) {
      rec.prompt = j["messages"].back().value("content", std::string{});
    }
  }

  MockBehavior behavior;
  MockCall call{provider, rec.model, rec.prompt, 0};
  {
    std::unique_lock lock(mu_);
    if (frozen_) {
      ++held_;
      cv_.wait(lock, [this] { return !frozen_ || stopping_; });
      --held_;
      rec.status = 503;
      rec.answered = false;
      log_.push_back(rec);
      return {503, json{{"error", "server released a held request"}}.dump()};
    }
    auto it = models_.find(rec.model);
    if (it != models_.end()) behavior = it->second;
    call.model_call_index = call_counts_[rec.model]++;
  }

  if (!j.is_object()) {
    rec.status = 400;
  } else if (!behavior) {
    rec.status = 404;
  }
  MockReply reply;
  if (rec.status == 0) {
    reply = behavior(call);
    if (reply.delay.count() > 0) std::this_thread::sleep_for(reply.delay);
    rec.status = reply.status;
  }

  json out;
  if (rec.status == 400) {
    out = {{"error", "request body is not JSON"}};
  } else if (rec.status == 404) {
    out = {{"error", "model '" + rec.model + "' not found"}};
  } else if (rec.status != 200) {
    out = {{"error", reply.text.empty() ? "injected failure" : reply.text}};
  } else if (provider == Provider::Ollama) {
    out = {{"model", rec.model}, {"response", reply.text}, {"done", true}};
  } else {
    out = {{"id", "chatcmpl-mock"},
           {"object", "chat.completion"},
           {"model", rec.model},
           {"choices", json::array({{{"index", 0},
                                     {"message", {{"role", "assistant"}, {"content", reply.text}}},
                                     {"finish_reason", "stop"}}})}};
  }
  rec.answered = true;
  const int status = rec.status;
  {
    std::lock_guard lock(mu_);
    log_.push_back(std::move(rec));
  }
  return {status, out.dump()};
}

std::vector<RecordedRequest> MockModelServer::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t MockModelServer::answered_count(const std::string& model) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& r : log_) n += (r.answered && r.model == model) ? 1 : 0;
  return n;
}

void MockModelServer::clear_log() {
  std::lock_guard lock(mu_);
  log_.clear();
}

void MockModelServer::freeze() {
  std::lock_guard lock(mu_);
  frozen_ = true;
}

void MockModelServer::unfreeze() {
  {
    std::lock_guard lock(mu_);
    frozen_ = false;
  }
  cv_.notify_all();
}

std::size_t MockModelServer::held_count() const {
  std::lock_guard lock(mu_);
  return held_;
}

MockBehavior fixed_reply(std::string text, std::chrono::milliseconds delay) {
  return [text = std::move(text), delay](const MockCall&) { return MockReply{200, text, delay}; };
}

MockBehavior judge_reply(int score, std::string justification, std::chrono::milliseconds delay) {
  return fixed_reply(format_judge_reply(score, justification), delay);
}

MockBehavior status_reply(int status) {
  return [status](const MockCall&) { return MockReply{status, {}, {}}; };
}

MockBehavior fail_first(int failures, int status, MockBehavior then) {
  return [failures, status, then = std::move(then)](const MockCall& call) {
    if (call.model_call_index < failures) return MockReply{status, {}, {}};
    return then(call);
  };
}

MockBehavior builtin_mock_behavior() {
  return [](const MockCall& call) {
    if (call.prompt.starts_with("Act as an impartial judge")) {
      return MockReply{200, format_judge_reply(1, "mock judge accepts every output"), {}};
    }
    return MockReply{200, "OK", {}};
  };
}

}  // namespace gradeline
