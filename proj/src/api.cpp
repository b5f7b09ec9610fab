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

#include "gradeline/api.hpp"

#include <charconv>
#include <sstream>

#include "gradeline/analytics.hpp"
#include "gradeline/gateway.hpp"
#include "httplib.h"

namespace gradeline {

ApiErrorBody api_error(int http_status, const std::string& code, const std::string& message, json detail) {
  return {http_status, json{{"code", code}, {"message", message}, {"detail", std::move(detail)}}};
}

ApiErrorBody api_error_from_current_exception() {
  try {
    throw;
  } catch (const UnknownId& e) {
    return api_error(404, "not_found", e.what(), {{"collection", e.collection()}, {"id", e.id()}});
  } catch (const ValidationFailed& e) {
    json violations = json::array();
    for (const auto& v : e.violations()) violations.push_back({{"field", v.field}, {"rule", v.rule}});
    return api_error(422, "validation_failed", e.what(), {{"record", e.record()}, {"violations", violations}});
  } catch (const DuplicateId& e) {
    return api_error(409, "conflict", e.what(), {{"id", e.id()}});
  } catch (const Conflict& e) {
    return api_error(409, "conflict", e.what());
  } catch (const RunNotCompleted& e) {
    return api_error(409, "conflict", e.what());
  } catch (const NoSharedTests& e) {
    return api_error(422, "validation_failed", e.what());
  } catch (const ConfigError& e) {
    return api_error(422, "validation_failed", e.what());
  } catch (const GatewayError& e) {
    return api_error(502, "upstream_unavailable", e.what(),
                     {{"model", e.model()}, {"purpose", to_string(e.purpose())}, {"attempt_count", e.attempt_count()}});
  } catch (const json::exception& e) {
    return api_error(400, "validation_failed", std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    return api_error(500, "internal", e.what());
  } catch (...) {
    return api_error(500, "internal", "unknown error");
  }
}

namespace {

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  // Malformed JSON surfaces as a parse error, which maps to 400.
  auto j = json::parse(req.body);
  if (!j.is_object()) throw ValidationFailed({{"body", "request body must be a JSON object"}}, "request");
  return j;
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::set<Tag> tags_param(const httplib::Request& req) {
  std::set<Tag> tags;
  const auto n = req.get_param_value_count("tag");
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& t : split_csv(req.get_param_value("tag", i))) tags.insert(parse_tag(t));
  }
  return tags;
}

std::size_t size_param(const httplib::Request& req, const char* name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const auto v = req.get_param_value(name);
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ValidationFailed({{name, "must be a non-negative integer"}}, "query");
  }
  return out;
}

template <class T>
json page(const std::vector<T>& items, const httplib::Request& req, const char* key) {
  const auto offset = size_param(req, "offset", 0);
  const auto limit = size_param(req, "limit", items.size());
  json arr = json::array();
  for (std::size_t i = offset; i < items.size() && i - offset < limit; ++i) arr.push_back(items[i]);
  return {{key, arr}, {"total", items.size()}, {"offset", offset}, {"limit", limit}};
}

ModelRef model_from(const json& j, const ModelResolver& resolve, const char* field) {
  if (j.is_string()) return resolve(j.get<std::string>());
  if (j.is_object()) return decode<ModelRef>(j, field);
  throw ValidationFailed({{field, "must be a model name or a model object"}}, "run");
}

}  // namespace

RunSpec run_spec_from_json(const json& body, const ModelResolver& resolve) {
  RunSpec spec;
  if (!body.contains("target")) throw ValidationFailed({{"target", "required"}}, "run");
  spec.target = model_from(body.at("target"), resolve, "target");
  if (!body.contains("judges") || !body.at("judges").is_array()) {
    throw ValidationFailed({{"judges", "must be a non-empty array"}}, "run");
  }
  for (const auto& j : body.at("judges")) spec.judges.push_back(model_from(j, resolve, "judges"));
  if (body.contains("selection")) spec.selection = decode<TestSelection>(body.at("selection"), "selection");
  return spec;
}

ApiServer::ApiServer(Repository& repo, Orchestrator& orchestrator, ModelResolver resolve)
    : repo_(repo), orchestrator_(orchestrator), resolve_(std::move(resolve)) {
  server_ = std::make_unique<httplib::Server>();
  routes();
}

ApiServer::~ApiServer() {
  stop();
  // Interrupted runs stay in the running state and can be resumed later.
  {
    std::lock_guard lock(runs_mu_);
    for (auto& t : runs_) t.request_stop();
  }
  wait_for_runs();
}

std::string ApiServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

int ApiServer::bind(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void ApiServer::start_background() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ApiServer::listen() { server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void ApiServer::wait_for_runs() {
  std::vector<std::jthread> runs;
  {
    std::lock_guard lock(runs_mu_);
    runs.swap(runs_);
  }
  for (auto& t : runs) {
    if (t.joinable()) t.join();
  }
}

void ApiServer::launch(const RunId& id, bool resume) {
  std::lock_guard lock(runs_mu_);
  runs_.emplace_back([this, id, resume](std::stop_token stop) {
    try {
      if (resume) {
        orchestrator_.resume_run(id, stop);
      } else {
        orchestrator_.execute_run(id, stop);
      }
    } catch (const std::exception&) {
      // Failure is recorded on the run itself and visible via GET /runs/{id}.
    }
  });
}

void ApiServer::routes() {
  auto& s = *server_;
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  auto guarded = [](Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (...) {
        auto err = api_error_from_current_exception();
        reply(res, err.http_status, err.body);
      }
    };
  };

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      auto err = api_error(404, "not_found", "no route for " + req.method + " " + req.path);
      reply(res, 404, err.body);
    } else if (res.status >= 400) {
      auto err = api_error(res.status, res.status < 500 ? "validation_failed" : "internal",
                           "HTTP " + std::to_string(res.status));
      reply(res, res.status, err.body);
    }
  });

  s.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"revision", repo_.revision()}});
  }));

  s.Get("/issues", guarded([this](const httplib::Request& req, httplib::Response& res) {
    IssueFilter f;
    f.tags = tags_param(req);
    if (req.has_param("status")) {
      auto st = parse_issue_status(req.get_param_value("status"));
      if (!st) throw ValidationFailed({{"status", "unknown status"}}, "query");
      f.status = st;
    }
    f.text = req.get_param_value("q");
    f.include_hidden = req.get_param_value("include_hidden") == "true";
    reply(res, 200, page(repo_.list_issues(f), req, "issues"));
  }));

  s.Post("/issues", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    IssueDraft d;
    d.title = body.value("title", std::string{});
    d.description = body.value("description", std::string{});
    d.tags = decode<std::set<Tag>>(body.value("tags", json::array()), "tags");
    if (body.contains("status")) {
      auto st = parse_issue_status(body.at("status").get<std::string>());
      if (!st) throw ValidationFailed({{"status", "unknown status"}}, "issue");
      d.status = *st;
    }
    reply(res, 201, repo_.create_issue(d));
  }));

  s.Get(R"(/issues/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const IssueId id{req.matches[1]};
    json j = repo_.get_issue(id);
    j["tests"] = repo_.list_tests({}, id);
    reply(res, 200, j);
  }));

  s.Patch(R"(/issues/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    IssuePatch p;
    if (body.contains("title")) p.title = body.at("title").get<std::string>();
    if (body.contains("description")) p.description = body.at("description").get<std::string>();
    if (body.contains("tags")) p.tags = decode<std::set<Tag>>(body.at("tags"), "tags");
    if (body.contains("hidden")) p.hidden = body.at("hidden").get<bool>();
    if (body.contains("status")) {
      const auto name = body.at("status").get<std::string>();
      auto st = parse_issue_status(name);
      if (!st) throw ValidationFailed({{"status", "unknown status '" + name + "'"}}, "issue");
      p.status = *st;
    }
    reply(res, 200, repo_.update_issue(IssueId{req.matches[1]}, p));
  }));

  s.Post(R"(/issues/([^/]+)/tests)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    std::optional<TestId> inherit;
    if (body.contains("inherit_from")) inherit = TestId{body.at("inherit_from").get<std::string>()};
    if (!body.contains("judge_guidelines")) body["judge_guidelines"] = json::array();
    Test draft = decode<Test>(body, "test");
    reply(res, 201, repo_.add_test(IssueId{req.matches[1]}, std::move(draft), inherit));
  }));

  s.Post(R"(/issues/([^/]+)/feedback)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    reply(res, 200, repo_.attach_feedback(IssueId{req.matches[1]}, decode<Feedback>(body, "feedback")));
  }));

  s.Get("/tests", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::optional<IssueId> issue;
    if (req.has_param("issue_id")) issue = IssueId{req.get_param_value("issue_id")};
    reply(res, 200, page(repo_.list_tests(tags_param(req), issue), req, "tests"));
  }));

  s.Post("/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const RunSpec spec = run_spec_from_json(parse_body(req), resolve_);
    const TestRun run = orchestrator_.prepare_run(spec);
    launch(run.id, false);
    reply(res, 202, {{"run_id", run.id}, {"status", to_string(run.status)}, {"progress", run.progress}});
  }));

  s.Get("/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, page(repo_.list_runs(), req, "runs"));
  }));

  s.Get(R"(/runs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, repo_.get_run(RunId{req.matches[1]}));
  }));

  s.Post(R"(/runs/([^/]+)/resume)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const TestRun run = repo_.get_run(RunId{req.matches[1]});
    if (run.status != RunStatus::Completed) launch(run.id, run.status != RunStatus::Pending);
    reply(res, 202, {{"run_id", run.id}, {"status", to_string(run.status)}, {"progress", run.progress}});
  }));

  s.Get(R"(/runs/([^/]+)/results)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, {{"results", repo_.results_for_run(RunId{req.matches[1]})}});
  }));

  s.Get(R"(/runs/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    reply(res, 200, repo_.export_run(RunId{req.matches[1]}));
  }));

  s.Get(R"(/runs/([^/]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const RunId id{req.matches[1]};
    const auto report = build_report(repo_, id);
    if (req.get_param_value("format") == "csv") {
      res.status = 200;
      res.set_content(results_csv(repo_.get_run(id), repo_.results_for_run(id)), "text/csv");
      return;
    }
    reply(res, 200, to_json(report));
  }));

  s.Post(R"(/results/([^/]+)/override)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    if (!body.contains("score") || !body.contains("justification")) {
      throw ValidationFailed({{"override", "score and justification are required"}}, "override");
    }
    HumanOverride o = decode<HumanOverride>(body, "override");
    o.created_at = now();
    reply(res, 200, repo_.set_override(ResultId{req.matches[1]}, std::move(o)));
  }));

  s.Get("/compare", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("a") || !req.has_param("b")) {
      throw ValidationFailed({{"a,b", "both run ids are required"}}, "query");
    }
    reply(res, 200,
          to_json(compare_reports(repo_, RunId{req.get_param_value("a")}, RunId{req.get_param_value("b")})));
  }));

  s.Get("/trend", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::vector<RunId> ids;
    for (const auto& id : split_csv(req.get_param_value("runs"))) ids.emplace_back(id);
    if (ids.empty()) throw ValidationFailed({{"runs", "at least one run id required"}}, "query");
    const auto group = parse_group_by(req.has_param("group_by") ? req.get_param_value("group_by") : "overall");
    if (!group) throw ValidationFailed({{"group_by", "must be overall or domain"}}, "query");
    reply(res, 200, {{"series", to_json(trend_series(repo_, ids, *group))}});
  }));
}

}  // namespace gradeline
