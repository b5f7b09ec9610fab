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

#include "gradeline/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "gradeline/analytics.hpp"
#include "gradeline/api.hpp"
#include "gradeline/config.hpp"
#include "gradeline/gateway.hpp"
#include "gradeline/mock_server.hpp"
#include "gradeline/orchestrator.hpp"
#include "gradeline/repository.hpp"

namespace gradeline {

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ValidationFailed& e) {
    err << "error: " << e.what() << "\n";
    for (const auto& v : e.violations()) err << "  " << v.field << ": " << v.rule << "\n";
    return kExitValidation;
  } catch (const UnknownId& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DuplicateId& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Conflict& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const RunNotCompleted& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NoSharedTests& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const json::exception& e) {
    err << "error: malformed JSON: " << e.what() << "\n";
    return kExitValidation;
  } catch (const Error& e) {
    err << "error (" << e.kind() << "): " << e.what() << "\n";
    return kExitInfrastructure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInfrastructure;
  }
}

namespace {

std::string pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", *v);
  return buf;
}

std::vector<std::string> split_list(const std::vector<std::string>& values) {
  std::vector<std::string> out;
  for (const auto& v : values) {
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(item);
    }
  }
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return json::parse(buf.str());
}

std::atomic<bool> g_interrupted{false};
extern "C" void on_signal(int) { g_interrupted = true; }

// Lazily built services shared by the subcommands.
class Context {
 public:
  Context(std::optional<std::string> config_path, std::optional<std::string> data_dir)
      : config_(load_config(config_path ? std::optional<std::filesystem::path>(*config_path) : std::nullopt)) {
    if (data_dir) config_.data_dir = *data_dir;
  }

  Config& config() { return config_; }

  Repository& repo() {
    if (!repo_) repo_ = std::make_unique<Repository>(config_.data_dir);
    return *repo_;
  }

  Orchestrator& orchestrator() {
    if (!orchestrator_) {
      std::map<Provider, std::string> keys;
      for (const auto& [p, s] : config_.providers) keys[p] = s.api_key;
      gateway_ = std::make_unique<HttpGateway>(config_.gateway, keys);
      OrchestratorOptions opts;
      opts.concurrency_per_provider = config_.concurrency_per_provider;
      opts.judge_retry = config_.judge_retry;
      orchestrator_ = std::make_unique<Orchestrator>(repo(), *gateway_, opts);
    }
    return *orchestrator_;
  }

  // "mock" falls back to an in-process model server unless the config
  // defines an alias of that name.
  ModelRef resolve(const std::string& spec) {
    if (spec == "mock" && !config_.models.count("mock")) {
      std::lock_guard lock(mock_mu_);
      if (!mock_) {
        mock_ = std::make_unique<MockModelServer>();
        mock_->set_model("mock", builtin_mock_behavior());
        mock_->start();
      }
      ModelRef m;
      m.provider = Provider::OpenAICompatible;
      m.base_url = mock_->base_url();
      m.model_name = "mock";
      return m;
    }
    return resolve_model(config_, spec);
  }

 private:
  Config config_;
  std::unique_ptr<Repository> repo_;
  std::unique_ptr<HttpGateway> gateway_;
  std::unique_ptr<Orchestrator> orchestrator_;
  std::mutex mock_mu_;
  std::unique_ptr<MockModelServer> mock_;
};

void print_report(std::ostream& out, const RunReport& r) {
  out << "run: " << r.run_id.value << "\n";
  out << "model: " << r.model << "\n";
  out << "passed: " << r.totals.passed << "  failed: " << r.totals.failed
      << "  undetermined: " << r.totals.undetermined << "  inference_error: " << r.totals.inference_error;
  if (r.totals.selection_error) out << "  selection_error: " << r.totals.selection_error;
  out << "\n";
  out << "pass rate: " << pct(r.pass_rate_pct) << "  mean score: " << pct(r.mean_score_pct) << "\n";
  if (!r.per_tag.empty()) {
    out << "by domain" << (r.per_tag_overlaps ? " (issues with several domains count in each)" : "") << ":\n";
    for (const auto& g : r.per_tag) {
      out << "  " << g.key << ": pass " << pct(g.pass_rate_pct) << ", fail " << pct(g.failure_rate_pct) << ", tests: "
          << g.counts.total() << "\n";
    }
  }
  out << "by issue:\n";
  for (const auto& g : r.per_issue) {
    out << "  " << g.key << " " << g.title << ": pass " << pct(g.pass_rate_pct) << "\n";
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Issue tracking and LLM-as-judge regression testing for model failures", "gradeline"};
  app.require_subcommand(1);

  bool as_json = false;
  std::optional<std::string> config_path;
  std::optional<std::string> data_dir;
  std::optional<std::string> seed_path;
  app.add_flag("--json", as_json, "Print machine-readable JSON");
  app.add_option("--config", config_path, "Config file (JSON)");
  app.add_option("--data-dir", data_dir, "Data directory");
  app.add_option("--seed", seed_path, "Seed bundle imported first when the store has no issues");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::optional<std::string> host;
  std::optional<int> port;
  serve->add_option("--host", host, "Bind address (default 127.0.0.1)");
  serve->add_option("--port", port, "Port (0 picks a free port)");
  bool expose = false;
  serve->add_flag("--expose", expose, "Allow binding to a non-loopback address (default host becomes 0.0.0.0)");

  // seed
  auto* seed = app.add_subcommand("seed", "Import or export seed bundles");
  seed->require_subcommand(1);
  std::string seed_file;
  bool replace = false;
  auto* seed_import = seed->add_subcommand("import", "Import a seed bundle");
  seed_import->add_option("path", seed_file, "Bundle path")->required();
  seed_import->add_flag("--replace", replace, "Clear issues, tests and feedback first");
  auto* seed_export = seed->add_subcommand("export", "Export issues, tests and feedback");
  seed_export->add_option("path", seed_file, "Output path ('-' for stdout)")->required();

  // issue
  auto* issue = app.add_subcommand("issue", "Manage issues");
  issue->require_subcommand(1);
  std::vector<std::string> tag_args;
  std::optional<std::string> status_arg;
  std::string text_arg;
  bool include_hidden = false;
  auto* issue_list = issue->add_subcommand("list", "List issues");
  issue_list->add_option("--tag", tag_args, "Tag filter (any-of), e.g. Math or task_type:Riddle");
  issue_list->add_option("--status", status_arg, "Status filter");
  issue_list->add_option("--q", text_arg, "Case-insensitive text search");
  issue_list->add_flag("--all", include_hidden, "Include hidden issues");
  std::string title, description;
  auto* issue_create = issue->add_subcommand("create", "Create an issue");
  issue_create->add_option("--title", title)->required();
  issue_create->add_option("--description", description);
  issue_create->add_option("--tag", tag_args, "Tag; at least one domain is required");
  issue_create->add_option("--status", status_arg);
  std::string issue_id_arg;
  auto* issue_status = issue->add_subcommand("status", "Change an issue's status");
  issue_status->add_option("id", issue_id_arg)->required();
  issue_status->add_option("status", status_arg)->required();
  std::string fb_signal = "thumbs_down", fb_input, fb_output, fb_source_model;
  auto* issue_feedback = issue->add_subcommand("feedback", "Attach user feedback to an issue");
  issue_feedback->add_option("id", issue_id_arg)->required();
  issue_feedback->add_option("--signal", fb_signal);
  issue_feedback->add_option("--input", fb_input, "User input that triggered the failure");
  issue_feedback->add_option("--output", fb_output, "Model output the user reacted to");
  issue_feedback->add_option("--source-model", fb_source_model);

  // test
  auto* test = app.add_subcommand("test", "Manage tests");
  test->require_subcommand(1);
  std::string prompt;
  std::optional<std::string> reference, inherit_from, guidelines_file;
  std::string template_arg = "T1";
  std::vector<std::string> guidelines;
  auto* test_add = test->add_subcommand("add", "Add a test to an issue");
  test_add->add_option("issue", issue_id_arg)->required();
  test_add->add_option("--prompt", prompt)->required();
  test_add->add_option("--reference", reference);
  test_add->add_option("--template", template_arg, "T1, T2 or T3");
  test_add->add_option("--guideline", guidelines, "One guideline line (repeatable)");
  test_add->add_option("--guidelines-file", guidelines_file, "File with one guideline per line");
  test_add->add_option("--inherit-from", inherit_from, "Copy guidelines from a test of the same issue");
  auto* test_list = test->add_subcommand("list", "List tests");
  test_list->add_option("--tag", tag_args);

  // run
  auto* run = app.add_subcommand("run", "Start and inspect test runs");
  run->require_subcommand(1);
  std::string model_arg;
  std::vector<std::string> judge_args, test_ids, issue_ids;
  std::string run_id_arg;
  auto* run_start = run->add_subcommand("start", "Run tests against a target model and judge panel");
  run_start->add_option("--model", model_arg, "Target model")->required();
  run_start->add_option("--judges", judge_args, "Judge models (comma separated or repeated)")->required();
  run_start->add_option("--tag", tag_args, "Select tests by tag");
  run_start->add_option("--test", test_ids, "Select tests by id");
  run_start->add_option("--issue", issue_ids, "Select every test of an issue");
  auto* run_resume = run->add_subcommand("resume", "Finish an interrupted run");
  run_resume->add_option("id", run_id_arg)->required();
  auto* run_status = run->add_subcommand("status", "Show run status");
  run_status->add_option("id", run_id_arg)->required();
  auto* run_list = run->add_subcommand("list", "List runs");
  std::string path_arg;
  auto* run_export = run->add_subcommand("export", "Export a run with its results (.gz compresses)");
  run_export->add_option("id", run_id_arg)->required();
  run_export->add_option("path", path_arg)->required();
  auto* run_import = run->add_subcommand("import", "Import an exported run");
  run_import->add_option("path", path_arg)->required();

  // report / override / compare / trend
  auto* report = app.add_subcommand("report", "Run reports");
  report->require_subcommand(1);
  bool csv = false;
  auto* report_show = report->add_subcommand("show", "Show the report of a completed run");
  report_show->add_option("id", run_id_arg)->required();
  report_show->add_flag("--csv", csv, "Per-result CSV");

  std::string result_id_arg, justification, annotator = "cli";
  int score = 0;
  auto* override_cmd = app.add_subcommand("override", "Record a human override on a result");
  override_cmd->add_option("result", result_id_arg)->required();
  override_cmd->add_option("--score", score)->required()->check(CLI::Range(0, 1));
  override_cmd->add_option("--justification", justification)->required();
  override_cmd->add_option("--annotator", annotator);

  std::string run_a, run_b;
  auto* compare = app.add_subcommand("compare", "Compare two completed runs");
  compare->add_option("a", run_a)->required();
  compare->add_option("b", run_b)->required();

  std::vector<std::string> trend_runs;
  std::string group_by = "overall";
  auto* trend = app.add_subcommand("trend", "Pass rate over several runs");
  trend->add_option("runs", trend_runs, "Run ids")->required();
  trend->add_option("--group-by", group_by, "overall or domain");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::set<Tag> tags;
  try {
    for (const auto& t : split_list(tag_args)) tags.insert(parse_tag(t));
  } catch (...) {
    return exit_code_for_current_exception(err);
  }

  try {
    Context ctx(config_path, data_dir);
    IssueFilter all;
    all.include_hidden = true;
    if (seed_path && ctx.repo().list_issues(all).empty()) {
      ctx.repo().import_seed(read_json(*seed_path));
    }

    if (*serve) {
      ApiServer server(ctx.repo(), ctx.orchestrator(), [&ctx](const std::string& s) { return ctx.resolve(s); });
      const std::string bind_host = host.value_or(expose ? "0.0.0.0" : ctx.config().bind_host);
      if (!expose && bind_host != "127.0.0.1" && bind_host != "localhost" && bind_host != "::1") {
        throw ConfigError("refusing to bind " + bind_host + " without --expose");
      }
      const int bound = server.bind(bind_host, port.value_or(ctx.config().port));
      out << "listening on http://" << bind_host << ":" << bound << std::endl;
      g_interrupted = false;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::jthread watcher([&server](std::stop_token st) {
        while (!st.stop_requested() && !g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
      });
      server.listen();
      watcher.request_stop();
      return kExitOk;
    }

    if (*seed_import) {
      const auto counts = ctx.repo().import_seed(read_json(seed_file), replace);
      if (as_json) {
        out << json{{"issues", counts.issues}, {"tests", counts.tests}, {"feedback", counts.feedback}}.dump() << "\n";
      } else {
        out << "issues: " << counts.issues << ", tests: " << counts.tests << "\n";
      }
      return kExitOk;
    }
    if (*seed_export) {
      const auto text = ctx.repo().export_seed().dump(2) + "\n";
      if (seed_file == "-") {
        out << text;
      } else {
        std::ofstream f(seed_file, std::ios::binary);
        if (!f) throw IoError("cannot write " + seed_file);
        f << text;
      }
      return kExitOk;
    }

    if (*issue_list) {
      IssueFilter f;
      f.tags = tags;
      if (status_arg) {
        f.status = parse_issue_status(*status_arg);
        if (!f.status) throw ValidationFailed({{"status", "unknown status '" + *status_arg + "'"}}, "issue");
      }
      f.text = text_arg;
      f.include_hidden = include_hidden;
      const auto issues = ctx.repo().list_issues(f);
      if (as_json) {
        out << json(issues).dump(2) << "\n";
      } else {
        for (const auto& i : issues) {
          std::string tag_text;
          for (const auto& t : i.tags) tag_text += (tag_text.empty() ? "" : ",") + format_tag(t);
          out << i.id.value << "  " << to_string(i.status) << "  [" << tag_text << "]  " << i.title << "\n";
        }
      }
      return kExitOk;
    }
    if (*issue_create) {
      IssueDraft d;
      d.title = title;
      d.description = description;
      d.tags = tags;
      if (status_arg) {
        auto st = parse_issue_status(*status_arg);
        if (!st) throw ValidationFailed({{"status", "unknown status '" + *status_arg + "'"}}, "issue");
        d.status = *st;
      }
      const auto created = ctx.repo().create_issue(d);
      out << (as_json ? json(created).dump(2) : created.id.value) << "\n";
      return kExitOk;
    }
    if (*issue_status) {
      IssuePatch p;
      auto st = parse_issue_status(*status_arg);
      if (!st) throw ValidationFailed({{"status", "unknown status '" + *status_arg + "'"}}, "issue");
      p.status = *st;
      const auto updated = ctx.repo().update_issue(IssueId{issue_id_arg}, p);
      out << (as_json ? json(updated).dump(2) : updated.id.value + " " + std::string(to_string(updated.status)))
          << "\n";
      return kExitOk;
    }
    if (*issue_feedback) {
      Feedback fb;
      fb.id = FeedbackId{new_ulid()};
      auto sig = parse_feedback_signal(fb_signal);
      if (!sig) throw ValidationFailed({{"signal", "unknown signal '" + fb_signal + "'"}}, "feedback");
      fb.signal = *sig;
      fb.user_input = fb_input;
      fb.model_output = fb_output;
      fb.source_model = fb_source_model;
      fb.received_at = now();
      const auto updated = ctx.repo().attach_feedback(IssueId{issue_id_arg}, fb);
      out << (as_json ? json(updated).dump(2) : fb.id.value) << "\n";
      return kExitOk;
    }

    if (*test_add) {
      Test draft;
      draft.input_prompt = prompt;
      draft.reference_answer = reference;
      auto tpl = parse_judge_template(template_arg);
      if (!tpl) throw ValidationFailed({{"judge_template", "must be T1, T2 or T3"}}, "test");
      draft.judge_template = *tpl;
      draft.judge_guidelines = guidelines;
      if (guidelines_file) {
        std::ifstream in(*guidelines_file);
        if (!in) throw IoError("cannot open " + *guidelines_file);
        for (std::string line; std::getline(in, line);) {
          if (!line.empty()) draft.judge_guidelines.push_back(line);
        }
      }
      std::optional<TestId> inherit;
      if (inherit_from) inherit = TestId{*inherit_from};
      const auto created = ctx.repo().add_test(IssueId{issue_id_arg}, draft, inherit);
      out << (as_json ? json(created).dump(2) : created.id.value) << "\n";
      return kExitOk;
    }
    if (*test_list) {
      const auto tests = ctx.repo().list_tests(tags);
      if (as_json) {
        out << json(tests).dump(2) << "\n";
      } else {
        for (const auto& t : tests) {
          out << t.id.value << "  " << t.issue_id.value << "  " << to_string(t.judge_template) << "  "
              << t.input_prompt.substr(0, 60) << "\n";
        }
      }
      return kExitOk;
    }

    auto print_run = [&](const TestRun& r) {
      if (as_json) {
        out << json(r).dump(2) << "\n";
        return;
      }
      out << "run " << r.id.value << " " << to_string(r.status) << ": " << r.progress.judged << "/"
          << r.progress.total << " judged, " << r.progress.errored << " errored, " << r.progress.inferred
          << " inferred\n";
      if (r.failure_reason) out << "failure: " << *r.failure_reason << "\n";
    };

    if (*run_start) {
      RunSpec spec;
      spec.target = ctx.resolve(model_arg);
      for (const auto& j : split_list(judge_args)) spec.judges.push_back(ctx.resolve(j));
      spec.selection.tags = tags;
      for (const auto& id : split_list(test_ids)) spec.selection.test_ids.insert(TestId{id});
      for (const auto& id : split_list(issue_ids)) spec.selection.issue_ids.insert(IssueId{id});
      const auto prepared = ctx.orchestrator().prepare_run(spec);
      if (!as_json) out << "run " << prepared.id.value << " started (" << prepared.progress.total << " tests)"
                        << std::endl;
      print_run(ctx.orchestrator().execute_run(prepared.id));
      return kExitOk;
    }
    if (*run_resume) {
      print_run(ctx.orchestrator().resume_run(RunId{run_id_arg}));
      return kExitOk;
    }
    if (*run_status) {
      print_run(ctx.repo().get_run(RunId{run_id_arg}));
      return kExitOk;
    }
    if (*run_list) {
      const auto runs = ctx.repo().list_runs();
      if (as_json) {
        out << json(runs).dump(2) << "\n";
      } else {
        for (const auto& r : runs) {
          out << r.id.value << "  " << to_string(r.status) << "  " << r.target.identity() << "  "
              << (r.started_at ? format_timestamp(*r.started_at) : "-") << "\n";
        }
      }
      return kExitOk;
    }
    if (*run_export) {
      ctx.repo().export_run_to_file(RunId{run_id_arg}, path_arg);
      return kExitOk;
    }
    if (*run_import) {
      out << ctx.repo().import_run_from_file(path_arg).value << "\n";
      return kExitOk;
    }

    if (*report_show) {
      const RunId id{run_id_arg};
      const auto r = build_report(ctx.repo(), id);
      if (csv) {
        out << results_csv(ctx.repo().get_run(id), ctx.repo().results_for_run(id));
      } else if (as_json) {
        out << to_json(r).dump(2) << "\n";
      } else {
        print_report(out, r);
      }
      return kExitOk;
    }

    if (*override_cmd) {
      HumanOverride o;
      o.score = score;
      o.justification = justification;
      o.annotator = annotator;
      o.created_at = now();
      const auto updated = ctx.repo().set_override(ResultId{result_id_arg}, o);
      out << (as_json ? json(updated).dump(2) : updated.id.value + " " + std::string(to_string(updated.determination)))
          << "\n";
      return kExitOk;
    }

    if (*compare) {
      const auto c = compare_reports(ctx.repo(), RunId{run_a}, RunId{run_b});
      if (as_json) {
        out << to_json(c).dump(2) << "\n";
      } else {
        out << "shared tests: " << c.shared_test_ids.size() << "\n";
        out << "outperform: " << c.counts.outperform << "  underperform: " << c.counts.underperform
            << "  match: " << c.counts.match << "\n";
        for (const auto& [key, counts] : c.per_tag) {
          out << "  " << key << ": +" << counts.outperform << " -" << counts.underperform << " =" << counts.match
              << "\n";
        }
      }
      return kExitOk;
    }

    if (*trend) {
      const auto g = parse_group_by(group_by);
      if (!g) throw ValidationFailed({{"group_by", "must be overall or domain"}}, "trend");
      std::vector<RunId> ids;
      for (const auto& id : split_list(trend_runs)) ids.emplace_back(id);
      const auto series = trend_series(ctx.repo(), ids, *g);
      if (as_json) {
        out << to_json(series).dump(2) << "\n";
      } else {
        for (const auto& s : series) {
          out << s.group_key << ":\n";
          for (const auto& p : s.points) {
            out << "  " << format_timestamp(p.started_at) << "  " << p.run_id.value << "  " << pct(p.pass_rate_pct)
                << "\n";
          }
        }
      }
      return kExitOk;
    }
  } catch (...) {
    return exit_code_for_current_exception(err);
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace gradeline
