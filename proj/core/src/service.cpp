#include "lmd/service.hpp"

#include <csignal>
#include <future>
#include <iostream>
#include <list>
#include <map>
#include <mutex>
#include <pthread.h>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lmd/benchmark.hpp"
#include "lmd/dialog.hpp"
#include "lmd/pipeline.hpp"
#include "lmd/run_store.hpp"
#include "lmd/svg.hpp"

namespace lmd {

namespace {

using nlohmann::json;

/// Error carrying an HTTP status and a machine-readable code.
class HttpError : public std::runtime_error {
 public:
  HttpError(int status, std::string code, const std::string& message, json details = nullptr)
      : std::runtime_error(message), status_(status), code_(std::move(code)), details_(std::move(details)) {}
  [[nodiscard]] int status() const { return status_; }
  [[nodiscard]] const std::string& code() const { return code_; }
  [[nodiscard]] const json& details() const { return details_; }

 private:
  int status_;
  std::string code_;
  json details_;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const json& details = nullptr) {
  json body{{"error", {{"code", code}, {"message", message}}}};
  if (!details.is_null()) {
    for (const auto& [k, v] : details.items()) {
      body["error"][k] = v;
    }
  }
  send_json(res, status, body);
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw HttpError(400, "bad_request", "request body must be a JSON object");
  }
  return body;
}

std::string required_string(const json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string()) {
    throw HttpError(400, "bad_request", std::string("missing string field '") + key + "'");
  }
  return body.at(key).get<std::string>();
}

json diagnostic_json(const ParseDiagnostic& d) {
  return json{{"kind", to_string(d.kind)}, {"span", {d.begin, d.end}}, {"message", d.message}};
}

int status_for_stage_error(const std::string& code) {
  if (code == "llm_error") return 502;
  if (code == "layout_parse_error") return 422;
  if (code == "invalid_caption" || code == "invalid_request") return 400;
  return 500;
}

HttpError from_stage_error(const StageError& e) {
  json details{{"stage", to_string(e.stage())}};
  if (e.diagnostic()) {
    details["diagnostic"] = diagnostic_json(*e.diagnostic());
  }
  return HttpError(status_for_stage_error(e.code()), e.code(), e.what(), details);
}

}  // namespace

struct Service::Impl {
  struct Job {
    std::shared_future<void> done;
    std::jthread thread;
  };

  AppConfig config;
  std::shared_ptr<ChatBackend> live;
  std::shared_ptr<ChatBackend> mock;
  RunStore store;
  SessionStore sessions;
  httplib::Server server;
  int bound_port = -1;

  std::mutex session_backend_mutex;
  std::map<std::string, std::shared_ptr<ChatBackend>> session_backends;

  std::mutex jobs_mutex;
  std::list<Job> jobs;
  std::counting_semaphore<1024> run_slots;

  Impl(AppConfig cfg, std::shared_ptr<ChatBackend> live_backend, std::shared_ptr<ChatBackend> mock_backend)
      : config(std::move(cfg)),
        live(std::move(live_backend)),
        mock(mock_backend ? std::move(mock_backend) : make_mock_backend()),
        store(config.data_dir),
        run_slots(std::min(config.parallelism, 1024)) {
    config.validate();
    routes();
  }

  std::shared_ptr<ChatBackend> backend_for(const json& body) const {
    const std::string name = body.value("backend", config.use_mock ? "mock" : "live");
    if (name == "mock") return mock;
    if (name == "live") {
      if (!live) throw HttpError(400, "bad_request", "no live backend configured");
      return live;
    }
    throw HttpError(400, "bad_request", "backend must be \"mock\" or \"live\"");
  }

  static PromptTemplate template_for(const json& body) {
    PromptTemplate tmpl = default_template();
    if (body.contains("language") && !body.at("language").is_null()) {
      const std::string lang = body.at("language").get<std::string>();
      if (lang.empty() || lang == "en") return tmpl;
      if (!translated_example_caption(lang)) {
        throw HttpError(400, "unsupported_language", "no translated example for language '" + lang + "'");
      }
      return template_for_language(tmpl, lang);
    }
    return tmpl;
  }

  GenerationConfig generation_for(const json& body) const {
    GenerationConfig gen = config.generation;
    try {
      if (body.contains("config")) body.at("config").get_to(gen);
      if (body.contains("seed")) gen.seed = body.at("seed").get<std::uint64_t>();
      gen.validate();
    } catch (const std::exception& e) {
      throw HttpError(400, "invalid_config", e.what());
    }
    return gen;
  }

  PipelineOptions options_for(const json& body) const {
    PipelineOptions opts;
    opts.generation = generation_for(body);
    opts.prompt_template = template_for(body);
    opts.parallelism = 1;
    return opts;
  }

  /// Starts `work` on a background thread, bounded by the run slots.
  std::shared_future<void> launch(std::function<void()> work) {
    std::lock_guard lock(jobs_mutex);
    jobs.remove_if([](const Job& j) {
      return j.done.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
    });
    auto promise = std::make_shared<std::promise<void>>();
    Job job{promise->get_future().share(), {}};
    auto fut = job.done;
    job.thread = std::jthread([this, promise, work = std::move(work)] {
      run_slots.acquire();
      try {
        work();
      } catch (const std::exception& e) {
        std::cerr << "background run failed: " << e.what() << "\n";
      }
      run_slots.release();
      promise->set_value();
    });
    jobs.push_back(std::move(job));
    return fut;
  }

  void wait_for_jobs() {
    std::list<Job> pending;
    {
      std::lock_guard lock(jobs_mutex);
      pending.swap(jobs);
    }
    pending.clear();  // joins
  }

  /// Marks a run that ended without a stage verdict as failed.
  void fail_if_unfinished(const std::string& id, const std::string& message) {
    try {
      RunRecord r = store.load(id);
      if (r.status != RunStatus::ImageDone && r.status != RunStatus::Failed) {
        r.fail(RunError{r.layout ? "image" : "layout", "internal_error", message});
        store.store(r);
      }
    } catch (const std::exception&) {
    }
  }

  void start_run(const httplib::Request& req, httplib::Response& res, RunRecord record,
                 std::function<void(RunRecord)> body) {
    store.store(record);
    const std::string id = record.id;
    auto done = launch([this, id, record = std::move(record), body = std::move(body)]() mutable {
      try {
        body(std::move(record));
      } catch (const StageError&) {
      } catch (const std::exception& e) {
        fail_if_unfinished(id, e.what());
      }
    });
    const bool async = req.has_param("async") && req.get_param_value("async") == "true";
    if (async || done.wait_for(config.sync_timeout) != std::future_status::ready) {
      send_json(res, 202, json(store.load(id)));
      return;
    }
    const RunRecord finished = store.load(id);
    if (finished.status == RunStatus::Failed && finished.error) {
      send_error(res, status_for_stage_error(finished.error->code), finished.error->code,
                 finished.error->message, json{{"stage", finished.error->stage}, {"run", json(finished)}});
      return;
    }
    send_json(res, 200, json(finished));
  }

  RunRecord load_run(const std::string& id) const {
    try {
      return store.load(id);
    } catch (const RunNotFound& e) {
      throw HttpError(404, "not_found", e.what());
    }
  }

  DialogSession require_session(const std::string& id) const {
    auto s = sessions.get(id);
    if (!s) throw HttpError(404, "not_found", "session not found: " + id);
    return *s;
  }

  void routes() {
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const HttpError& e) {
        send_error(res, e.status(), e.code(), e.what(), e.details());
      } catch (const StageError& e) {
        const HttpError h = from_stage_error(e);
        send_error(res, h.status(), h.code(), h.what(), h.details());
      } catch (const json::exception& e) {
        send_error(res, 400, "bad_request", e.what());
      } catch (const std::invalid_argument& e) {
        send_error(res, 400, "bad_request", e.what());
      } catch (const LlmError& e) {
        send_error(res, 502, "llm_error", e.what());
      } catch (const CorruptRunFile& e) {
        send_error(res, 500, "corrupt_run_file", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal_error", e.what());
      } catch (...) {
        send_error(res, 500, "internal_error", "unknown error");
      }
    });

    if (!config.cors_origin.empty()) {
      server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", config.cors_origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization");
      });
      server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }

    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, json{{"status", "ok"}});
    });

    server.Post("/v1/layout", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const std::string caption = required_string(body, "caption");
      LayoutStageResult r = run_layout_stage(*backend_for(body), config.llm, template_for(body), caption);
      json warnings = json::array();
      for (const auto& w : r.parse_warnings) warnings.push_back(diagnostic_json(w));
      send_json(res, 200,
                json{{"layout", r.layout},
                     {"completion", r.completion},
                     {"validation", r.validation},
                     {"warnings", warnings}});
    });

    server.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const std::string caption = required_string(body, "caption");
      if (trim(caption).empty()) throw HttpError(400, "bad_request", "caption must not be empty");
      auto backend = backend_for(body);
      DialogSession s = start_session(*backend, config.llm, template_for(body), caption);
      {
        std::lock_guard lock(session_backend_mutex);
        session_backends[s.id] = backend;
      }
      sessions.put(s);
      send_json(res, 201, json(s));
    });

    server.Get(R"(/v1/sessions/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, json(require_session(req.matches[1].str())));
    });

    server.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/turn)", [this](const httplib::Request& req,
                                                                 httplib::Response& res) {
      const json body = parse_body(req);
      const std::string message = required_string(body, "message");
      if (trim(message).empty()) throw HttpError(400, "bad_request", "message must not be empty");
      const std::string id = req.matches[1].str();
      std::shared_ptr<ChatBackend> backend;
      {
        std::lock_guard lock(session_backend_mutex);
        const auto it = session_backends.find(id);
        if (it == session_backends.end()) throw HttpError(404, "not_found", "session not found: " + id);
        backend = it->second;
      }
      auto updated = sessions.update(
          id, [&](const DialogSession& s) { return dialog_turn(*backend, config.llm, s, message); });
      if (!updated) throw HttpError(404, "not_found", "session not found: " + id);
      send_json(res, 200, json(*updated));
    });

    server.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      if (!body.contains("layout")) throw HttpError(400, "bad_request", "missing field 'layout'");
      Layout layout;
      try {
        layout = body.at("layout").get<Layout>();
      } catch (const std::exception& e) {
        throw HttpError(400, "invalid_layout", e.what());
      }
      PipelineOptions opts = options_for(body);
      RunRecord record = RunRecord::create(
          "", json{{"generation", opts.generation}, {"parallelism", opts.parallelism}});
      start_run(req, res, std::move(record), [this, layout, opts](RunRecord r) {
        (void)run_generation(layout, opts, store, std::move(r));
      });
    });

    server.Post("/v1/pipeline", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const std::string caption = required_string(body, "caption");
      if (trim(caption).empty()) throw HttpError(400, "bad_request", "caption must not be empty");
      PipelineOptions opts = options_for(body);
      auto backend = backend_for(body);
      RunRecord record = RunRecord::create(caption, config_snapshot(opts, config.llm));
      start_run(req, res, std::move(record), [this, backend, caption, opts](RunRecord r) {
        (void)run_pipeline(*backend, config.llm, caption, opts, store, std::move(r));
      });
    });

    server.Post("/v1/benchmark/run", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      BenchmarkOptions opts;
      try {
        if (body.contains("kinds")) {
          for (const auto& k : body.at("kinds")) opts.kinds.push_back(task_kind_from_string(k.get<std::string>()));
        } else {
          const std::string kind = body.value("kind", "all");
          if (kind == "all") {
            opts.kinds = {TaskKind::Negation, TaskKind::Numeracy, TaskKind::AttributeAssignment,
                          TaskKind::SpatialRelationship};
          } else {
            opts.kinds = {task_kind_from_string(kind)};
          }
        }
        opts.n = body.value("n", 100);
        opts.seed = body.value("seed", std::uint64_t{0});
        opts.parallelism = body.value("parallelism", config.parallelism);
      } catch (const std::exception& e) {
        throw HttpError(400, "bad_request", e.what());
      }
      if (opts.n < 0 || opts.n > 10000) throw HttpError(400, "bad_request", "n must lie in [0, 10000]");
      if (opts.parallelism < 1 || opts.parallelism > config.parallelism) {
        opts.parallelism = config.parallelism;
      }
      const BenchmarkReport report = run_benchmark(*backend_for(body), config.llm, default_template(), opts);
      send_json(res, 200, json(report));
    });

    server.Get(R"(/v1/runs/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, json(load_run(req.matches[1].str())));
    });

    server.Get(R"(/v1/runs/([A-Za-z0-9_-]+)/image\.png)", [this](const httplib::Request& req,
                                                                 httplib::Response& res) {
      const RunRecord r = load_run(req.matches[1].str());
      if (r.status != RunStatus::ImageDone) {
        throw HttpError(404, "not_ready", "run " + r.id + " has no image (status " +
                                              std::string(to_string(r.status)) + ")");
      }
      res.set_content(store.read_artifact(r.id, "image.png"), "image/png");
    });

    server.Get(R"(/v1/runs/([A-Za-z0-9_-]+)/layout\.svg)", [this](const httplib::Request& req,
                                                                  httplib::Response& res) {
      const RunRecord r = load_run(req.matches[1].str());
      if (!r.layout) {
        throw HttpError(404, "not_ready", "run " + r.id + " has no layout");
      }
      res.set_content(render_layout_svg(*r.layout), "image/svg+xml");
    });
  }
};

Service::Service(AppConfig config, std::shared_ptr<ChatBackend> live, std::shared_ptr<ChatBackend> mock)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(live), std::move(mock))) {}

Service::~Service() { stop(); }

int Service::bind() {
  const auto& c = impl_->config;
  if (c.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(c.host);
  } else if (impl_->server.bind_to_port(c.host, c.port)) {
    impl_->bound_port = c.port;
  } else {
    impl_->bound_port = -1;
  }
  if (impl_->bound_port <= 0) {
    throw std::runtime_error("cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return impl_->bound_port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) {
    impl_->server.stop();
  }
  impl_->wait_for_jobs();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

int Service::port() const { return impl_->bound_port; }

int serve(const AppConfig& config) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(config, std::make_shared<HttpChatBackend>());
  const int port = service.bind();
  std::cerr << "lmd: listening on " << config.host << ":" << port << "\n";

  std::thread server_thread([&] { service.listen(); });
  int received = 0;
  sigwait(&signals, &received);
  std::cerr << "lmd: received signal " << received << ", shutting down\n";
  service.stop();
  server_thread.join();
  return 0;
}

}  // namespace lmd
