#include <httplib.h>
#include <json.hpp>

#include "ckg/error.hpp"
#include "ckg/eval.hpp"

namespace ckg {

namespace {

using nlohmann::json;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json acceptance_json(const AcceptanceReport& r) {
  json per_annotator = json::object();
  for (const auto& [id, p] : r.per_annotator) per_annotator[id] = optional_number(p);
  json per_stratum = json::object();
  for (const auto& [s, p] : r.per_stratum) per_stratum[std::string(to_string(s))] = optional_number(p);
  json majority_stratum = json::object();
  for (const auto& [s, p] : r.majority_vote_per_stratum) {
    majority_stratum[std::string(to_string(s))] = optional_number(p);
  }
  return json{{"per_annotator", per_annotator},
              {"overall", optional_number(r.overall)},
              {"per_stratum", per_stratum},
              {"coverage", r.coverage},
              {"majority_vote", optional_number(r.majority_vote)},
              {"majority_vote_per_stratum", majority_stratum},
              {"records", r.records}};
}

json position_json(const AnnotatorProgress& p) { return json{{"done", p.done}, {"total", p.total}}; }

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

}  // namespace

struct AnnotationServer::Impl {
  EvalService& service;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;

  Impl(EvalService& s, ServerOptions o) : service(s), options(std::move(o)) {}

  void routes() {
    server.Get("/api/next", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("annotator")) return send_error(res, 400, "missing annotator parameter");
      auto id = req.get_param_value("annotator");
      try {
        auto next = service.next_for(id);
        auto pos = position_json(service.progress_of(id));
        if (!next) return send_json(res, 200, json{{"complete", true}, {"position", pos}});
        json body{{"complete", false},
                  {"sample_id", next->sample_id},
                  {"head", next->triple.head.text},
                  {"relation", std::string(to_string(next->triple.relation))},
                  {"relation_sentence", next->relation_sentence},
                  {"tail", next->triple.tail},
                  {"position", pos}};
        if (options.reviewer) {
          body["stratum"] = std::string(to_string(next->stratum));
          body["filter_status"] = std::string(to_string(next->triple.filter_status));
        }
        send_json(res, 200, body);
      } catch (const ValidationError& e) {
        send_error(res, 422, e.what());
      }
    });

    server.Post("/api/judgment", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        return send_error(res, 400, "request body is not JSON");
      }
      if (!body.is_object() || !body.contains("sample_id") || !body.contains("annotator") ||
          !body.contains("label") || !body["sample_id"].is_string() || !body["annotator"].is_string() ||
          !body["label"].is_string()) {
        return send_error(res, 400, "expected string fields sample_id, annotator and label");
      }
      auto label = parse_annotation_label(body["label"].get<std::string>());
      if (!label) return send_error(res, 400, "label must be reasonable or unreasonable");
      AnnotationRecord rec;
      rec.sample_id = body["sample_id"].get<std::string>();
      rec.annotator_id = body["annotator"].get<std::string>();
      rec.label = *label;
      try {
        bool replaced = service.submit(rec);
        send_json(res, 200,
                  json{{"ok", true},
                       {"overwritten", replaced},
                       {"position", position_json(service.progress_of(rec.annotator_id))}});
      } catch (const ValidationError& e) {
        send_error(res, 422, e.what());
      } catch (const Error& e) {
        send_error(res, 500, e.what());
      }
    });

    server.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
      auto p = service.progress();
      json list = json::array();
      for (const auto& a : p.annotators) {
        list.push_back({{"annotator", a.annotator_id}, {"done", a.done}, {"total", a.total}});
      }
      send_json(res, 200, json{{"total_items", p.total_items}, {"annotators", list}, {"coverage", p.coverage}});
    });

    server.Get("/api/acceptance", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, acceptance_json(service.acceptance()));
    });

    server.Get("/api/records", [this](const httplib::Request&, httplib::Response& res) {
      std::string out;
      for (const auto& r : service.records()) {
        out += json{{"sample_id", r.sample_id},
                    {"annotator", r.annotator_id},
                    {"label", std::string(to_string(r.label))},
                    {"timestamp", r.timestamp}}
                   .dump();
        out += '\n';
      }
      res.set_content(out, "application/x-ndjson; charset=utf-8");
    });

    if (options.static_dir) {
      if (!server.set_mount_point("/", options.static_dir->string())) {
        throw IoError("static directory does not exist: " + options.static_dir->string());
      }
    }
  }
};

AnnotationServer::AnnotationServer(EvalService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  impl_->routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start() {
  auto& s = impl_->server;
  if (impl_->options.port == 0) {
    port_ = s.bind_to_any_port(impl_->options.host);
    if (port_ <= 0) throw IoError("cannot bind " + impl_->options.host);
  } else {
    if (!s.bind_to_port(impl_->options.host, impl_->options.port)) {
      throw IoError("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
    }
    port_ = impl_->options.port;
  }
  impl_->thread = std::thread([&s] { s.listen_after_bind(); });
  return port_;
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void AnnotationServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace ckg
