#include "refine_loop/service/server.hpp"

#include <httplib.h>

#include "refine_loop/core/error.hpp"
#include "refine_loop/core/io.hpp"
#include "refine_loop/core/log.hpp"

namespace refine_loop::service {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json body = json::parse(req.body);
    if (!body.is_object()) raise(ErrorKind::InvalidValue, "request body must be a JSON object");
    return body;
  } catch (const json::exception& e) {
    raise(ErrorKind::InvalidValue, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string annotator_of(const httplib::Request& req, const json& body) {
  if (body.contains("annotator_id") && body["annotator_id"].is_string()) return body["annotator_id"].get<std::string>();
  if (req.has_param("annotator")) return req.get_param_value("annotator");
  return {};
}

}  // namespace

int http_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::UnknownExperiment:
    case ErrorKind::UnknownPair:
    case ErrorKind::UnknownDialogue:
    case ErrorKind::UnknownSentence: return 404;
    case ErrorKind::InvalidChoice:
    case ErrorKind::InvalidTurnIndex:
    case ErrorKind::InvalidValue:
    case ErrorKind::MalformedRecord:
    case ErrorKind::WrongKind: return 400;
    case ErrorKind::NoRecords:
    case ErrorKind::KeyUnavailable: return 409;
    default: return 500;
  }
}

AnnotationServer::AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> static_dir)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_json(res, http_status(e.kind()), {{"error", to_string(e.kind())}, {"message", e.what()}});
      } catch (const std::exception& e) {
        log(LogLevel::Error, std::string("annotation server: ") + e.what());
        send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  };

  server_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server_->Get(R"(/experiments/([^/]+)/next)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto pair = store_.next_pair(req.matches[1].str(), req.get_param_value("annotator"));
    if (!pair) {
      send_json(res, 200, {{"status", "NO_TASKS"}});
    } else {
      ordered_json body = blinded_pair_json(*pair);
      body["status"] = "OK";
      send_json(res, 200, body);
    }
  }));

  server_->Post(R"(/experiments/([^/]+)/pairs/([^/]+)/preference)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  if (!body.contains("choice") || !body["choice"].is_string()) {
                    raise(ErrorKind::InvalidChoice, "body needs a string 'choice'");
                  }
                  const auto id = store_.submit_preference(req.matches[1].str(), req.matches[2].str(),
                                                           annotator_of(req, body), body["choice"].get<std::string>());
                  send_json(res, 201, {{"record_id", id}});
                }));

  server_->Get(R"(/experiments/([^/]+)/results)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, store_.results(req.matches[1].str()).to_json());
  }));

  server_->Get(R"(/experiments/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, store_.export_unblinded(req.matches[1].str()));
  }));

  server_->Get(R"(/attribution/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const AttributionView view = store_.attribution_task(req.matches[1].str());
    ordered_json labels = ordered_json::object();
    for (const auto& [sentence, record] : view.labels) {
      labels[std::to_string(sentence)] = {{"turn_indices", record.turn_indices},
                                          {"annotator_id", record.annotator_id},
                                          {"record_id", record.record_id}};
    }
    ordered_json body;
    body["dialogue"] = dialogue_to_json(view.dialogue);
    body["summary"] = summary_to_json(view.summary);
    body["labels"] = std::move(labels);
    body["coverage"] = view.coverage;
    send_json(res, 200, body);
  }));

  server_->Post(R"(/attribution/([^/]+)/sentences/(\d+))",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  if (!body.contains("turn_indices") || !body["turn_indices"].is_array()) {
                    raise(ErrorKind::InvalidValue, "body needs a 'turn_indices' list");
                  }
                  std::vector<std::size_t> turns;
                  for (const auto& value : body["turn_indices"]) {
                    if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
                      raise(ErrorKind::InvalidTurnIndex, "turn index " + value.dump() + " is not a valid index");
                    }
                    turns.push_back(value.get<std::size_t>());
                  }
                  const auto id = store_.submit_attribution(req.matches[1].str(), std::stoul(req.matches[2].str()),
                                                            std::move(turns), annotator_of(req, body));
                  send_json(res, 201, {{"record_id", id}});
                }));

  if (static_dir && !server_->set_mount_point("/", static_dir->string())) {
    log_warn("annotation server: static directory " + static_dir->string() + " not found");
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) raise(ErrorKind::Io, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) raise(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationServer::run() { server_->listen_after_bind(); }

void AnnotationServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

bool AnnotationServer::running() const { return server_->is_running(); }

}  // namespace refine_loop::service
