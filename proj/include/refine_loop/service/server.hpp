#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "refine_loop/core/error.hpp"
#include "refine_loop/service/annotation_store.hpp"

namespace httplib {
class Server;
}

namespace refine_loop::service {

// HTTP status for a domain error: 404 unknown ids, 400 bad input, 409 state conflicts.
int http_status(ErrorKind kind) noexcept;

/// HTTP front end of an AnnotationStore. Bodies are JSON.
///   GET  /healthz
///   GET  /experiments/{id}/next?annotator={a}
///   POST /experiments/{id}/pairs/{pid}/preference   {"choice", "annotator_id"}
///   GET  /experiments/{id}/results
///   GET  /experiments/{id}/export
///   GET  /attribution/{dialogue_id}
///   POST /attribution/{dialogue_id}/sentences/{idx} {"turn_indices", "annotator_id"}
/// Files under `static_dir`, when given, are served from /.
class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Port 0 binds any free port. Returns the bound port; throws Io on failure.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void run();
  void stop();
  bool running() const;

 private:
  AnnotationStore& store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace refine_loop::service
