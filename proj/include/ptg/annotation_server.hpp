#pragma once

#include "ptg/annotation_store.hpp"
#include "ptg/error.hpp"

#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace ptg {

struct ServerOptions {
    /// Images served under /media/{image_id}; looked up as <id>.<ext>.
    std::string media_dir;
    /// Built annotation UI served under /ui/.
    std::string ui_dir;
};

int http_status_for(ErrorCode code);

/// JSON HTTP API over an AnnotationStore:
///   POST /rounds                       create a round (body: round JSON)
///   GET  /rounds                       list round ids and progress
///   GET  /rounds/{id}                  round, status, progress
///   GET  /rounds/{id}/pairs?status=    pending | annotated | all
///   POST /rounds/{id}/pairs/{pair}/annotation   {"text":…, "annotator":…}
///   POST /rounds/{id}/export           finalize; returns a summary
///   GET  /rounds/{id}/export           the manifest (JSONL)
///   GET  /media/{image_id}
/// Errors are {"error": {"code":…, "message":…}}.
class AnnotationServer {
public:
    AnnotationServer(AnnotationStore& store, ServerOptions options = {});
    ~AnnotationServer();

    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    /// Blocks until stop().
    bool listen(const std::string& host, int port);
    /// Binds an ephemeral port and returns it; follow with listen_after_bind().
    int bind_to_any_port(const std::string& host);
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

private:
    void install_routes();

    AnnotationStore& store_;
    ServerOptions options_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace ptg
