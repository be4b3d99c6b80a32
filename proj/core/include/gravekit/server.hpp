#pragma once

#include "gravekit/error.hpp"
#include "gravekit/service.hpp"

#include <memory>
#include <string>

// JSON-over-HTTP front end for the validation workflow.
//
//   POST /documents                          manifest (JSON, or multipart with the page files)
//   GET  /documents, /documents/{id}
//   POST /documents/{id}/detections          detection JSON lines
//   POST /documents/{id}/assemble            starts a job; GET /jobs/{id} polls it
//   GET  /documents/{id}/records
//   GET  /documents/{id}/queue/next          ?session=<token> moves that session's cursor
//   POST /records/{id}/step                  {version, action, payload}
//   GET  /records/{id}
//   POST /records/{id}/recompute
//   GET  /documents/{id}/export              ?format=csv|json&all=1
//   GET  /documents/{id}/stats/rose          ?sector=10
//   GET  /documents/{id}/stats/outlines
//   GET  /documents/{id}/stats/pca           ?k=2
//   GET  /pages/{id}/image, /pages/{id}/crop?x0=&y0=&x1=&y1=
//   POST /sessions {document_id}, GET /sessions/{token}
//
// Errors come back as {"error": <code>, "message": ...}.

namespace gravekit {

struct ServerOptions {
    /// When set, every request must send "Authorization: Bearer <token>" or ?token=.
    std::string token;
    /// Directory for multipart uploads; a fresh temporary one when empty.
    std::string upload_dir;
};

class Server {
public:
    Server(Service& service, ServerOptions options = {});
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and returns the port; port 0 picks a free one. Throws on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Call bind() first.
    void run();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// HTTP status for an engine error code.
int http_status(ErrorCode code) noexcept;

}  // namespace gravekit
