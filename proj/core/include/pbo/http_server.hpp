#pragma once

// JSON-over-HTTP routes for SessionManager.

#include "pbo/service.hpp"

#include <filesystem>
#include <string>

namespace httplib {
class Server;
}

namespace pbo {

/// POST /sessions, POST /sessions/{id}/responses,
/// GET /sessions/{id}/recommendation, GET /sessions/{id}.
/// Errors are {"code", "message"} with status 400, 404, 409 or 500.
void install_routes(httplib::Server& server, SessionManager& manager);

/// Blocks serving on host:port until the server is stopped.
void run_http_server(const std::string& host, int port, const std::filesystem::path& data_dir);

}  // namespace pbo
