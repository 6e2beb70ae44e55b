#include "pbo/http_server.hpp"

#include <httplib.h>

#include <iostream>

namespace pbo {
namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"code", code}, {"message", message}});
}

int status_for(const ServiceError& e) {
  switch (e.code()) {
    case ServiceError::Code::NotFound: return 404;
    case ServiceError::Code::Conflict: return 409;
    case ServiceError::Code::Closed: return 409;
    case ServiceError::Code::Invalid: return 400;
  }
  return 500;
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_error(res, status_for(e), e.code_name(), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "invalid_request", e.what());
    } catch (const InvalidArgument& e) {
      send_error(res, 400, "invalid_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) throw InvalidArgument("request body must be a JSON object");
  json body = json::parse(req.body);
  if (!body.is_object()) throw InvalidArgument("request body must be a JSON object");
  return body;
}

}  // namespace

void install_routes(httplib::Server& server, SessionManager& manager) {
  server.Post("/sessions", guarded([&manager](const httplib::Request& req, httplib::Response& res) {
                const auto created = manager.create_session(session_config_from_json(parse_body(req)));
                send_json(res, 201,
                          {{"session_id", created.session_id},
                           {"revision", created.revision},
                           {"query", query_to_json(created.query)}});
              }));

  server.Post(R"(/sessions/([^/]+)/responses)",
              guarded([&manager](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                if (!body.contains("revision") || !body.contains("choice"))
                  throw InvalidArgument("body needs 'revision' and 'choice'");
                const auto r = manager.submit_response(req.matches[1], body.at("revision").get<std::uint64_t>(),
                                                       body.at("choice").get<int>());
                send_json(res, 200,
                          {{"revision", r.revision},
                           {"query", query_to_json(r.query)},
                           {"incumbent", point_to_json(r.incumbent)},
                           {"incumbent_mean", r.incumbent_mean},
                           {"prefetch_hit", r.prefetch_hit}});
              }));

  server.Get(R"(/sessions/([^/]+)/recommendation)",
             guarded([&manager](const httplib::Request& req, httplib::Response& res) {
               const auto r = manager.get_recommendation(req.matches[1]);
               json trace = json::array();
               for (std::size_t i = 0; i < r.trace.size(); ++i)
                 trace.push_back({{"point", point_to_json(r.trace[i])}, {"mean", r.mean_trace[i]}});
               send_json(res, 200, {{"point", point_to_json(r.point)}, {"mean", r.mean}, {"trace", trace}});
             }));

  server.Get(R"(/sessions/([^/]+))", guarded([&manager](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, snapshot_to_json(manager.get_session(req.matches[1])));
             }));
}

void run_http_server(const std::string& host, int port, const std::filesystem::path& data_dir) {
  SessionManager manager(data_dir);
  httplib::Server server;
  install_routes(server, manager);
  std::cerr << "pbo serve: listening on " << host << ':' << port << ", data dir " << data_dir.string() << " ("
            << manager.session_ids().size() << " sessions restored)\n";
  if (!server.listen(host, port)) throw Error("http: cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace pbo
