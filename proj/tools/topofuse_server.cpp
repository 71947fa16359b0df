// HTTP front end for the session service.
//
//   topofuse_server --host 127.0.0.1 --port 8080 --data-dir sessions/
//
// TOPOFUSE_HOST, TOPOFUSE_PORT and TOPOFUSE_DATA_DIR are used when the
// matching flag is absent.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "topofuse/service.hpp"

int main(int argc, char** argv) {
  CLI::App app{"topofuse session service"};
  std::string host = std::getenv("TOPOFUSE_HOST") ? std::getenv("TOPOFUSE_HOST") : "127.0.0.1";
  int port = std::getenv("TOPOFUSE_PORT") ? std::atoi(std::getenv("TOPOFUSE_PORT")) : 8080;
  std::string data_dir = std::getenv("TOPOFUSE_DATA_DIR") ? std::getenv("TOPOFUSE_DATA_DIR") : "";
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port");
  app.add_option("--data-dir", data_dir, "Directory for session manifests (empty: in memory only)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  topofuse::SessionService service(data_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(data_dir));
  httplib::Server server;
  auto bridge = [&](const httplib::Request& req, httplib::Response& res) {
    topofuse::Query query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const auto out = service.handle(req.method, req.path, query, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(R"(/sessions.*)", bridge);
  server.Post(R"(/sessions.*)", bridge);

  std::printf("listening on %s:%d\n", host.c_str(), port);
  if (!server.listen(host, port)) {
    std::fprintf(stderr, "error: cannot bind %s:%d\n", host.c_str(), port);
    return 1;
  }
  return 0;
}
