// Drives the session service in process, the way the UI would over HTTP.

#include <cstdio>

#include "topofuse/service.hpp"

using namespace topofuse;

static Json call(SessionService& svc, const char* method, const std::string& path, const std::string& body = "") {
  const Response r = svc.handle(method, path, {}, body);
  std::printf("%s %s -> %d\n", method, path.c_str(), r.status);
  return r.content_type == "application/json" ? Json::parse(r.body) : Json();
}

int main() {
  SessionService svc;
  const Json created = call(svc, "POST", "/sessions",
                            R"({"inputs": {"synth": {"voxels_per_blob": 50000}}, "sample_count": 100000})");
  const std::string base = "/sessions/" + created.at("session_id").get<std::string>();

  // fusing before a path exists is out of order
  call(svc, "POST", base + "/fuse");

  const Json summary = call(svc, "POST", base + "/simplify", R"({"threshold": 0.0})");
  std::printf("  %s\n", summary.at("critical_points").dump().c_str());

  const Json graph = call(svc, "GET", base + "/graph");
  const auto& nodes = graph.at("paths").at("paths").at(0).at("nodes");
  std::printf("  diameter runs from node %zu to node %zu\n", nodes.front().at("id").get<std::size_t>(),
              nodes.back().at("id").get<std::size_t>());

  const Json fused = call(svc, "POST", base + "/fuse", R"({"smoothing": 0.01})");
  std::printf("  fused histogram peaks: %zu\n", fused.at("peaks").at("count").get<std::size_t>());
}
