#pragma once

// Session service: per-session pipeline state behind a small request
// router. Transport is left to the caller (tools/topofuse_server.cpp binds
// it to HTTP).
//
// Mutating requests on one session are serialized by rejection: if another
// mutation is in flight the request gets 409 with "retry": true. Reads
// work on the last published snapshot and never block on mutations.

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topofuse/artifacts.hpp"
#include "topofuse/error.hpp"
#include "topofuse/pipeline.hpp"

namespace topofuse {

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

using Query = std::map<std::string, std::string>;

class SessionService {
 public:
  /// Immutable view of one session after a mutation.
  struct Snapshot {
    PipelineConfig config;
    PipelineState state;
    ArtifactMap artifacts;
    Json manifest;
  };

  explicit SessionService(std::optional<std::filesystem::path> data_dir = std::nullopt)
      : data_dir_(std::move(data_dir)) {}

  Response handle(std::string_view method, std::string_view path, const Query& query, std::string_view body) {
    try {
      return route(method, path, query, body);
    } catch (const HttpError& e) {
      return error(e.status, e.what(), e.retry);
    } catch (const ConfigError& e) {
      return error(422, e.what());
    } catch (const StageError& e) {
      return error(422, e.what());
    } catch (const InputError& e) {
      return error(422, e.what());
    } catch (const FormatError& e) {
      return error(422, e.what());
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

  std::shared_ptr<const Snapshot> snapshot(const std::string& id) const {
    auto s = find(id);
    return s ? s->load() : nullptr;
  }

  /// Claims the session's mutation slot as an in-flight request would.
  /// Empty when the session is unknown or already busy.
  std::optional<std::unique_lock<std::mutex>> acquire(const std::string& id) {
    auto s = find(id);
    if (!s) return std::nullopt;
    std::unique_lock<std::mutex> lock(s->mutation, std::try_to_lock);
    if (!lock.owns_lock()) return std::nullopt;
    return lock;
  }

 private:
  struct HttpError : Error {
    HttpError(int s, const std::string& what, bool r = false) : Error(what), status(s), retry(r) {}
    int status;
    bool retry;
  };

  struct Session {
    std::mutex mutation;
    mutable std::mutex publish;
    std::shared_ptr<const Snapshot> current;

    std::shared_ptr<const Snapshot> load() const {
      std::lock_guard<std::mutex> g(publish);
      return current;
    }
    void store(std::shared_ptr<const Snapshot> s) {
      std::lock_guard<std::mutex> g(publish);
      current = std::move(s);
    }
  };

  static Response json(const Json& j, int status = 200) { return {status, "application/json", dump(j)}; }

  static Response error(int status, const std::string& message, bool retry = false) {
    Json j = detail::header("error");
    j["status"] = status;
    j["error"] = message;
    if (retry) j["retry"] = true;
    return json(j, status);
  }

  static std::vector<std::string_view> split_path(std::string_view p) {
    std::vector<std::string_view> out;
    while (!p.empty()) {
      const auto slash = p.find('/');
      const auto part = p.substr(0, slash);
      if (!part.empty()) out.push_back(part);
      if (slash == std::string_view::npos) break;
      p.remove_prefix(slash + 1);
    }
    return out;
  }

  static Json parse_body(std::string_view body) {
    if (body.empty()) return Json::object();
    Json j;
    try {
      j = Json::parse(body);
    } catch (const Json::exception& e) {
      throw HttpError(422, std::string("request body is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw HttpError(422, "request body must be a JSON object");
    return j;
  }

  static std::size_t query_size(const Query& q, const char* key, std::size_t fallback) {
    auto it = q.find(key);
    if (it == q.end()) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      if (used != it->second.size() || v < 1) throw std::invalid_argument("range");
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw HttpError(422, std::string("query parameter '") + key + "' must be a positive integer");
    }
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard<std::mutex> g(registry_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  std::shared_ptr<Session> require_session(std::string_view id) const {
    auto s = find(std::string(id));
    if (!s) throw HttpError(404, "unknown session '" + std::string(id) + "'");
    return s;
  }

  void publish(const std::string& id, Session& s, PipelineConfig config, PipelineState state) {
    auto snap = std::make_shared<Snapshot>();
    snap->artifacts = collect_artifacts(state, config);
    snap->manifest = make_manifest(state, config, snap->artifacts);
    snap->config = std::move(config);
    snap->state = std::move(state);
    if (data_dir_) {
      const auto dir = *data_dir_ / id;
      std::filesystem::create_directories(dir);
      detail::write_bytes(dir / "manifest.json", dump(snap->manifest));
    }
    s.store(std::move(snap));
  }

  template <class Fn>
  Response mutate(std::string_view id, Fn&& fn) {
    auto s = require_session(id);
    std::unique_lock<std::mutex> lock(s->mutation, std::try_to_lock);
    if (!lock.owns_lock()) throw HttpError(409, "session is busy with another mutation", true);
    return fn(*s, s->load());
  }

  Response route(std::string_view method, std::string_view path, const Query& query, std::string_view body) {
    const auto parts = split_path(path);
    if (parts.empty() || parts[0] != "sessions") throw HttpError(404, "no such endpoint");
    if (parts.size() == 1) {
      if (method != "POST") throw HttpError(405, "use POST /sessions");
      return create(body);
    }
    const std::string id(parts[1]);
    if (parts.size() == 2) {
      if (method == "GET") return json(describe(id));
      throw HttpError(405, "unsupported method");
    }
    const std::string_view action = parts[2];
    if (action == "histogram" && method == "GET" && parts.size() == 3) return histogram(id, query);
    if (action == "simplify" && method == "POST" && parts.size() == 3) return simplify_request(id, body);
    if (action == "graph" && method == "GET" && parts.size() == 3) return graph(id);
    if (action == "path" && method == "POST" && parts.size() == 3) return path_request(id, body);
    if (action == "fuse" && method == "POST" && parts.size() == 3) return fuse_request(id, body);
    if (action == "field" && method == "GET" && parts.size() == 3) return field(id, query);
    if (action == "artifacts" && method == "GET" && parts.size() == 3) return json(artifact_list(id));
    if (action == "artifacts" && method == "GET" && parts.size() == 4) return artifact(id, std::string(parts[3]));
    throw HttpError(404, "no such endpoint");
  }

  Response create(std::string_view body) {
    const PipelineConfig config = config_from_json(parse_body(body));
    PipelineState state = stage_histogram(stage_load(config), config);
    auto s = std::make_shared<Session>();
    std::string id;
    {
      std::lock_guard<std::mutex> g(registry_);
      id = "s" + std::to_string(++counter_);
      sessions_[id] = s;
    }
    std::lock_guard<std::mutex> lock(s->mutation);
    publish(id, *s, config, std::move(state));
    Json out = describe(id);
    return json(out, 201);
  }

  Json describe(const std::string& id) const {
    auto snap = require_session(id)->load();
    Json j = detail::header("session");
    j["session_id"] = id;
    const auto& st = snap->state;
    j["stages"] = {{"histogram", bool(st.histogram)}, {"topology", bool(st.topology)}, {"paths", bool(st.paths)},
                   {"fusion", bool(st.fusion)}};
    if (st.inputs) {
      const auto& d = st.inputs->v1.dims;
      j["dims"] = {d.nx, d.ny, d.nz};
      j["volumes"] = {st.inputs->v1.name, st.inputs->v2.name};
      j["warnings"] = st.inputs->warnings;
    }
    if (st.histogram) j["histogram"] = to_json(st.histogram->histogram);
    j["config"] = to_json(snap->config);
    return j;
  }

  Response histogram(const std::string& id, const Query& q) const {
    auto snap = require_session(id)->load();
    const auto& hs = *snap->state.histogram;
    const std::string scale = q.contains("scale") ? q.at("scale") : "log";
    if (scale != "linear" && scale != "log") throw HttpError(422, "scale must be 'linear' or 'log'");
    const std::size_t factor = query_size(q, "decimate", 1);
    const auto& h = hs.histogram;
    const AxisRanges r{h.binning.range1(), h.binning.range2()};
    if (factor == 1) {
      const auto& a = snap->artifacts;
      return {200, "application/octet-stream", scale == "linear" ? a.at("histogram2d_counts.grid") : a.at("density.grid")};
    }
    std::vector<double> values = scale == "linear" ? std::vector<double>(h.counts.begin(), h.counts.end())
                                                   : hs.density.values;
    std::size_t m = 0;
    values = decimate(h.n(), values, factor, scale == "log", m);
    return {200, "application/octet-stream", encode_grid(m, values, r, scale == "linear" ? GridDType::u64 : GridDType::f64)};
  }

  Response simplify_request(const std::string& id, std::string_view body) {
    const Json req = parse_body(body);
    detail::reject_unknown(req, {"threshold", "noise_floor"}, "simplify request");
    return mutate(id, [&](Session& s, std::shared_ptr<const Snapshot> snap) {
      PipelineConfig cfg = snap->config;
      cfg.persistence_threshold = detail::field(req, "threshold", cfg.persistence_threshold);
      if (req.contains("noise_floor"))
        cfg.noise_floor = req.at("noise_floor").is_null() ? std::nullopt : std::optional(detail::field(req, "noise_floor", 0.0));
      cfg.selections.clear();
      validate(cfg);
      PipelineState st = stage_topology(snap->state, cfg);
      st = stage_paths(std::move(st), cfg);
      Json out = detail::header("simplify_summary");
      out["threshold"] = cfg.persistence_threshold;
      out["critical_points"] = {{"maxima", st.topology->maxima},
                                {"saddles", st.topology->saddles},
                                {"minima", st.topology->minima}};
      out["graph"] = {{"nodes", st.graph->graph.node_count()}, {"edges", st.graph->graph.edges.size()}};
      out["mst"] = {{"edges", st.graph->mst.edges.size()}, {"weight", st.graph->mst.total_weight()}};
      publish(id, s, std::move(cfg), std::move(st));
      return json(out);
    });
  }

  Response graph(const std::string& id) const {
    auto snap = require_session(id)->load();
    const auto& st = snap->state;
    if (!st.graph) throw HttpError(409, "simplify the histogram before requesting the graph");
    Json j = detail::header("graph_bundle");
    j["extremum_graph"] = to_json(st.topology->extremum_graph);
    j["weighted_graph"] = to_json(st.graph->graph);
    j["mst"] = to_json(st.graph->mst, "mst");
    if (st.paths) j["paths"] = to_json(st.paths->paths);
    return json(j);
  }

  Response path_request(const std::string& id, std::string_view body) {
    const Json req = parse_body(body);
    detail::reject_unknown(req, {"endpoints", "branches", "tau", "metric"}, "path request");
    return mutate(id, [&](Session& s, std::shared_ptr<const Snapshot> snap) {
      if (!snap->state.graph) throw HttpError(409, "simplify the histogram before selecting paths");
      PipelineConfig cfg = snap->config;
      if (req.contains("endpoints") && req.contains("branches"))
        throw HttpError(422, "give either endpoints or branches, not both");
      if (req.contains("endpoints")) {
        const auto e = detail::field(req, "endpoints", std::vector<std::size_t>{});
        if (e.size() != 2) throw HttpError(422, "endpoints must be two node ids");
        cfg.selections = {{e[0], e[1]}};
      } else if (req.contains("branches")) {
        cfg.selections.clear();
        for (const auto& b : detail::field(req, "branches", std::vector<std::vector<std::size_t>>{})) {
          if (b.size() != 2) throw HttpError(422, "each branch must be two node ids");
          cfg.selections.emplace_back(b[0], b[1]);
        }
        if (cfg.selections.empty()) throw HttpError(422, "branches must not be empty");
      }
      cfg.tau = detail::field(req, "tau", cfg.tau);
      if (req.contains("metric")) {
        const auto m = detail::field(req, "metric", std::string());
        if (m != "weight" && m != "hops") throw HttpError(422, "metric must be 'weight' or 'hops'");
        cfg.path_metric = m == "weight" ? PathMetric::weight : PathMetric::hops;
      }
      validate(cfg);
      PipelineState st = stage_paths(snap->state, cfg);
      Json out = to_json(st.paths->paths);
      publish(id, s, std::move(cfg), std::move(st));
      return json(out);
    });
  }

  Response fuse_request(const std::string& id, std::string_view body) {
    const Json req = parse_body(body);
    detail::reject_unknown(req, {"smoothing", "sample_count", "mode", "pullback", "density_bins", "min_persistence", "fused_dtype"},
                           "fuse request");
    return mutate(id, [&](Session& s, std::shared_ptr<const Snapshot> snap) {
      if (!snap->state.paths) throw HttpError(409, "select a path before fusing");
      Json patch = to_json(snap->config);
      const std::pair<const char*, const char*> keys[] = {{"smoothing", "smoothing_factor"},
                                                          {"sample_count", "sample_count"},
                                                          {"mode", "fusion_mode"},
                                                          {"pullback", "pullback"},
                                                          {"density_bins", "density_bins"},
                                                          {"min_persistence", "min_persistence"},
                                                          {"fused_dtype", "fused_dtype"}};
      for (const auto& [from, to] : keys)
        if (req.contains(from)) patch[to] = req.at(from);
      PipelineConfig cfg = config_from_json(patch);
      PipelineState st = stage_fuse(snap->state, cfg);
      Json out = detail::header("fusion_result");
      out["fusion_mode"] = to_string(st.fusion->mode);
      out["peaks"] = to_json(st.fusion->peaks, cfg.min_persistence);
      out["spline_density"] = to_json(st.fusion->spline_density);
      out["fused_volume"] = "artifacts/fused.nrrd";
      out["preview"] = "field";
      publish(id, s, std::move(cfg), std::move(st));
      out["manifest"] = s.load()->manifest;
      return json(out);
    });
  }

  /// F over the histogram grid, or the branch assignment with ?grid=branch.
  Response field(const std::string& id, const Query& q) const {
    auto snap = require_session(id)->load();
    const auto& st = snap->state;
    if (!st.fusion) throw HttpError(409, "fuse before requesting the parameterized grid");
    const std::string which = q.contains("grid") ? q.at("grid") : "ell";
    if (which != "ell" && which != "branch") throw HttpError(422, "grid must be 'ell' or 'branch'");
    const std::size_t factor = query_size(q, "decimate", 1);
    if (factor == 1)
      return {200, "application/octet-stream",
              snap->artifacts.at(which == "ell" ? "parameterization.grid" : "branch_assignment.grid")};
    const auto& h = st.histogram->histogram;
    const AxisRanges r{h.binning.range1(), h.binning.range2()};
    const auto& f = st.fusion->field;
    // subsample rather than reduce: F and branch ids are labels, not masses
    const std::size_t m = (f.n + factor - 1) / factor;
    std::vector<double> values(m * m);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t c = j * factor * f.n + i * factor;
        values[j * m + i] = which == "ell" ? f.values[c] : f.branch_assignment[c];
      }
    return {200, "application/octet-stream",
            encode_grid(m, values, r, which == "ell" ? GridDType::f64 : GridDType::i32)};
  }

  Json artifact_list(const std::string& id) const {
    auto snap = require_session(id)->load();
    Json j = detail::header("artifact_list");
    j["artifacts"] = snap->manifest.at("artifacts");
    return j;
  }

  Response artifact(const std::string& id, const std::string& name) const {
    auto snap = require_session(id)->load();
    if (name == "manifest.json") return json(snap->manifest);
    auto it = snap->artifacts.find(name);
    if (it == snap->artifacts.end()) throw HttpError(404, "no artifact named '" + name + "' in this session");
    const bool is_json = name.size() > 5 && name.ends_with(".json");
    const bool is_csv = name.ends_with(".csv");
    return {200, is_json ? "application/json" : (is_csv ? "text/csv" : "application/octet-stream"), it->second};
  }

  std::optional<std::filesystem::path> data_dir_;
  mutable std::mutex registry_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

}  // namespace topofuse
