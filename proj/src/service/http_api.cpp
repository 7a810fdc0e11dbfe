#include "mtmc/service/http_api.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mtmc/error.hpp"
#include "mtmc/service/archive.hpp"

namespace mtmc::service {

namespace fs = std::filesystem;
using nlohmann::json;

ServiceConfig ServiceConfig::load(const std::optional<fs::path>& file) {
  ServiceConfig config;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open service config " + file->string());
    json j;
    try {
      in >> j;
      if (!j.is_object()) throw ConfigError("service config must be a JSON object");
      config.broker_uri = j.value("broker_uri", config.broker_uri);
      config.store_path = j.value("store_path", config.store_path.string());
      config.listen_address = j.value("listen_address", config.listen_address);
      config.port = j.value("port", config.port);
    } catch (const json::exception& e) {
      throw ConfigError("bad service config " + file->string() + ": " + e.what());
    }
  }
  if (const char* v = std::getenv("MTMC_BROKER_URI")) config.broker_uri = v;
  if (const char* v = std::getenv("MTMC_STORE_PATH")) config.store_path = v;
  if (const char* v = std::getenv("MTMC_LISTEN_ADDRESS")) config.listen_address = v;
  if (const char* v = std::getenv("MTMC_PORT")) {
    char* end = nullptr;
    const long port = std::strtol(v, &end, 10);
    if (*v == '\0' || *end != '\0' || port < 0 || port > 65535) {
      throw ConfigError(std::string("MTMC_PORT is not a port number: ") + v);
    }
    config.port = static_cast<int>(port);
  }
  return config;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

template <class Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const VersionConflict& e) {
      send_json(res, 409, json{{"error", e.what()}, {"current_version", e.current_version()}});
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const InputError& e) {
      send_error(res, 422, e.what());
    } catch (const ConfigError& e) {
      send_error(res, 422, e.what());
    } catch (const FormatError& e) {
      send_error(res, 422, e.what());
    } catch (const RangeError& e) {
      send_error(res, 422, e.what());
    } catch (const json::exception& e) {
      send_error(res, 422, std::string("malformed body: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body);
  if (!body.is_object()) throw InputError("request body must be a JSON object");
  return body;
}

std::string user_of(const httplib::Request& req) {
  const auto user = req.get_header_value("X-User");
  return user.empty() ? "anonymous" : user;
}

TrajectoryRef parse_ref(const std::string& text) {
  try {
    return TrajectoryRef::parse(text);
  } catch (const Error&) {
    throw NotFoundError("unknown trajectory " + text);
  }
}

json meta_json(const CameraVideoMeta& meta, const CameraGraph& graph) {
  json j{{"camera_id", meta.camera_id}, {"clip_uri", meta.clip_uri},
         {"frame_count", meta.frame_count}, {"width", meta.width},
         {"height", meta.height}, {"fps", meta.fps}};
  if (graph.has_camera(meta.camera_id)) {
    const auto& cam = graph.camera(meta.camera_id);
    j["position"] = {cam.position.x, cam.position.y};
    j["zone_id"] = cam.zone_id;
  }
  return j;
}

json trajectory_summary(const TrajectoryRecord& r, const AnnotationStore& store) {
  json j{{"trajectory_id", r.ref.str()}, {"camera_id", r.ref.camera_id},
         {"clip_uri", r.clip_uri}, {"t_s", r.t_s}, {"t_e", r.t_e},
         {"first_frame", r.first_frame}, {"last_frame", r.last_frame()},
         {"version", store.version_of(r.ref)}};
  const auto gid = store.global_id_of(r.ref);
  j["global_id"] = gid ? json(*gid) : json(nullptr);
  return j;
}

double query_double(const httplib::Request& req, const std::string& key, double fallback) {
  if (!req.has_param(key)) return fallback;
  const auto text = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InputError("query parameter '" + key + "' is not a number: " + text);
  }
}

}  // namespace

ApiServer::ApiServer(AnnotationService& annotations, CameraGraph graph, Pipeline* pipeline)
    : annotations_(annotations),
      graph_(std::move(graph)),
      pipeline_(pipeline),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::install_routes() {
  auto& srv = *server_;

  srv.Get("/cameras", guarded([this](const httplib::Request&, httplib::Response& res) {
    json cams = json::array();
    annotations_.read([&](const AnnotationStore& store) {
      for (const auto& [id, meta] : store.cameras()) cams.push_back(meta_json(meta, graph_));
    });
    send_json(res, 200, cams);
  }));

  srv.Get(R"(/cameras/([^/]+)/trajectories)",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string camera = req.matches[1];
            json list = json::array();
            annotations_.read([&](const AnnotationStore& store) {
              if (!store.cameras().contains(camera)) {
                throw NotFoundError("unknown camera " + camera);
              }
              const auto& all = store.trajectories();
              for (auto it = all.lower_bound(TrajectoryRef{camera, std::numeric_limits<std::int64_t>::min()});
                   it != all.end() && it->first.camera_id == camera; ++it) {
                list.push_back(trajectory_summary(it->second, store));
              }
            });
            send_json(res, 200, list);
          }));

  srv.Get(R"(/trajectories/([^/]+))",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto ref = parse_ref(req.matches[1]);
            json body;
            annotations_.read([&](const AnnotationStore& store) {
              const auto& r = store.trajectory(ref);
              body = trajectory_summary(r, store);
              body["record"] = json::parse(trajectory_record_to_json(r));
              if (const auto gid = store.global_id_of(ref)) {
                body["annotation"] = json::parse(annotation_record_to_json(store.record(*gid)));
              }
            });
            send_json(res, 200, body);
          }));

  srv.Post("/recommend", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto ref = parse_ref(body.at("trajectory_id").get<std::string>());
    TimeWindow window;
    if (body.contains("window")) {
      window.min_offset = body["window"].at("min").get<double>();
      window.max_offset = body["window"].at("max").get<double>();
    }
    if (window.min_offset > window.max_offset) throw InputError("window min exceeds max");
    RankOptions rank_options;
    rank_options.mode = parse_rank_mode(body.value("mode", std::string("blend")));
    rank_options.alpha = body.value("alpha", rank_options.alpha);
    const int hops = body.value("hops", 0);
    if (hops < 0) throw InputError("hops must be non-negative");

    json out = json::array();
    annotations_.read([&](const AnnotationStore& store) {
      const Trajectory query = store.trajectory(ref).to_trajectory();
      std::set<TrajectoryRef> same_identity;
      if (const auto gid = store.global_id_of(ref)) same_identity = store.record(*gid).members;

      std::map<CameraId, std::vector<Trajectory>> galleries;
      std::vector<CameraId> cams;
      for (const auto& [r, record] : store.trajectories()) {
        if (r.camera_id == ref.camera_id || same_identity.contains(r)) continue;
        if (!graph_.has_camera(r.camera_id)) continue;
        galleries[r.camera_id].push_back(record.to_trajectory());
      }
      for (const auto& [cam, list] : galleries) cams.push_back(cam);
      if (!graph_.has_camera(ref.camera_id)) {
        if (!cams.empty()) throw InputError("camera " + ref.camera_id + " is not in the camera graph");
        return;
      }

      auto candidates = time_constrained_gallery(query, graph_, cams, galleries, window);
      if (hops > 0) {
        PruneOptions prune;
        prune.max_hops = hops;
        candidates = topology_prune(candidates, query, graph_, prune);
      }
      rank_options.time_scale =
          std::max({std::abs(window.min_offset), std::abs(window.max_offset), 1e-9});
      candidates = rank(std::move(candidates), query, rank_options);
      for (const auto& c : candidates) {
        const auto& record = store.trajectory(c.ref());
        json item = trajectory_summary(record, store);
        item["d"] = c.time_offset;
        item["appearance_distance"] = c.appearance_distance;
        out.push_back(std::move(item));
      }
    });
    send_json(res, 200, json{{"query", ref.str()}, {"candidates", out}});
  }));

  srv.Post("/matches", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto query = parse_ref(body.at("query_id").get<std::string>());
    const auto candidate = parse_ref(body.at("candidate_id").get<std::string>());
    std::optional<std::int64_t> expected;
    if (body.contains("expected_version") && !body["expected_version"].is_null()) {
      expected = body["expected_version"].get<std::int64_t>();
    }
    const auto user = user_of(req);
    auto record = annotations_
                      .write([=](AnnotationStore& store) {
                        return store.submit_match(query, candidate, user, expected);
                      })
                      .get();
    send_json(res, 200, json::parse(annotation_record_to_json(record)));
  }));

  srv.Delete(R"(/matches/([^/]+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto ref = parse_ref(req.matches[1]);
               const json body = parse_body(req);
               const auto expected = body.at("expected_version").get<std::int64_t>();
               const auto user = user_of(req);
               auto record = annotations_
                                 .write([=](AnnotationStore& store) {
                                   return store.unmatch(ref, user, expected);
                                 })
                                 .get();
               send_json(res, 200,
                         json{{"record", record ? json::parse(annotation_record_to_json(*record))
                                                : json(nullptr)}});
             }));

  srv.Get(R"(/overlay/([^/]+))",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            const double inf = std::numeric_limits<double>::infinity();
            const double from = query_double(req, "from", -inf);
            const double to = query_double(req, "to", inf);
            if (from > to) throw InputError("overlay range is empty");
            std::string text;
            annotations_.read([&](const AnnotationStore& store) {
              const bool numeric =
                  !id.empty() && id.find_first_not_of("0123456789") == std::string::npos;
              if (numeric) {
                text = overlay_to_json(store.build_overlay(std::stoll(id), from, to));
              } else {
                text = overlay_to_json(store.build_overlay(parse_ref(id), from, to));
              }
            });
            res.status = 200;
            res.set_content(text, "application/json");
          }));

  srv.Get("/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto format = req.has_param("format") ? req.get_param_value("format") : "mtmc";
    if (format != "mtmc") throw InputError("unsupported export format " + format);
    static std::atomic<std::uint64_t> counter{0};
    const auto dir = fs::temp_directory_path() /
                     ("mtmc-export-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::vector<std::pair<std::string, std::string>> files;
    try {
      std::vector<fs::path> written;
      annotations_.read([&](const AnnotationStore& store) { written = store.export_dataset(dir); });
      for (const auto& path : written) {
        std::ifstream in(path, std::ios::binary);
        files.emplace_back(path.filename().string(),
                           std::string(std::istreambuf_iterator<char>(in), {}));
      }
    } catch (...) {
      fs::remove_all(dir);
      throw;
    }
    fs::remove_all(dir);
    res.status = 200;
    res.set_header("Content-Disposition", "attachment; filename=\"mtmc-export.tar\"");
    res.set_content(make_tar(files), "application/x-tar");
  }));

  srv.Post("/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!pipeline_) {
      send_error(res, 503, "job pipeline is not running");
      return;
    }
    const json body = parse_body(req);
    const auto kind = parse_job_kind(body.at("kind").get<std::string>());
    const auto camera = body.at("camera_id").get<std::string>();
    const auto inputs = body.value("inputs", std::map<std::string, std::string>{});
    const auto job_id = pipeline_->enqueue(kind, camera, inputs);
    send_json(res, 200, json{{"job_id", job_id}});
  }));

  srv.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    if (!pipeline_) {
      send_error(res, 503, "job pipeline is not running");
      return;
    }
    const std::string id = req.matches[1];
    const auto status = pipeline_->status(id);
    if (!status) throw NotFoundError("unknown job " + id);
    send_json(res, 200,
              json{{"job_id", id}, {"state", to_string(status->state)},
                   {"attempts", status->attempts}});
  }));
}

int ApiServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ApiServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) {
    throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

void ApiServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace mtmc::service
