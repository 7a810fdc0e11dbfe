#include "mtmc/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include <nlohmann/json.hpp>

#include "io_util.hpp"
#include "mtmc/error.hpp"

namespace mtmc {

namespace {

std::pair<CameraId, CameraId> unordered_key(const CameraId& a, const CameraId& b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}

bool candidate_order(const Candidate& a, const Candidate& b) {
  if (a.time_offset != b.time_offset) return a.time_offset < b.time_offset;
  if (a.camera_id != b.camera_id) return a.camera_id < b.camera_id;
  return a.trajectory->trajectory_id < b.trajectory->trajectory_id;
}

}  // namespace

void CameraGraph::add_camera(Camera camera) {
  if (camera.camera_id.empty()) throw InputError("camera id must be non-empty");
  if (cameras_.contains(camera.camera_id)) {
    throw InputError("duplicate camera " + camera.camera_id);
  }
  cameras_.emplace(camera.camera_id, std::move(camera));
}

void CameraGraph::add_edge(const CameraId& from, const CameraId& to, TravelTime bounds) {
  if (!has_camera(from) || !has_camera(to)) {
    throw InputError("edge " + from + "->" + to + " references an unknown camera");
  }
  if (bounds.min_s > bounds.max_s) {
    throw InputError("edge " + from + "->" + to + ": travel_time_min > travel_time_max");
  }
  edges_[{from, to}] = bounds;
}

void CameraGraph::set_overlap(const CameraId& a, const CameraId& b, double seconds) {
  if (!has_camera(a) || !has_camera(b)) {
    throw InputError("overlap " + a + "/" + b + " references an unknown camera");
  }
  if (!(seconds >= 0.0)) throw InputError("overlap must be >= 0");
  overlaps_[unordered_key(a, b)] = seconds;
}

const Camera& CameraGraph::camera(const CameraId& id) const {
  const auto it = cameras_.find(id);
  if (it == cameras_.end()) throw InputError("unknown camera " + id);
  return it->second;
}

std::optional<TravelTime> CameraGraph::edge(const CameraId& from, const CameraId& to) const {
  const auto it = edges_.find({from, to});
  if (it == edges_.end()) return std::nullopt;
  return it->second;
}

double CameraGraph::overlap(const CameraId& a, const CameraId& b) const {
  const auto it = overlaps_.find(unordered_key(a, b));
  return it == overlaps_.end() ? 0.0 : it->second;
}

std::optional<TravelTime> CameraGraph::path_bounds(const CameraId& from, const CameraId& to,
                                                   int max_hops) const {
  std::optional<TravelTime> best;
  std::set<CameraId> on_path{from};
  std::function<void(const CameraId&, int, double, double)> walk =
      [&](const CameraId& at, int hops, double lo, double hi) {
        if (hops == max_hops) return;
        for (auto it = edges_.lower_bound({at, CameraId{}});
             it != edges_.end() && it->first.first == at; ++it) {
          const CameraId& next = it->first.second;
          const double nlo = lo + it->second.min_s;
          const double nhi = hi + it->second.max_s;
          if (next == to) {
            if (!best) {
              best = TravelTime{nlo, nhi};
            } else {
              best->min_s = std::min(best->min_s, nlo);
              best->max_s = std::max(best->max_s, nhi);
            }
          }
          if (on_path.contains(next)) continue;
          on_path.insert(next);
          walk(next, hops + 1, nlo, nhi);
          on_path.erase(next);
        }
      };
  walk(from, 0, 0.0, 0.0);
  return best;
}

std::string camera_graph_to_json(const CameraGraph& graph) {
  nlohmann::json cams = nlohmann::json::array();
  for (const auto& [id, c] : graph.cameras()) {
    cams.push_back({{"camera_id", id}, {"position", {c.position.x, c.position.y}},
                    {"zone_id", c.zone_id}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [key, tt] : graph.edges()) {
    edges.push_back({{"from", key.first}, {"to", key.second}, {"tt_min", tt.min_s},
                     {"tt_max", tt.max_s}});
  }
  nlohmann::json overlaps = nlohmann::json::array();
  for (const auto& [key, seconds] : graph.overlaps()) {
    overlaps.push_back({{"a", key.first}, {"b", key.second}, {"seconds", seconds}});
  }
  return nlohmann::json{{"cameras", cams}, {"edges", edges}, {"overlaps", overlaps}}.dump(2);
}

CameraGraph camera_graph_from_json(const std::string& text) {
  CameraGraph graph;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& c : j.at("cameras")) {
      Camera cam;
      cam.camera_id = c.at("camera_id").get<std::string>();
      const auto& pos = c.at("position");
      cam.position = {pos.at(0).get<double>(), pos.at(1).get<double>()};
      cam.zone_id = c.value("zone_id", 0);
      graph.add_camera(std::move(cam));
    }
    for (const auto& e : j.value("edges", nlohmann::json::array())) {
      graph.add_edge(e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                     {e.at("tt_min").get<double>(), e.at("tt_max").get<double>()});
    }
    for (const auto& o : j.value("overlaps", nlohmann::json::array())) {
      graph.set_overlap(o.at("a").get<std::string>(), o.at("b").get<std::string>(),
                        o.at("seconds").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("camera graph: ") + e.what());
  }
  return graph;
}

CameraGraph read_camera_graph(const std::filesystem::path& path) {
  return camera_graph_from_json(detail::read_file(path));
}

void write_camera_graph(const std::filesystem::path& path, const CameraGraph& graph) {
  detail::write_file(path, camera_graph_to_json(graph) + "\n");
}

std::vector<Candidate> csg(double st_sch, const std::vector<Trajectory>& gallery,
                           const TimeWindow& window) {
  std::vector<Candidate> out;
  for (const auto& j : gallery) {
    const double d = j.st - st_sch;
    if (d >= window.min_offset && d <= window.max_offset) {
      out.push_back({&j, j.camera_id, d, 0.0});
    }
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.time_offset != b.time_offset) return a.time_offset < b.time_offset;
    return a.trajectory->trajectory_id < b.trajectory->trajectory_id;
  });
  return out;
}

std::vector<Candidate> time_constrained_gallery(
    const Trajectory& query, const CameraGraph& graph, const std::vector<CameraId>& gallery_cams,
    const std::map<CameraId, std::vector<Trajectory>>& per_cam_galleries,
    const TimeWindow& window, const GalleryOptions& options) {
  if (!graph.has_camera(query.camera_id)) {
    throw InputError("query camera " + query.camera_id + " is not in the camera graph");
  }
  TimeWindow effective = window;
  if (options.extend_max_by_query_duration) {
    effective.max_offset = (query.et - query.st) + window.max_offset;
  }

  std::vector<Candidate> result;
  std::set<TrajectoryRef> seen;
  for (const auto& cam : gallery_cams) {
    if (!graph.has_camera(cam)) throw InputError("unknown gallery camera " + cam);
    const auto it = per_cam_galleries.find(cam);
    if (it == per_cam_galleries.end()) continue;
    const double o = graph.overlap(cam, query.camera_id);
    const double st_sch = o > 0.0 ? query.st - o : query.st;
    for (auto& c : csg(st_sch, it->second, effective)) {
      if (!seen.insert(c.ref()).second) continue;
      c.appearance_distance = cosine_distance(query.feature, c.trajectory->feature);
      result.push_back(std::move(c));
    }
  }
  std::sort(result.begin(), result.end(), candidate_order);
  return result;
}

std::vector<Candidate> topology_prune(const std::vector<Candidate>& candidates,
                                      const Trajectory& query, const CameraGraph& graph,
                                      const PruneOptions& options) {
  std::set<int> allowed_zones;
  if (options.zone_hint) {
    // Zone digraph induced by camera edges; a zone is allowed when it lies on
    // some walk from the hint's start zone to its end zone.
    std::map<int, std::set<int>> fwd, bwd;
    for (const auto& [key, tt] : graph.edges()) {
      const int a = graph.camera(key.first).zone_id;
      const int b = graph.camera(key.second).zone_id;
      fwd[a].insert(b);
      bwd[b].insert(a);
    }
    auto reach = [](int start, std::map<int, std::set<int>>& adj) {
      std::set<int> seen{start};
      std::vector<int> stack{start};
      while (!stack.empty()) {
        const int z = stack.back();
        stack.pop_back();
        for (int n : adj[z]) {
          if (seen.insert(n).second) stack.push_back(n);
        }
      }
      return seen;
    };
    const auto from_start = reach(options.zone_hint->from_zone, fwd);
    const auto to_end = reach(options.zone_hint->to_zone, bwd);
    std::set_intersection(from_start.begin(), from_start.end(), to_end.begin(), to_end.end(),
                          std::inserter(allowed_zones, allowed_zones.end()));
  }

  std::vector<Candidate> out;
  for (const auto& c : candidates) {
    if (!graph.has_camera(c.camera_id)) continue;
    if (options.zone_hint && !allowed_zones.contains(graph.camera(c.camera_id).zone_id)) continue;
    const double o = graph.overlap(query.camera_id, c.camera_id);
    const double gap = std::abs(c.time_offset);
    bool keep = false;
    for (const auto& bounds : {graph.path_bounds(query.camera_id, c.camera_id, options.max_hops),
                               graph.path_bounds(c.camera_id, query.camera_id, options.max_hops)}) {
      if (bounds && gap >= bounds->min_s - o && gap <= bounds->max_s + o) keep = true;
    }
    if (keep) out.push_back(c);
  }
  return out;
}

RankMode parse_rank_mode(const std::string& text) {
  if (text == "time") return RankMode::kTime;
  if (text == "appearance") return RankMode::kAppearance;
  if (text == "blend") return RankMode::kBlend;
  throw ConfigError("unknown ranking mode '" + text + "'");
}

std::string to_string(RankMode mode) {
  switch (mode) {
    case RankMode::kTime:
      return "time";
    case RankMode::kAppearance:
      return "appearance";
    case RankMode::kBlend:
      return "blend";
  }
  return "blend";
}

std::vector<Candidate> rank(std::vector<Candidate> candidates, const Trajectory& query,
                            const RankOptions& options) {
  if (!(options.alpha >= 0.0 && options.alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
  const double scale = options.time_scale > 0.0 ? options.time_scale : 1.0;
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& c = candidates[i];
    c.appearance_distance = cosine_distance(query.feature, c.trajectory->feature);
    double key = 0.0;
    switch (options.mode) {
      case RankMode::kTime:
        key = std::abs(c.time_offset);
        break;
      case RankMode::kAppearance:
        key = c.appearance_distance;
        break;
      case RankMode::kBlend:
        key = options.alpha * (std::abs(c.time_offset) / scale) +
              (1.0 - options.alpha) * c.appearance_distance;
        break;
    }
    keys.emplace_back(key, i);
  }
  std::stable_sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return candidates[a.second].ref() < candidates[b.second].ref();
  });
  std::vector<Candidate> out;
  out.reserve(candidates.size());
  for (const auto& [key, i] : keys) out.push_back(candidates[i]);
  return out;
}

}  // namespace mtmc
