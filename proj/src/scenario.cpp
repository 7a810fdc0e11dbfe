#include "mtmc/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "io_util.hpp"
#include "mtmc/error.hpp"
#include "mtmc/evaluate.hpp"

namespace mtmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMinSeparationDeg = 15.0;

struct PairInfo {
  bool overlapping = false;
  double overlap_s = 0.0;
};

struct Visit {
  int camera = 0;
  int entry_frame = 0;  // relative until the start offset is applied
  int dwell_frames = 0;
  bool left_to_right = true;
};

int to_frames(double seconds, double fps) { return static_cast<int>(std::lround(seconds * fps)); }

std::string topology_name(Topology t) {
  switch (t) {
    case Topology::kLine:
      return "line";
    case Topology::kGrid:
      return "grid";
    case Topology::kCustom:
      return "custom";
  }
  return "line";
}

Topology parse_topology(const std::string& s) {
  if (s == "line") return Topology::kLine;
  if (s == "grid") return Topology::kGrid;
  if (s == "custom") return Topology::kCustom;
  throw ConfigError("unknown topology '" + s + "'");
}

std::vector<std::pair<int, int>> adjacent_pairs(const ScenarioConfig& cfg) {
  std::vector<std::pair<int, int>> pairs;
  switch (cfg.topology) {
    case Topology::kLine:
      for (int i = 0; i + 1 < cfg.n_cameras; ++i) pairs.emplace_back(i, i + 1);
      break;
    case Topology::kGrid:
      for (int i = 0; i < cfg.n_cameras; ++i) {
        const int col = i % cfg.grid_columns;
        if (col + 1 < cfg.grid_columns && i + 1 < cfg.n_cameras) pairs.emplace_back(i, i + 1);
        if (i + cfg.grid_columns < cfg.n_cameras) pairs.emplace_back(i, i + cfg.grid_columns);
      }
      break;
    case Topology::kCustom:
      for (auto [a, b] : cfg.custom_edges) pairs.emplace_back(std::min(a, b), std::max(a, b));
      break;
  }
  return pairs;
}

std::vector<Feature> draw_base_features(int n, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double max_cos = std::cos(kMinSeparationDeg * std::numbers::pi / 180.0);
  std::vector<Feature> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++attempts > 1000 * n + 1000) {
      throw ConfigError("cannot place " + std::to_string(n) + " features of dimension " +
                        std::to_string(dim) + " at 15 degree separation");
    }
    Feature f(dim);
    for (auto& v : f) v = normal(rng);
    f = l2_normalized(f);
    const bool ok = std::all_of(out.begin(), out.end(),
                                [&](const Feature& g) { return dot(f, g) <= max_cos; });
    if (ok) out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

namespace {

// Coordinates on a 1/256 px grid survive the x,y,w,h file form exactly.
double on_grid(double v) { return std::round(v * 256.0) / 256.0; }

BoundingBox on_grid(const BoundingBox& b) {
  return {on_grid(b.x1), on_grid(b.y1), on_grid(b.x2), on_grid(b.y2)};
}

}  // namespace

std::string camera_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "c%03d", index + 1);
  return buf;
}

void ScenarioConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (n_vehicles < 1 || n_cameras < 1 || frames_per_camera < 1) {
    throw ConfigError("vehicle, camera and frame counts must be positive");
  }
  if (!(fps > 0.0) || width < 1 || height < 1) throw ConfigError("bad fps or image size");
  if (feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  if (!prob(noise.dropout) || !prob(overlap_fraction)) {
    throw ConfigError("probabilities must lie in [0,1]");
  }
  if (noise.box_jitter_sigma < 0 || noise.feature_sigma < 0 || noise.false_positive_rate < 0) {
    throw ConfigError("noise parameters must be >= 0");
  }
  if (!(dwell_min_s > 0.0) || dwell_min_s > dwell_max_s) throw ConfigError("bad dwell range");
  if (transit_min_s < 0.0 || transit_min_s > transit_max_s) throw ConfigError("bad transit range");
  if (overlap_seconds < 0.0) throw ConfigError("overlap_seconds must be >= 0");
  if (topology == Topology::kGrid && grid_columns < 1) throw ConfigError("grid_columns must be >= 1");
  if (topology == Topology::kCustom) {
    for (auto [a, b] : custom_edges) {
      if (a < 0 || b < 0 || a >= n_cameras || b >= n_cameras || a == b) {
        throw ConfigError("custom edge references an unknown camera");
      }
    }
  }
  if (route_length < 0 || route_length > n_cameras) throw ConfigError("bad route_length");
  if (to_frames(dwell_min_s, fps) < 2) throw ConfigError("dwell must span at least two frames");
}

ScenarioConfig scenario_config_from_json(const std::string& text) {
  ScenarioConfig c;
  try {
    const auto j = json::parse(text);
    c.seed = j.value("seed", c.seed);
    c.n_vehicles = j.value("n_vehicles", c.n_vehicles);
    c.n_cameras = j.value("n_cameras", c.n_cameras);
    c.frames_per_camera = j.value("frames_per_camera", c.frames_per_camera);
    c.fps = j.value("fps", c.fps);
    c.width = j.value("width", c.width);
    c.height = j.value("height", c.height);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.topology = parse_topology(j.value("topology", std::string("line")));
    c.grid_columns = j.value("grid_columns", c.grid_columns);
    for (const auto& e : j.value("custom_edges", json::array())) {
      c.custom_edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
    c.route_length = j.value("route_length", c.route_length);
    c.overlap_seconds = j.value("overlap_seconds", c.overlap_seconds);
    c.overlap_fraction = j.value("overlap_fraction", c.overlap_fraction);
    c.dwell_min_s = j.value("dwell_min_s", c.dwell_min_s);
    c.dwell_max_s = j.value("dwell_max_s", c.dwell_max_s);
    c.transit_min_s = j.value("transit_min_s", c.transit_min_s);
    c.transit_max_s = j.value("transit_max_s", c.transit_max_s);
    c.camera_spacing_m = j.value("camera_spacing_m", c.camera_spacing_m);
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      c.noise.box_jitter_sigma = n.value("box_jitter_sigma", 0.0);
      c.noise.feature_sigma = n.value("feature_sigma", 0.0);
      c.noise.dropout = n.value("dropout", 0.0);
      c.noise.false_positive_rate = n.value("false_positive_rate", 0.0);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string scenario_config_to_json(const ScenarioConfig& c) {
  json edges = json::array();
  for (auto [a, b] : c.custom_edges) edges.push_back({a, b});
  return json{{"seed", c.seed},
              {"n_vehicles", c.n_vehicles},
              {"n_cameras", c.n_cameras},
              {"frames_per_camera", c.frames_per_camera},
              {"fps", c.fps},
              {"width", c.width},
              {"height", c.height},
              {"feature_dim", c.feature_dim},
              {"topology", topology_name(c.topology)},
              {"grid_columns", c.grid_columns},
              {"custom_edges", edges},
              {"route_length", c.route_length},
              {"overlap_seconds", c.overlap_seconds},
              {"overlap_fraction", c.overlap_fraction},
              {"dwell_min_s", c.dwell_min_s},
              {"dwell_max_s", c.dwell_max_s},
              {"transit_min_s", c.transit_min_s},
              {"transit_max_s", c.transit_max_s},
              {"camera_spacing_m", c.camera_spacing_m},
              {"noise",
               {{"box_jitter_sigma", c.noise.box_jitter_sigma},
                {"feature_sigma", c.noise.feature_sigma},
                {"dropout", c.noise.dropout},
                {"false_positive_rate", c.noise.false_positive_rate}}}}
      .dump(2);
}

std::map<int, std::set<TrajectoryRef>> GroundTruth::correspondence() const {
  std::map<int, std::set<TrajectoryRef>> out;
  for (const auto& [ref, vehicle] : vehicle_of) out[vehicle].insert(ref);
  return out;
}

std::vector<Trajectory> GroundTruth::all_trajectories() const {
  std::vector<Trajectory> out;
  for (const auto& [cam, list] : trajectories) out.insert(out.end(), list.begin(), list.end());
  return out;
}

Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Scenario sc;
  sc.config = cfg;
  const double fps = cfg.fps;
  const int n = cfg.n_cameras;

  // Cameras and graph.
  for (int i = 0; i < n; ++i) {
    Camera cam;
    cam.camera_id = camera_name(i);
    if (cfg.topology == Topology::kGrid) {
      cam.position = {(i % cfg.grid_columns) * cfg.camera_spacing_m,
                      (i / cfg.grid_columns) * cfg.camera_spacing_m};
      cam.zone_id = i / cfg.grid_columns + 1;
    } else {
      cam.position = {i * cfg.camera_spacing_m, 0.0};
      cam.zone_id = i + 1;
    }
    sc.graph.add_camera(cam);
    sc.metas[cam.camera_id] = {cam.camera_id, "clips/" + cam.camera_id + ".mp4",
                               cfg.frames_per_camera, cfg.width, cfg.height, fps};
  }

  const int dwell_lo = to_frames(cfg.dwell_min_s, fps);
  const int dwell_hi = to_frames(cfg.dwell_max_s, fps);
  const int transit_lo = to_frames(cfg.transit_min_s, fps);
  const int transit_hi = to_frames(cfg.transit_max_s, fps);
  const int overlap_frames = to_frames(cfg.overlap_seconds, fps);

  std::map<std::pair<int, int>, PairInfo> pair_info;
  std::map<int, std::vector<int>> neighbours;
  for (auto [a, b] : adjacent_pairs(cfg)) {
    PairInfo info;
    if (overlap_frames > 0 && unit(rng) < cfg.overlap_fraction) {
      info.overlapping = true;
      info.overlap_s = overlap_frames / fps;
    }
    pair_info[{a, b}] = info;
    neighbours[a].push_back(b);
    neighbours[b].push_back(a);
    // Entry-to-entry bounds, widened by one frame for rounding.
    TravelTime tt;
    if (info.overlapping) {
      tt = {(dwell_lo - overlap_frames - 1) / fps, (dwell_hi + 1) / fps};
      sc.graph.set_overlap(camera_name(a), camera_name(b), info.overlap_s);
    } else {
      tt = {(dwell_lo + transit_lo - 1) / fps, (dwell_hi + transit_hi + 1) / fps};
    }
    sc.graph.add_edge(camera_name(a), camera_name(b), tt);
    sc.graph.add_edge(camera_name(b), camera_name(a), tt);
  }
  for (auto& [cam, list] : neighbours) std::sort(list.begin(), list.end());

  sc.truth.base_features = draw_base_features(cfg.n_vehicles, cfg.feature_dim, rng);

  const int route_len = cfg.route_length > 0
                            ? cfg.route_length
                            : (cfg.topology == Topology::kLine ? n : std::min(n, 3));
  const int budget = cfg.frames_per_camera;
  const int worst_span = route_len * dwell_hi + (route_len - 1) * transit_hi;
  if (worst_span >= budget) {
    throw ConfigError("route of " + std::to_string(route_len) + " cameras may need " +
                      std::to_string(worst_span) + " frames, budget is " +
                      std::to_string(budget));
  }

  struct VehiclePlan {
    std::vector<Visit> visits;
    double width = 0, height = 0;
  };
  std::vector<VehiclePlan> plans(cfg.n_vehicles);

  for (int v = 0; v < cfg.n_vehicles; ++v) {
    auto& plan = plans[v];
    std::vector<int> route;
    if (cfg.topology == Topology::kLine) {
      const int start = static_cast<int>(unit(rng) * (n - route_len + 1));
      for (int k = 0; k < route_len; ++k) route.push_back(start + k);
      if (unit(rng) < 0.5) std::reverse(route.begin(), route.end());
    } else {
      route.push_back(static_cast<int>(unit(rng) * n));
      while (static_cast<int>(route.size()) < route_len) {
        std::vector<int> options;
        for (int nb : neighbours[route.back()]) {
          if (std::find(route.begin(), route.end(), nb) == route.end()) options.push_back(nb);
        }
        if (options.empty()) break;
        route.push_back(options[static_cast<std::size_t>(unit(rng) * options.size())]);
      }
    }
    const bool forward = route.size() < 2 || route[1] > route[0];

    plan.width = uniform(0.08, 0.14) * cfg.width;
    plan.height = uniform(0.07, 0.12) * cfg.height;

    int entry = 0;
    for (std::size_t k = 0; k < route.size(); ++k) {
      Visit visit;
      visit.camera = route[k];
      visit.dwell_frames = dwell_lo + static_cast<int>(unit(rng) * (dwell_hi - dwell_lo + 1));
      visit.dwell_frames = std::min(visit.dwell_frames, dwell_hi);
      visit.left_to_right = forward;
      if (k > 0) {
        const auto& prev = plan.visits.back();
        const auto key = std::pair{std::min(route[k - 1], route[k]), std::max(route[k - 1], route[k])};
        const auto& info = pair_info.at(key);
        if (info.overlapping) {
          // Enters the next view while still inside the previous one.
          const int lo = std::max(1, overlap_frames / 5);
          const int ov = lo + static_cast<int>(unit(rng) * (overlap_frames - lo + 1));
          entry = prev.entry_frame + prev.dwell_frames - std::min(ov, overlap_frames);
        } else {
          const int transit =
              transit_lo + static_cast<int>(unit(rng) * (transit_hi - transit_lo + 1));
          entry = prev.entry_frame + prev.dwell_frames + std::min(transit, transit_hi);
        }
      }
      visit.entry_frame = entry;
      plan.visits.push_back(visit);
    }
    int lo = 0, hi = 0;
    for (const auto& vis : plan.visits) {
      lo = std::min(lo, vis.entry_frame);
      hi = std::max(hi, vis.entry_frame + vis.dwell_frames);
    }
    const int slack = budget - 1 - (hi - lo);
    const int shift = -lo + static_cast<int>(unit(rng) * (slack + 1));
    for (auto& vis : plan.visits) vis.entry_frame += std::min(shift, budget - 1 - hi);
  }

  // Per-camera ground truth in entry order.
  struct Pending {
    int entry;
    int vehicle;
    const Visit* visit;
  };
  std::map<int, std::vector<Pending>> per_camera;
  for (int v = 0; v < cfg.n_vehicles; ++v) {
    for (const auto& vis : plans[v].visits) per_camera[vis.camera].push_back({vis.entry_frame, v, &vis});
  }
  std::map<std::pair<int, int>, TrajectoryRef> ref_of;  // (vehicle, camera) -> ref
  for (int c = 0; c < n; ++c) {
    auto& list = per_camera[c];
    std::sort(list.begin(), list.end(), [](const Pending& a, const Pending& b) {
      return std::tie(a.entry, a.vehicle) < std::tie(b.entry, b.vehicle);
    });
    auto& gts = sc.truth.trajectories[camera_name(c)];
    for (const auto& p : list) {
      const auto& plan = plans[p.vehicle];
      Trajectory t;
      t.trajectory_id = static_cast<std::int64_t>(gts.size());
      t.camera_id = camera_name(c);
      const double y1 = uniform(0.0, cfg.height - plan.height);
      const double x_left = 0.0;
      const double x_right = cfg.width - plan.width;
      const double xs = p.visit->left_to_right ? x_left : x_right;
      const double xe = p.visit->left_to_right ? x_right : x_left;
      const int steps = p.visit->dwell_frames;
      for (int k = 0; k <= steps; ++k) {
        const double x = xs + (xe - xs) * k / steps;
        t.boxes[p.entry + k] = on_grid(BoundingBox{x, y1, x + plan.width, y1 + plan.height});
      }
      t.frame_features = {sc.truth.base_features[p.vehicle]};
      t.feature = sc.truth.base_features[p.vehicle];
      t.n_key_frames = static_cast<int>(t.boxes.size());
      t.orientation = compute_orientation(t);
      t.update_times(fps);
      sc.truth.vehicle_of[t.ref()] = p.vehicle;
      ref_of[{p.vehicle, c}] = t.ref();
      gts.push_back(std::move(t));
    }
  }

  for (int v = 0; v < cfg.n_vehicles; ++v) {
    const auto& visits = plans[v].visits;
    for (std::size_t k = 1; k < visits.size(); ++k) {
      const auto& a = visits[k - 1];
      const auto& b = visits[k];
      sc.truth.traversals.push_back({v, camera_name(a.camera), camera_name(b.camera),
                                     a.entry_frame / fps, (a.entry_frame + a.dwell_frames) / fps,
                                     b.entry_frame / fps});
    }
  }

  // Detections, one independent stream per camera.
  for (int c = 0; c < n; ++c) {
    const CameraId cam = camera_name(c);
    std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(c),
                      static_cast<std::uint64_t>(0x6d74'6d63)};
    std::mt19937_64 crng(seq);
    std::uniform_real_distribution<double> cu(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::poisson_distribution<int> fp_count(
        cfg.noise.false_positive_rate > 0 ? cfg.noise.false_positive_rate : 1.0);

    std::map<int, std::vector<std::pair<const Trajectory*, BoundingBox>>> visible;
    for (const auto& t : sc.truth.trajectories[cam]) {
      for (const auto& [frame, box] : t.boxes) visible[frame].emplace_back(&t, box);
    }
    auto& dets = sc.detections[cam];
    auto& labels = sc.detection_labels[cam];
    for (int frame = 0; frame < cfg.frames_per_camera; ++frame) {
      for (const auto& [traj, truth_box] : visible[frame]) {
        if (cfg.noise.dropout > 0 && cu(crng) < cfg.noise.dropout) continue;
        BoundingBox b = truth_box;
        if (cfg.noise.box_jitter_sigma > 0) {
          const double s = cfg.noise.box_jitter_sigma;
          b = {b.x1 + s * jitter(crng), b.y1 + s * jitter(crng), b.x2 + s * jitter(crng),
               b.y2 + s * jitter(crng)};
          if (b.x1 > b.x2) std::swap(b.x1, b.x2);
          if (b.y1 > b.y2) std::swap(b.y1, b.y2);
          b = on_grid(clamp_to_image(b, cfg.width, cfg.height));
        }
        Feature f = traj->feature;
        if (cfg.noise.feature_sigma > 0) {
          for (auto& x : f) x += cfg.noise.feature_sigma * jitter(crng);
          f = l2_normalized(f);
        }
        Detection d;
        d.camera_id = cam;
        d.frame = frame;
        d.box = b;
        d.confidence = cfg.noise.box_jitter_sigma > 0 || cfg.noise.feature_sigma > 0
                           ? 0.5 + 0.5 * cu(crng)
                           : 1.0;
        d.feature = std::move(f);
        d.detection_id = static_cast<std::int64_t>(dets.size());
        dets.push_back(std::move(d));
        labels.push_back(traj->trajectory_id);
      }
      if (cfg.noise.false_positive_rate > 0) {
        const int k = fp_count(crng);
        for (int i = 0; i < k; ++i) {
          const double w = (0.04 + 0.1 * cu(crng)) * cfg.width;
          const double h = (0.04 + 0.1 * cu(crng)) * cfg.height;
          const double x = cu(crng) * (cfg.width - w);
          const double y = cu(crng) * (cfg.height - h);
          Feature f(cfg.feature_dim);
          for (auto& v : f) v = jitter(crng);
          Detection d;
          d.camera_id = cam;
          d.frame = frame;
          d.box = on_grid(BoundingBox{x, y, x + w, y + h});
          d.confidence = 0.05 + 0.55 * cu(crng);
          d.feature = l2_normalized(f);
          d.detection_id = static_cast<std::int64_t>(dets.size());
          dets.push_back(std::move(d));
          labels.push_back(-1);
        }
      }
    }
  }
  return sc;
}

void write_scenario(const fs::path& dir, const Scenario& sc) {
  fs::create_directories(dir / "gt");
  for (const auto& [cam, meta] : sc.metas) {
    write_detections(dir / (cam + ".csv"), sc.detections.at(cam));
    write_camera_meta(dir / (cam + ".meta.json"), meta);
    write_trajectories_jsonl(dir / "gt" / (cam + ".jsonl"), sc.truth.trajectories.at(cam));
  }
  write_camera_graph(dir / "graph.json", sc.graph);
  json vehicles = json::array();
  for (const auto& [v, refs] : sc.truth.correspondence()) {
    json members = json::array();
    for (const auto& r : refs) members.push_back(r.str());
    vehicles.push_back({{"vehicle", v}, {"members", members}});
  }
  json traversals = json::array();
  for (const auto& t : sc.truth.traversals) {
    traversals.push_back({{"vehicle", t.vehicle}, {"from", t.from}, {"to", t.to},
                          {"entry_from", t.entry_from}, {"exit_from", t.exit_from},
                          {"entry_to", t.entry_to}});
  }
  detail::write_file(dir / "truth.json",
                     json{{"vehicles", vehicles}, {"traversals", traversals}}.dump(2) + "\n");
  detail::write_file(dir / "config.json", scenario_config_to_json(sc.config) + "\n");
}

std::vector<SweepRow> sweep_intervals(const Scenario& scenario, const std::vector<int>& intervals,
                                      const SweepOptions& options) {
  const auto gts = scenario.truth.all_trajectories();
  std::vector<SweepRow> rows;
  for (int interval : intervals) {
    if (interval < 1) throw ConfigError("sweep intervals must be >= 1");
    SweepRow row;
    row.interval = interval;
    row.wall_seconds = INFINITY;
    const SamplingConfig sampling{interval, scenario.config.fps, options.confidence_threshold};
    for (int rep = 0; rep < std::max(1, options.repeats); ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<Trajectory> preds;
      for (const auto& [cam, dets] : scenario.detections) {
        const auto sampled = sample_and_filter(dets, sampling);
        auto tracks = track_camera(sampled, sampling, options.association,
                                   scenario.metas.at(cam).frame_count);
        preds.insert(preds.end(), std::make_move_iterator(tracks.begin()),
                     std::make_move_iterator(tracks.end()));
      }
      const auto report = evaluate(preds, gts);
      const auto t1 = std::chrono::steady_clock::now();
      row.wall_seconds =
          std::min(row.wall_seconds, std::chrono::duration<double>(t1 - t0).count());
      row.precision = report.total_scores.precision;
      row.recall = report.total_scores.recall;
      row.predicted = static_cast<std::int64_t>(preds.size());
      row.ground_truth = static_cast<std::int64_t>(gts.size());
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> sweep_intervals(const ScenarioConfig& config,
                                      const std::vector<int>& intervals,
                                      const SweepOptions& options) {
  return sweep_intervals(generate(config), intervals, options);
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "interval,wall_seconds,predicted,ground_truth,precision_pct,recall_pct\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%lld,%lld,%.2f,%.2f\n", r.interval, r.wall_seconds,
                  static_cast<long long>(r.predicted), static_cast<long long>(r.ground_truth),
                  r.precision * 100.0, r.recall * 100.0);
    out << buf;
  }
  return out.str();
}

}  // namespace mtmc
