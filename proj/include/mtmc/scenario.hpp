#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mtmc/ingest.hpp"
#include "mtmc/recommend.hpp"
#include "mtmc/tracker.hpp"
#include "mtmc/trajectory.hpp"

namespace mtmc {

enum class Topology { kLine, kGrid, kCustom };

struct NoiseConfig {
  double box_jitter_sigma = 0.0;  ///< pixels
  double feature_sigma = 0.0;
  double dropout = 0.0;              ///< per-detection miss probability
  double false_positive_rate = 0.0;  ///< Poisson mean per frame per camera
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int n_vehicles = 10;
  int n_cameras = 3;
  int frames_per_camera = 300;
  double fps = 10.0;
  int width = 1280;
  int height = 960;
  int feature_dim = 32;

  Topology topology = Topology::kLine;
  int grid_columns = 2;
  std::vector<std::pair<int, int>> custom_edges;  ///< undirected, by camera index
  /// Cameras visited per vehicle; 0 means n_cameras for a line and
  /// min(n_cameras, 3) otherwise.
  int route_length = 0;

  double overlap_seconds = 0.0;  ///< O on overlapping adjacent pairs
  double overlap_fraction = 1.0;  ///< share of adjacent pairs that overlap
  double dwell_min_s = 3.0;       ///< time to cross one camera's view
  double dwell_max_s = 6.0;
  double transit_min_s = 1.0;  ///< exit-to-entry gap on non-overlapping pairs
  double transit_max_s = 3.0;
  double camera_spacing_m = 100.0;

  NoiseConfig noise;

  void validate() const;
};

ScenarioConfig scenario_config_from_json(const std::string& text);
std::string scenario_config_to_json(const ScenarioConfig& config);

struct Traversal {
  int vehicle = 0;
  CameraId from;
  CameraId to;
  double entry_from = 0.0;
  double exit_from = 0.0;
  double entry_to = 0.0;
};

struct GroundTruth {
  std::map<CameraId, std::vector<Trajectory>> trajectories;  ///< dense, per camera
  std::map<TrajectoryRef, int> vehicle_of;
  std::vector<Feature> base_features;
  std::vector<Traversal> traversals;

  /// Vehicle -> its per-camera trajectories.
  std::map<int, std::set<TrajectoryRef>> correspondence() const;
  std::vector<Trajectory> all_trajectories() const;
};

struct Scenario {
  ScenarioConfig config;
  GroundTruth truth;
  CameraGraph graph;
  std::map<CameraId, CameraVideoMeta> metas;
  std::map<CameraId, std::vector<Detection>> detections;
  /// Parallel to `detections`: gt trajectory id, or -1 for false positives.
  std::map<CameraId, std::vector<std::int64_t>> detection_labels;
};

std::string camera_name(int index);

/// Deterministic in `config.seed`. Throws ConfigError when the route cannot
/// fit the frame budget.
Scenario generate(const ScenarioConfig& config);

/// Emits <cam>.csv/.mtft/.meta.json, gt/<cam>.jsonl, graph.json, truth.json,
/// config.json.
void write_scenario(const std::filesystem::path& dir, const Scenario& scenario);

struct SweepRow {
  int interval = 1;
  double wall_seconds = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::int64_t predicted = 0;
  std::int64_t ground_truth = 0;
};

struct SweepOptions {
  AssociationConfig association;
  double confidence_threshold = 0.1;
  /// Wall time is the minimum over this many runs.
  int repeats = 1;
};

/// Runs sample -> track -> evaluate for each interval against ground truth.
std::vector<SweepRow> sweep_intervals(const Scenario& scenario, const std::vector<int>& intervals,
                                      const SweepOptions& options = {});
std::vector<SweepRow> sweep_intervals(const ScenarioConfig& config,
                                      const std::vector<int>& intervals,
                                      const SweepOptions& options = {});

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace mtmc
