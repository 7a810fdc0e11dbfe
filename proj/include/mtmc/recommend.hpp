#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mtmc/trajectory.hpp"

namespace mtmc {

struct Camera {
  CameraId camera_id;
  Vec2 position;  ///< planar metres
  int zone_id = 0;
};

struct TravelTime {
  double min_s = 0.0;
  double max_s = 0.0;
};

/// Cameras, directed reachability edges with entry-to-entry travel-time
/// bounds, and symmetric field-of-view overlap durations.
class CameraGraph {
 public:
  void add_camera(Camera camera);
  void add_edge(const CameraId& from, const CameraId& to, TravelTime bounds);
  void set_overlap(const CameraId& a, const CameraId& b, double seconds);

  bool has_camera(const CameraId& id) const { return cameras_.contains(id); }
  const Camera& camera(const CameraId& id) const;
  const std::map<CameraId, Camera>& cameras() const { return cameras_; }
  const std::map<std::pair<CameraId, CameraId>, TravelTime>& edges() const { return edges_; }
  std::optional<TravelTime> edge(const CameraId& from, const CameraId& to) const;
  /// Overlap O between two cameras; 0 when absent.
  double overlap(const CameraId& a, const CameraId& b) const;
  const std::map<std::pair<CameraId, CameraId>, double>& overlaps() const { return overlaps_; }

  /// Travel-time envelope over all directed paths from -> to with at most
  /// `max_hops` edges (sums of per-edge bounds). Empty when unreachable.
  std::optional<TravelTime> path_bounds(const CameraId& from, const CameraId& to,
                                        int max_hops) const;

 private:
  std::map<CameraId, Camera> cameras_;
  std::map<std::pair<CameraId, CameraId>, TravelTime> edges_;
  std::map<std::pair<CameraId, CameraId>, double> overlaps_;  ///< key ordered (min, max)
};

/// {cameras:[{camera_id, position:[x,y], zone_id}], edges:[{from,to,tt_min,tt_max}],
///  overlaps:[{a,b,seconds}]}
CameraGraph read_camera_graph(const std::filesystem::path& path);
void write_camera_graph(const std::filesystem::path& path, const CameraGraph& graph);
std::string camera_graph_to_json(const CameraGraph& graph);
CameraGraph camera_graph_from_json(const std::string& text);

struct TimeWindow {
  double min_offset = 0.0;
  double max_offset = 0.0;
};

struct Candidate {
  const Trajectory* trajectory = nullptr;  ///< non-owning; points into the gallery
  CameraId camera_id;
  double time_offset = 0.0;  ///< d = st_j - st_sch
  double appearance_distance = 0.0;

  TrajectoryRef ref() const { return trajectory->ref(); }
};

/// Window filter plus sort: every j with min <= st_j - st_sch <= max,
/// ascending by d, ties by trajectory id.
std::vector<Candidate> csg(double st_sch, const std::vector<Trajectory>& gallery,
                           const TimeWindow& window);

struct GalleryOptions {
  /// When set, the window's upper bound becomes (et_Q - st_Q) + max.
  bool extend_max_by_query_duration = false;
};

/// Time-constrained gallery over the listed cameras. Cameras that overlap
/// the query camera are searched from st_Q - O. The union is de-duplicated
/// and ordered by (d, camera_id, trajectory_id); appearance distances to the
/// query are filled in.
std::vector<Candidate> time_constrained_gallery(
    const Trajectory& query, const CameraGraph& graph, const std::vector<CameraId>& gallery_cams,
    const std::map<CameraId, std::vector<Trajectory>>& per_cam_galleries,
    const TimeWindow& window, const GalleryOptions& options = {});

struct ZoneTransition {
  int from_zone = 0;
  int to_zone = 0;
};

struct PruneOptions {
  int max_hops = 1;
  std::optional<ZoneTransition> zone_hint;
};

/// Removes candidates on cameras not connected to the query camera within
/// the hop budget (either direction), candidates whose |d| lies outside
/// [tt_min - O, tt_max + O] of the connecting path, and, given a zone hint,
/// candidates in zones that lie on no route from the hint's start zone to its
/// end zone.
std::vector<Candidate> topology_prune(const std::vector<Candidate>& candidates,
                                      const Trajectory& query, const CameraGraph& graph,
                                      const PruneOptions& options = {});

enum class RankMode { kTime, kAppearance, kBlend };

RankMode parse_rank_mode(const std::string& text);
std::string to_string(RankMode mode);

struct RankOptions {
  RankMode mode = RankMode::kBlend;
  double alpha = 0.3;
  /// Normaliser for |d| in blend mode; typically the window's max offset.
  double time_scale = 1.0;
};

/// Stable sort by the mode's key, ties by trajectory ref. Recomputes the
/// appearance distance against `query`.
std::vector<Candidate> rank(std::vector<Candidate> candidates, const Trajectory& query,
                            const RankOptions& options = {});

}  // namespace mtmc
