#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mtmc/geometry.hpp"
#include "mtmc/ingest.hpp"

namespace mtmc {

/// Globally unique handle of a single-camera trajectory.
struct TrajectoryRef {
  CameraId camera_id;
  std::int64_t trajectory_id = 0;

  /// "camera:id"; the camera id itself may contain ':' only before the last one.
  std::string str() const;
  static TrajectoryRef parse(const std::string& text);

  friend auto operator<=>(const TrajectoryRef&, const TrajectoryRef&) = default;
  friend bool operator==(const TrajectoryRef&, const TrajectoryRef&) = default;
};

/// Ordered per-frame boxes of one vehicle under one camera.
struct Trajectory {
  std::int64_t trajectory_id = 0;
  CameraId camera_id;
  std::map<int, BoundingBox> boxes;  ///< frame -> box
  double st = 0.0;                   ///< seconds
  double et = 0.0;
  Feature feature;                   ///< mean of frame_features
  std::vector<Feature> frame_features;
  Vec2 orientation;
  int n_key_frames = 0;

  TrajectoryRef ref() const { return {camera_id, trajectory_id}; }
  int first_frame() const { return boxes.begin()->first; }
  int last_frame() const { return boxes.rbegin()->first; }
  const BoundingBox& first_box() const { return boxes.begin()->second; }
  const BoundingBox& last_box() const { return boxes.rbegin()->second; }
  /// Recomputes st/et from the box frame range.
  void update_times(double fps);
};

/// One JSON object per line:
/// {trajectory_id, camera_id, st, et, boxes:[[frame,x1,y1,x2,y2],...], feature, orientation}
/// plus "frame_features" when requested (read back when present).
void write_trajectories_jsonl(std::ostream& out, const std::vector<Trajectory>& trajectories,
                              bool with_frame_features = false);
void write_trajectories_jsonl(const std::filesystem::path& path,
                              const std::vector<Trajectory>& trajectories,
                              bool with_frame_features = false);
std::vector<Trajectory> read_trajectories_jsonl(std::istream& in);
std::vector<Trajectory> read_trajectories_jsonl(const std::filesystem::path& path);

}  // namespace mtmc
