#pragma once

#include <span>
#include <vector>

#include "mtmc/ingest.hpp"
#include "mtmc/trajectory.hpp"

namespace mtmc {

struct AssociationConfig {
  double lambda = 0.5;    ///< weight of the motion (1 - IoU) term
  double gate_iou = 0.1;  ///< pairs below this IoU are forbidden
  double gate_cos = 0.4;  ///< pairs above this cosine distance are forbidden
  int max_age = 3;        ///< key frames a track may stay unmatched
  double min_duration_s = 1.0;
  double static_iou_threshold = 0.05;
  /// L2-normalize each frame feature before averaging.
  bool normalize_features = false;

  void validate() const;
};

/// Detections observed at one key frame. Empty key frames must still be
/// present so that gaps can be measured.
struct KeyFrame {
  int frame = 0;
  std::vector<Detection> detections;
};

/// Groups sampled detections into every key frame 0, f, 2f, ... < frame_count.
std::vector<KeyFrame> group_key_frames(const std::vector<Detection>& sampled, int interval,
                                       int frame_count);

/// Frame-to-frame tracking-by-detection over key frames.
///
/// Each key frame is matched against the live tracks with a maximum-cardinality,
/// minimum-cost assignment over allowed pairs, cost
/// lambda*(1-IoU) + (1-lambda)*cos_dist. A track whose match skips key frames
/// gets the skipped key frames filled by linear interpolation, so every
/// returned trajectory has boxes on consecutive key frames. Tracks unmatched
/// for more than max_age key frames are closed. Trajectory ids follow birth
/// order starting at 0.
std::vector<Trajectory> associate(const std::vector<KeyFrame>& frames,
                                  const AssociationConfig& config, double fps);

/// Dense trajectory by linear interpolation between consecutive
/// key frames spaced `interval` apart. Throws ContractViolation on gaps.
Trajectory interpolate(const Trajectory& trajectory, int interval);

/// Coordinate-wise arithmetic mean.
Feature aggregate_feature(std::span<const Feature> frame_features);

/// Drops short tracks and tracks whose first and last boxes overlap more than
/// static_iou_threshold.
std::vector<Trajectory> filter_trajectories(const std::vector<Trajectory>& trajectories,
                                            const AssociationConfig& config, double fps);

/// Unit direction of the box-centre displacement from first to last frame;
/// zero when the displacement is below 1e-6 px.
Vec2 compute_orientation(const Trajectory& trajectory);

/// Recomputes `feature` and `orientation` of each trajectory.
void finalize_features(std::vector<Trajectory>& trajectories, bool normalize = false);

/// associate -> interpolate -> filter -> finalize_features.
std::vector<Trajectory> track_camera(const std::vector<Detection>& sampled,
                                     const SamplingConfig& sampling,
                                     const AssociationConfig& config, int frame_count);

}  // namespace mtmc
