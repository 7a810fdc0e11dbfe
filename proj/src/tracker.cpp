#include "mtmc/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "mtmc/assignment.hpp"
#include "mtmc/error.hpp"

namespace mtmc {

void AssociationConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(lambda) || !unit(gate_iou) || !unit(gate_cos) || !unit(static_iou_threshold)) {
    throw ConfigError("association weights and gates must lie in [0,1]");
  }
  if (max_age < 1) throw ConfigError("max_age must be >= 1");
  if (!(min_duration_s > 0.0)) throw ConfigError("min_duration_s must be > 0");
}

std::vector<KeyFrame> group_key_frames(const std::vector<Detection>& sampled, int interval,
                                       int frame_count) {
  if (interval < 1) throw ConfigError("interval must be >= 1");
  std::vector<KeyFrame> frames;
  for (int f = 0; f < frame_count; f += interval) frames.push_back({f, {}});
  for (const auto& d : sampled) {
    if (d.frame % interval != 0 || d.frame < 0 || d.frame >= frame_count) {
      throw InputError("detection at frame " + std::to_string(d.frame) +
                       " is not a key frame of stride " + std::to_string(interval));
    }
    frames[d.frame / interval].detections.push_back(d);
  }
  return frames;
}

namespace {

struct LiveTrack {
  Trajectory traj;
  std::size_t last_index = 0;  // position in the key-frame sequence
  std::optional<std::size_t> prev_index;
  BoundingBox prev_box;
  Feature last_feature;
  int missed = 0;

  const BoundingBox& last_box() const { return traj.boxes.rbegin()->second; }

  // Constant-velocity guess at key-frame position k; the last box until two
  // observations exist.
  BoundingBox predict(std::size_t k) const {
    const BoundingBox& last = last_box();
    if (!prev_index) return last;
    const double steps = static_cast<double>(last_index - *prev_index);
    const double ahead = static_cast<double>(k - last_index);
    const double s = ahead / steps;
    return {last.x1 + s * (last.x1 - prev_box.x1), last.y1 + s * (last.y1 - prev_box.y1),
            last.x2 + s * (last.x2 - prev_box.x2), last.y2 + s * (last.y2 - prev_box.y2)};
  }
};

double pair_cost(const BoundingBox& predicted, const Feature& track_feature,
                 const Detection& det, const AssociationConfig& config) {
  const double overlap = iou(predicted, det.box);
  const double cos_dist = cosine_distance(track_feature, det.feature);
  if (overlap < config.gate_iou || cos_dist > config.gate_cos) return kForbidden;
  return config.lambda * (1.0 - overlap) + (1.0 - config.lambda) * cos_dist;
}

Trajectory close_track(LiveTrack&& track, double fps) {
  Trajectory t = std::move(track.traj);
  t.n_key_frames = static_cast<int>(t.frame_features.size());
  t.feature = aggregate_feature(t.frame_features);
  t.orientation = compute_orientation(t);
  t.update_times(fps);
  return t;
}

}  // namespace

std::vector<Trajectory> associate(const std::vector<KeyFrame>& frames,
                                  const AssociationConfig& config, double fps) {
  config.validate();
  if (!(fps > 0.0)) throw ConfigError("fps must be > 0");

  std::optional<CameraId> camera;
  std::vector<LiveTrack> live;
  std::vector<Trajectory> done;
  std::int64_t next_id = 0;

  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& kf = frames[k];
    if (k > 0 && kf.frame <= frames[k - 1].frame) {
      throw InputError("key frames must be strictly increasing");
    }
    for (const auto& d : kf.detections) {
      if (!camera) camera = d.camera_id;
      if (d.camera_id != *camera) {
        throw InputError("mixed cameras in one association run: " + *camera + " and " +
                         d.camera_id);
      }
    }

    CostMatrix cost(live.size(), std::vector<double>(kf.detections.size(), kForbidden));
    for (std::size_t t = 0; t < live.size(); ++t) {
      const BoundingBox predicted = live[t].predict(k);
      for (std::size_t d = 0; d < kf.detections.size(); ++d) {
        cost[t][d] = pair_cost(predicted, live[t].last_feature, kf.detections[d], config);
      }
    }
    const auto match = kf.detections.empty() ? std::vector<int>(live.size(), -1)
                                             : solve_assignment(cost);

    std::vector<char> det_used(kf.detections.size(), 0);
    std::vector<LiveTrack> still_live;
    for (std::size_t t = 0; t < live.size(); ++t) {
      auto& track = live[t];
      if (match[t] >= 0) {
        const Detection& det = kf.detections[match[t]];
        det_used[match[t]] = 1;
        // Fill skipped key frames so the trajectory has no key-frame gaps.
        const BoundingBox from = track.last_box();
        const std::size_t span = k - track.last_index;
        for (std::size_t g = track.last_index + 1; g < k; ++g) {
          const double s = static_cast<double>(g - track.last_index) / static_cast<double>(span);
          track.traj.boxes[frames[g].frame] = lerp(from, det.box, s);
        }
        track.prev_box = from;
        track.prev_index = track.last_index;
        track.traj.boxes[kf.frame] = det.box;
        track.traj.frame_features.push_back(det.feature);
        track.last_feature = det.feature;
        track.last_index = k;
        track.missed = 0;
        still_live.push_back(std::move(track));
      } else if (++track.missed > config.max_age) {
        done.push_back(close_track(std::move(track), fps));
      } else {
        still_live.push_back(std::move(track));
      }
    }
    for (std::size_t d = 0; d < kf.detections.size(); ++d) {
      if (det_used[d]) continue;
      const Detection& det = kf.detections[d];
      LiveTrack track;
      track.traj.trajectory_id = next_id++;
      track.traj.camera_id = det.camera_id;
      track.traj.boxes[kf.frame] = det.box;
      track.traj.frame_features.push_back(det.feature);
      track.last_feature = det.feature;
      track.last_index = k;
      still_live.push_back(std::move(track));
    }
    live = std::move(still_live);
  }
  for (auto& track : live) done.push_back(close_track(std::move(track), fps));

  std::sort(done.begin(), done.end(), [](const Trajectory& a, const Trajectory& b) {
    return a.trajectory_id < b.trajectory_id;
  });
  return done;
}

Trajectory interpolate(const Trajectory& trajectory, int interval) {
  if (interval < 1) throw ConfigError("interval must be >= 1");
  if (trajectory.boxes.empty()) throw InputError("cannot interpolate an empty trajectory");
  Trajectory out = trajectory;
  if (interval == 1) {
    for (auto it = std::next(trajectory.boxes.begin()); it != trajectory.boxes.end(); ++it) {
      if (it->first != std::prev(it)->first + 1) {
        throw ContractViolation("trajectory " + trajectory.ref().str() + " has a gap after frame " +
                                std::to_string(std::prev(it)->first));
      }
    }
    return out;
  }
  for (auto it = trajectory.boxes.begin(); it != trajectory.boxes.end(); ++it) {
    if (it->first % interval != 0) {
      throw ContractViolation("frame " + std::to_string(it->first) + " is not a key frame of stride " +
                              std::to_string(interval));
    }
    const auto next = std::next(it);
    if (next == trajectory.boxes.end()) break;
    const int i = it->first;
    if (next->first != i + interval) {
      throw ContractViolation("trajectory " + trajectory.ref().str() +
                              " misses the key frame after " + std::to_string(i));
    }
    const BoundingBox& a = it->second;
    const BoundingBox& b = next->second;
    for (int j = i + 1; j < i + interval; ++j) {
      const double t = static_cast<double>(j - i) / static_cast<double>(interval);
      out.boxes[j] = lerp(a, b, t);
    }
  }
  return out;
}

Feature aggregate_feature(std::span<const Feature> frame_features) {
  if (frame_features.empty()) throw InputError("cannot average zero feature vectors");
  const std::size_t dim = frame_features.front().size();
  Feature sum(dim, 0.0);
  for (std::size_t i = 0; i < frame_features.size(); ++i) {
    if (frame_features[i].size() != dim) {
      throw DimensionError("feature " + std::to_string(i) + " has dimension " +
                           std::to_string(frame_features[i].size()) + ", expected " +
                           std::to_string(dim));
    }
    for (std::size_t c = 0; c < dim; ++c) sum[c] += frame_features[i][c];
  }
  const double n = static_cast<double>(frame_features.size());
  for (auto& v : sum) v /= n;
  return sum;
}

std::vector<Trajectory> filter_trajectories(const std::vector<Trajectory>& trajectories,
                                            const AssociationConfig& config, double fps) {
  std::vector<Trajectory> out;
  for (const auto& t : trajectories) {
    if (t.boxes.empty()) continue;
    const double duration = (t.last_frame() - t.first_frame()) / fps;
    if (duration < config.min_duration_s) continue;
    if (iou(t.first_box(), t.last_box()) > config.static_iou_threshold) continue;
    out.push_back(t);
  }
  return out;
}

Vec2 compute_orientation(const Trajectory& trajectory) {
  if (trajectory.boxes.empty()) return {};
  const Vec2 a = center(trajectory.first_box());
  const Vec2 b = center(trajectory.last_box());
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double n = std::hypot(dx, dy);
  if (n < 1e-6) return {};
  return {dx / n, dy / n};
}

void finalize_features(std::vector<Trajectory>& trajectories, bool normalize) {
  for (auto& t : trajectories) {
    if (normalize) {
      std::vector<Feature> unit;
      unit.reserve(t.frame_features.size());
      for (const auto& f : t.frame_features) unit.push_back(l2_normalized(f));
      t.feature = aggregate_feature(unit);
    } else {
      t.feature = aggregate_feature(t.frame_features);
    }
    t.n_key_frames = static_cast<int>(t.frame_features.size());
    t.orientation = compute_orientation(t);
  }
}

std::vector<Trajectory> track_camera(const std::vector<Detection>& sampled,
                                     const SamplingConfig& sampling,
                                     const AssociationConfig& config, int frame_count) {
  sampling.validate();
  const auto frames = group_key_frames(sampled, sampling.interval, frame_count);
  auto tracks = associate(frames, config, sampling.fps);
  std::vector<Trajectory> dense;
  dense.reserve(tracks.size());
  for (const auto& t : tracks) dense.push_back(interpolate(t, sampling.interval));
  auto kept = filter_trajectories(dense, config, sampling.fps);
  finalize_features(kept, config.normalize_features);
  return kept;
}

}  // namespace mtmc
