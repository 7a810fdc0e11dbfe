#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "mtmc/error.hpp"
#include "mtmc/tracker.hpp"
#include "test_support.hpp"

namespace mtmc {
namespace {

Detection det(int frame, BoundingBox box, Feature f, std::int64_t id = 0) {
  Detection d;
  d.camera_id = "c001";
  d.frame = frame;
  d.box = box;
  d.confidence = 1.0;
  d.feature = std::move(f);
  d.detection_id = id;
  return d;
}

TEST(Interpolate, MatchesClosedFormBetweenKeyFrames) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  for (int f : {2, 3, 7}) {
    Trajectory t;
    t.camera_id = "c001";
    for (int k = 0; k < 4; ++k) t.boxes[k * f] = {u(rng), u(rng), 600 + u(rng), 600 + u(rng)};
    const auto dense = interpolate(t, f);
    ASSERT_EQ(dense.boxes.size(), std::size_t(3 * f + 1));
    for (const auto& [frame, box] : dense.boxes) {
      const int i = frame / f * f;
      if (frame == i) {
        EXPECT_EQ(box, t.boxes.at(i));
        continue;
      }
      const auto& a = t.boxes.at(i);
      const auto& b = t.boxes.at(i + f);
      const double s = double(frame - i) / f;
      EXPECT_NEAR(box.x1, a.x1 + s * (b.x1 - a.x1), 1e-9);
      EXPECT_NEAR(box.y2, a.y2 + s * (b.y2 - a.y2), 1e-9);
    }
  }
}

TEST(Interpolate, IdentityAtIntervalOne) {
  const auto t = testing::make_track("c001", 0, 5, 10, 10.0);
  EXPECT_EQ(interpolate(t, 1).boxes, t.boxes);
}

TEST(Interpolate, RejectsGapsAndOffGridFrames) {
  Trajectory t;
  t.boxes[0] = {0, 0, 1, 1};
  t.boxes[10] = {0, 0, 1, 1};
  EXPECT_THROW(interpolate(t, 5), ContractViolation);
  Trajectory u;
  u.boxes[0] = {0, 0, 1, 1};
  u.boxes[3] = {0, 0, 1, 1};
  EXPECT_THROW(interpolate(u, 5), ContractViolation);
}

TEST(Aggregate, MeanOfFrameFeatures) {
  const std::vector<Feature> fs{{1, 2}, {3, 4}, {5, 9}};
  EXPECT_EQ(aggregate_feature(fs), (Feature{3, 5}));
  EXPECT_THROW(aggregate_feature(std::vector<Feature>{}), InputError);
  EXPECT_THROW(aggregate_feature(std::vector<Feature>{{1}, {1, 2}}), DimensionError);
}

TEST(Orientation, UnitDisplacementDirection) {
  const auto t = testing::make_track("c001", 0, 0, 11, 10.0, 0.0, 3.0);
  const auto o = compute_orientation(t);
  EXPECT_NEAR(o.x, 1.0, 1e-12);
  EXPECT_NEAR(o.y, 0.0, 1e-12);
  const auto still = testing::make_track("c001", 0, 0, 11, 10.0, 0.0, 0.0);
  EXPECT_EQ(compute_orientation(still), (Vec2{0, 0}));
}

TEST(Associate, SeparatesTwoParallelVehicles) {
  std::vector<KeyFrame> frames;
  for (int f = 0; f < 20; ++f) {
    KeyFrame kf{f, {}};
    const double x = 10.0 * f;
    kf.detections.push_back(det(f, {x, 100, x + 50, 140}, {1, 0}, 2 * f));
    kf.detections.push_back(det(f, {x, 500, x + 50, 540}, {0, 1}, 2 * f + 1));
    frames.push_back(kf);
  }
  const auto tracks = associate(frames, {}, 10.0);
  ASSERT_EQ(tracks.size(), 2u);
  EXPECT_EQ(tracks[0].trajectory_id, 0);
  EXPECT_EQ(tracks[1].trajectory_id, 1);
  for (const auto& t : tracks) {
    EXPECT_EQ(t.boxes.size(), 20u);
    const double y = t.first_box().y1;
    for (const auto& [frame, b] : t.boxes) EXPECT_EQ(b.y1, y);
  }
}

TEST(Associate, AppearanceGateSplitsIdentitySwap) {
  // Same place, feature flips half way: the cosine gate must start a new track.
  std::vector<KeyFrame> frames;
  for (int f = 0; f < 10; ++f) {
    const Feature feat = f < 5 ? Feature{1, 0} : Feature{0, 1};
    frames.push_back({f, {det(f, {100, 100, 150, 140}, feat, f)}});
  }
  const auto tracks = associate(frames, {}, 10.0);
  ASSERT_EQ(tracks.size(), 2u);
  EXPECT_EQ(tracks[0].last_frame(), 4);
  EXPECT_EQ(tracks[1].first_frame(), 5);
}

TEST(Associate, FillsMissedKeyFramesAndClosesAfterMaxAge) {
  AssociationConfig cfg;
  cfg.max_age = 2;
  std::vector<KeyFrame> frames;
  for (int f = 0; f < 12; ++f) {
    KeyFrame kf{f, {}};
    const double x = 5.0 * f;
    if (f != 3 && f != 4 && (f < 7 || f > 9)) {
      kf.detections.push_back(det(f, {x, 100, x + 60, 140}, {1, 0}, f));
    }
    frames.push_back(kf);
  }
  // Frames 3-4 missing (2 misses, within max_age) are bridged; 7-9 (3 misses) end the track.
  const auto tracks = associate(frames, cfg, 10.0);
  ASSERT_EQ(tracks.size(), 2u);
  EXPECT_EQ(tracks[0].first_frame(), 0);
  EXPECT_EQ(tracks[0].last_frame(), 6);
  EXPECT_EQ(tracks[0].boxes.size(), 7u);
  EXPECT_NEAR(tracks[0].boxes.at(3).x1, 15.0, 1e-9);
  EXPECT_EQ(tracks[1].first_frame(), 10);
}

TEST(Associate, MixedCamerasRejected) {
  auto a = det(0, {0, 0, 10, 10}, {1});
  auto b = det(0, {0, 0, 10, 10}, {1});
  b.camera_id = "c002";
  EXPECT_THROW(associate({{0, {a, b}}}, {}, 10.0), InputError);
}

TEST(GroupKeyFrames, IncludesEmptyKeyFrames) {
  const auto frames = group_key_frames({det(5, {0, 0, 1, 1}, {1})}, 5, 21);
  ASSERT_EQ(frames.size(), 5u);
  EXPECT_EQ(frames[1].frame, 5);
  EXPECT_EQ(frames[1].detections.size(), 1u);
  EXPECT_TRUE(frames[4].detections.empty());
}

TEST(Filter, DropsShortAndParkedTracks) {
  const AssociationConfig cfg;
  const auto moving = testing::make_track("c001", 0, 0, 30, 10.0, 0.0, 10.0);
  const auto short_one = testing::make_track("c001", 1, 0, 5, 10.0, 0.0, 10.0);
  const auto parked = testing::make_track("c001", 2, 0, 30, 10.0, 0.0, 0.1);
  const auto kept = filter_trajectories({moving, short_one, parked}, cfg, 10.0);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].trajectory_id, 0);
}

TEST(TrajectoryJsonl, RoundTrip) {
  auto t = testing::make_track("cam:a", 7, 3, 4, 10.0);
  t.feature = {0.1, 0.2};
  t.frame_features = {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}, {0.7, 0.8}};
  t.orientation = {0.6, 0.8};
  std::stringstream ss;
  write_trajectories_jsonl(ss, {t}, true);
  const auto back = read_trajectories_jsonl(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].ref(), t.ref());
  EXPECT_EQ(back[0].boxes, t.boxes);
  EXPECT_EQ(back[0].feature, t.feature);
  EXPECT_EQ(back[0].frame_features, t.frame_features);
  EXPECT_EQ(back[0].st, t.st);
  EXPECT_EQ(TrajectoryRef::parse("cam:a:7"), (TrajectoryRef{"cam:a", 7}));
}

}  // namespace
}  // namespace mtmc
