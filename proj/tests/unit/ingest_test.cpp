#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "mtmc/error.hpp"
#include "mtmc/ingest.hpp"
#include "test_support.hpp"

namespace mtmc {
namespace {

CameraVideoMeta meta(int frames = 100) { return {"c001", "clips/c001.mp4", frames, 1280, 960, 10.0}; }

std::string feature_blob(std::uint32_t rows, std::uint32_t dim, std::size_t values) {
  std::string s("MTFT");
  auto put = [&s](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put(rows);
  put(dim);
  for (std::size_t i = 0; i < values; ++i) {
    const float f = 0.5f;
    char b[4];
    std::memcpy(b, &f, 4);
    s.append(b, 4);
  }
  return s;
}

std::vector<Detection> parse_text(const std::string& csv, const std::string& feat,
                                  const ParseOptions& opts = {}) {
  std::istringstream c(csv), f(feat);
  return parse_detections(c, &f, meta(), opts);
}

TEST(Ingest, RoundTripPreservesDetections) {
  testing::TempDir dir;
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> pos(0.0, 1000.0), size(1.0, 200.0), conf(0.0, 1.0);
  std::normal_distribution<float> feat(0.0f, 1.0f);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Detection> dets;
    const int n = 1 + trial * 3;
    for (int i = 0; i < n; ++i) {
      Detection d;
      d.camera_id = "c001";
      d.frame = i / 3;
      d.detection_id = i;
      const double x = pos(rng), y = pos(rng) * 0.7;
      d.box = {x, y, std::min(1280.0, x + size(rng)), std::min(960.0, y + size(rng))};
      d.confidence = conf(rng);
      for (int k = 0; k < 8; ++k) d.feature.push_back(feat(rng));
      dets.push_back(d);
    }
    const auto path = dir / ("t" + std::to_string(trial) + ".csv");
    write_detections(path, dets);
    EXPECT_EQ(parse_detections(path, meta()), dets) << "trial " << trial;
  }
}

TEST(Ingest, MissingSidecarWithoutRowsIsAllowed) {
  std::istringstream csv("frame,id,x,y,w,h,conf\n");
  EXPECT_TRUE(parse_detections(csv, nullptr, meta()).empty());
}

TEST(Ingest, WrongHeaderIsFormatError) {
  EXPECT_THROW(parse_text("frame,x,y\n", feature_blob(0, 4, 0)), FormatError);
}

TEST(Ingest, MalformedRowIsFormatError) {
  const std::string header = "frame,id,x,y,w,h,conf\n";
  EXPECT_THROW(parse_text(header + "1,2,3\n", feature_blob(1, 1, 1)), FormatError);
  EXPECT_THROW(parse_text(header + "1,2,a,4,5,6,0.5\n", feature_blob(1, 1, 1)), FormatError);
  EXPECT_THROW(parse_text(header + "1,2,3,4,-5,6,0.5\n", feature_blob(1, 1, 1)), FormatError);
  EXPECT_THROW(parse_text(header + "1,2,3,4,5,6,1.5\n", feature_blob(1, 1, 1)), FormatError);
}

TEST(Ingest, FrameBeyondClipIsRangeError) {
  EXPECT_THROW(parse_text("frame,id,x,y,w,h,conf\n100,1,0,0,5,5,0.5\n", feature_blob(1, 1, 1)),
               RangeError);
}

TEST(Ingest, FeatureDimensionMismatchNamesRow) {
  const std::string csv = "frame,id,x,y,w,h,conf\n0,1,0,0,5,5,0.5\n1,2,0,0,5,5,0.5\n";
  try {
    parse_text(csv, feature_blob(2, 4, 7));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
  ParseOptions opts;
  opts.feature_dim = 8;
  EXPECT_THROW(parse_text(csv, feature_blob(2, 4, 8), opts), DimensionError);
}

TEST(Ingest, FeatureRowCountMismatchIsFormatError) {
  EXPECT_THROW(parse_text("frame,id,x,y,w,h,conf\n0,1,0,0,5,5,0.5\n", feature_blob(2, 1, 2)),
               FormatError);
}

TEST(Ingest, UnassignedIdsUseRowIndexAndDuplicatesAreRejected) {
  const auto dets =
      parse_text("frame,id,x,y,w,h,conf\n3,-1,0,0,5,5,0.5\n1,-1,0,0,5,5,0.5\n", feature_blob(2, 1, 2));
  ASSERT_EQ(dets.size(), 2u);
  EXPECT_EQ(dets[0].frame, 1);
  EXPECT_EQ(dets[0].detection_id, 1);
  EXPECT_EQ(dets[1].detection_id, 0);
  EXPECT_THROW(
      parse_text("frame,id,x,y,w,h,conf\n0,4,0,0,5,5,0.5\n1,4,0,0,5,5,0.5\n", feature_blob(2, 1, 2)),
      FormatError);
}

TEST(Ingest, BoxesAreClampedToImage) {
  const auto dets =
      parse_text("frame,id,x,y,w,h,conf\n0,1,-10,900,100,100,0.5\n", feature_blob(1, 1, 1));
  EXPECT_EQ(dets[0].box, (BoundingBox{0, 900, 90, 960}));
}

TEST(Ingest, SamplingKeepsKeyFramesAboveThreshold) {
  std::vector<Detection> dets;
  for (int f = 0; f < 20; ++f) {
    Detection d;
    d.frame = f;
    d.detection_id = f;
    d.confidence = (f % 4 == 0) ? 0.3 : 0.9;
    dets.push_back(d);
  }
  const auto kept = sample_and_filter(dets, {5, 10.0, 0.5});
  std::vector<int> frames;
  for (const auto& d : kept) frames.push_back(d.frame);
  EXPECT_EQ(frames, (std::vector<int>{5, 10, 15}));
  // Threshold is inclusive.
  EXPECT_EQ(sample_and_filter(dets, {1, 10.0, 0.3}).size(), 20u);
  EXPECT_THROW(sample_and_filter(dets, {0, 10.0, 0.5}), ConfigError);
}

TEST(Ingest, CameraMetaRoundTrip) {
  testing::TempDir dir;
  write_camera_meta(dir / "m.json", meta(321));
  EXPECT_EQ(read_camera_meta(dir / "m.json"), meta(321));
  testing::spit(dir / "bad.json", R"({"camera_id":"x","frame_count":0})");
  EXPECT_THROW(read_camera_meta(dir / "bad.json"), Error);
}

}  // namespace
}  // namespace mtmc
