#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mtmc/geometry.hpp"

namespace mtmc {

using CameraId = std::string;

struct Detection {
  CameraId camera_id;
  int frame = 0;
  BoundingBox box;
  double confidence = 0.0;
  Feature feature;
  std::int64_t detection_id = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct SamplingConfig {
  int interval = 1;                   ///< key-frame stride f
  double fps = 10.0;
  double confidence_threshold = 0.0;  ///< inclusive lower bound

  void validate() const;
};

struct CameraVideoMeta {
  CameraId camera_id;
  std::string clip_uri;
  int frame_count = 1;
  int width = 1;
  int height = 1;
  double fps = 10.0;

  void validate() const;

  friend bool operator==(const CameraVideoMeta&, const CameraVideoMeta&) = default;
};

CameraVideoMeta read_camera_meta(const std::filesystem::path& path);
void write_camera_meta(const std::filesystem::path& path, const CameraVideoMeta& meta);

/// Sidecar feature file belonging to a detections CSV: same stem, ".mtft".
std::filesystem::path feature_path_for(const std::filesystem::path& csv_path);

struct ParseOptions {
  /// Expected feature dimension D. When unset the feature file header decides.
  std::optional<std::uint32_t> feature_dim;
};

/// Parses a detections CSV and its sidecar feature file.
///
/// Rows are returned sorted by (frame, detection_id). A row whose id column
/// is -1 receives its 0-based data-row index as detection_id. Boxes are stored
/// as x,y,w,h on disk and clamped to the image in memory. Any malformed row
/// aborts the parse.
std::vector<Detection> parse_detections(const std::filesystem::path& csv_path,
                                        const CameraVideoMeta& meta,
                                        const ParseOptions& options = {});

/// Stream form of parse_detections; `features` may be null only if the CSV
/// has no data rows.
std::vector<Detection> parse_detections(std::istream& csv, std::istream* features,
                                        const CameraVideoMeta& meta,
                                        const ParseOptions& options = {});

/// Writes the CSV and the ".mtft" sidecar. All detections must share one
/// feature dimension. Widths are chosen so that x + w reproduces x2 exactly
/// whenever some double allows it (always for coordinates on a dyadic grid).
void write_detections(const std::filesystem::path& csv_path,
                      const std::vector<Detection>& detections);
void write_detections(std::ostream& csv, std::ostream& features,
                      const std::vector<Detection>& detections);

/// Keeps key frames (frame % interval == 0) with confidence >= threshold.
std::vector<Detection> sample_and_filter(const std::vector<Detection>& detections,
                                         const SamplingConfig& config);

}  // namespace mtmc
