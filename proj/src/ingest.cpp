#include "mtmc/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "io_util.hpp"
#include "mtmc/error.hpp"

namespace mtmc {

namespace {

constexpr std::string_view kHeader = "frame,id,x,y,w,h,conf";
constexpr char kMagic[4] = {'M', 'T', 'F', 'T'};

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

// Picks w so that a + w == b in floating point.
double exact_extent(double a, double b) {
  double w = b - a;
  if (a + w == b) return w;
  double up = w;
  double down = w;
  for (int i = 0; i < 8; ++i) {
    up = std::nextafter(up, INFINITY);
    if (a + up == b) return up;
    down = std::nextafter(down, -INFINITY);
    if (a + down == b) return down;
  }
  return w;
}

struct FeatureTable {
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;
};

FeatureTable read_feature_table(std::istream& in, std::size_t expected_rows,
                                const ParseOptions& options) {
  std::string data(std::istreambuf_iterator<char>(in), {});
  if (data.size() < 12 || !std::equal(kMagic, kMagic + 4, data.begin())) {
    throw FormatError("feature file: missing MTFT header");
  }
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  FeatureTable table;
  table.rows = detail::get_u32(p + 4);
  table.dim = detail::get_u32(p + 8);
  if (options.feature_dim && *options.feature_dim != table.dim) {
    throw DimensionError("feature row 0: dimension " + std::to_string(table.dim) +
                         ", expected " + std::to_string(*options.feature_dim));
  }
  if (table.rows != expected_rows) {
    throw FormatError("feature file has " + std::to_string(table.rows) + " rows, detections file " +
                      std::to_string(expected_rows));
  }
  const std::size_t payload = data.size() - 12;
  const std::size_t row_bytes = static_cast<std::size_t>(table.dim) * 4;
  const std::size_t needed = row_bytes * table.rows;
  if (payload != needed) {
    const std::size_t complete = row_bytes == 0 ? 0 : payload / row_bytes;
    throw DimensionError("feature row " + std::to_string(complete) + ": expected " +
                         std::to_string(table.dim) + " values, file holds " +
                         std::to_string(payload) + " payload bytes for " +
                         std::to_string(table.rows) + " rows");
  }
  table.values.resize(static_cast<std::size_t>(table.rows) * table.dim);
  for (std::size_t i = 0; i < table.values.size(); ++i) {
    table.values[i] = detail::get_f32(p + 12 + 4 * i);
  }
  return table;
}

}  // namespace

void SamplingConfig::validate() const {
  if (interval < 1) throw ConfigError("sampling interval must be >= 1");
  if (!(fps > 0.0)) throw ConfigError("fps must be > 0");
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw ConfigError("confidence threshold must lie in [0,1]");
  }
}

void CameraVideoMeta::validate() const {
  if (camera_id.empty()) throw ConfigError("camera meta: empty camera_id");
  if (frame_count < 1) throw ConfigError("camera meta " + camera_id + ": frame_count < 1");
  if (width < 1 || height < 1) throw ConfigError("camera meta " + camera_id + ": bad image size");
  if (!(fps > 0.0)) throw ConfigError("camera meta " + camera_id + ": fps must be > 0");
}

CameraVideoMeta read_camera_meta(const std::filesystem::path& path) {
  CameraVideoMeta meta;
  try {
    const auto j = nlohmann::json::parse(detail::read_file(path));
    meta.camera_id = j.at("camera_id").get<std::string>();
    meta.clip_uri = j.at("clip_uri").get<std::string>();
    meta.frame_count = j.at("frame_count").get<int>();
    meta.width = j.at("width").get<int>();
    meta.height = j.at("height").get<int>();
    meta.fps = j.at("fps").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  meta.validate();
  return meta;
}

void write_camera_meta(const std::filesystem::path& path, const CameraVideoMeta& meta) {
  nlohmann::json j = {{"camera_id", meta.camera_id}, {"clip_uri", meta.clip_uri},
                      {"frame_count", meta.frame_count}, {"width", meta.width},
                      {"height", meta.height}, {"fps", meta.fps}};
  detail::write_file(path, j.dump(2) + "\n");
}

std::filesystem::path feature_path_for(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".mtft");
  return p;
}

std::vector<Detection> parse_detections(std::istream& csv, std::istream* features,
                                        const CameraVideoMeta& meta,
                                        const ParseOptions& options) {
  std::string line;
  if (!std::getline(csv, line) || strip(line) != kHeader) {
    throw FormatError("detections file: expected header '" + std::string(kHeader) + "'");
  }

  std::vector<Detection> out;
  std::set<std::int64_t> seen_ids;
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    const auto fields = split(strip(line), ',');
    const std::string where = "detections line " + std::to_string(line_no);
    if (fields.size() != 7) {
      throw FormatError(where + ": expected 7 fields, got " + std::to_string(fields.size()));
    }
    Detection d;
    std::int64_t id = 0;
    double x = 0, y = 0, w = 0, h = 0;
    if (!detail::parse_number(fields[0], d.frame) || !detail::parse_number(fields[1], id) ||
        !detail::parse_number(fields[2], x) || !detail::parse_number(fields[3], y) ||
        !detail::parse_number(fields[4], w) || !detail::parse_number(fields[5], h) ||
        !detail::parse_number(fields[6], d.confidence)) {
      throw FormatError(where + ": unparsable field");
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) || !std::isfinite(h) ||
        w < 0 || h < 0) {
      throw FormatError(where + ": invalid box");
    }
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      throw FormatError(where + ": confidence outside [0,1]");
    }
    if (d.frame < 0 || d.frame >= meta.frame_count) {
      throw RangeError(where + ": frame " + std::to_string(d.frame) + " outside [0," +
                       std::to_string(meta.frame_count) + ")");
    }
    d.detection_id = id >= 0 ? id : static_cast<std::int64_t>(out.size());
    if (!seen_ids.insert(d.detection_id).second) {
      throw FormatError(where + ": duplicate detection id " + std::to_string(d.detection_id));
    }
    d.camera_id = meta.camera_id;
    d.box = clamp_to_image({x, y, x + w, y + h}, meta.width, meta.height);
    out.push_back(std::move(d));
  }

  if (!out.empty() || features != nullptr) {
    if (features == nullptr) throw FormatError("detections present but no feature file");
    const auto table = read_feature_table(*features, out.size(), options);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const float* row = table.values.data() + k * table.dim;
      out[k].feature.assign(row, row + table.dim);
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    return std::tie(a.frame, a.detection_id) < std::tie(b.frame, b.detection_id);
  });
  return out;
}

std::vector<Detection> parse_detections(const std::filesystem::path& csv_path,
                                        const CameraVideoMeta& meta,
                                        const ParseOptions& options) {
  std::ifstream csv(csv_path);
  if (!csv) throw FormatError("cannot open " + csv_path.string());
  const auto fpath = feature_path_for(csv_path);
  if (!std::filesystem::exists(fpath)) {
    return parse_detections(csv, nullptr, meta, options);
  }
  std::ifstream feat(fpath, std::ios::binary);
  return parse_detections(csv, &feat, meta, options);
}

void write_detections(std::ostream& csv, std::ostream& features,
                      const std::vector<Detection>& detections) {
  const std::uint32_t dim =
      detections.empty() ? 0 : static_cast<std::uint32_t>(detections.front().feature.size());
  csv << kHeader << '\n';
  std::string bin(kMagic, 4);
  detail::put_u32(bin, static_cast<std::uint32_t>(detections.size()));
  detail::put_u32(bin, dim);
  for (const auto& d : detections) {
    if (d.feature.size() != dim) {
      throw DimensionError("detection " + std::to_string(d.detection_id) + ": feature dimension " +
                           std::to_string(d.feature.size()) + ", expected " +
                           std::to_string(dim));
    }
    csv << d.frame << ',' << d.detection_id << ',' << detail::format_double(d.box.x1) << ','
        << detail::format_double(d.box.y1) << ','
        << detail::format_double(exact_extent(d.box.x1, d.box.x2)) << ','
        << detail::format_double(exact_extent(d.box.y1, d.box.y2)) << ','
        << detail::format_double(d.confidence) << '\n';
    for (double v : d.feature) detail::put_f32(bin, static_cast<float>(v));
  }
  features.write(bin.data(), static_cast<std::streamsize>(bin.size()));
}

void write_detections(const std::filesystem::path& csv_path,
                      const std::vector<Detection>& detections) {
  std::ofstream csv(csv_path, std::ios::trunc);
  std::ofstream feat(feature_path_for(csv_path), std::ios::binary | std::ios::trunc);
  if (!csv || !feat) throw Error("cannot write detections to " + csv_path.string());
  write_detections(csv, feat, detections);
}

std::vector<Detection> sample_and_filter(const std::vector<Detection>& detections,
                                         const SamplingConfig& config) {
  config.validate();
  std::vector<Detection> out;
  for (const auto& d : detections) {
    if (d.frame % config.interval == 0 && d.confidence >= config.confidence_threshold) {
      out.push_back(d);
    }
  }
  return out;
}

}  // namespace mtmc
