#include "mtmc/trajectory.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "io_util.hpp"
#include "mtmc/error.hpp"

namespace mtmc {

std::string TrajectoryRef::str() const {
  return camera_id + ":" + std::to_string(trajectory_id);
}

TrajectoryRef TrajectoryRef::parse(const std::string& text) {
  const auto pos = text.rfind(':');
  if (pos == std::string::npos || pos == 0) {
    throw InputError("trajectory reference '" + text + "' is not camera:id");
  }
  TrajectoryRef ref;
  ref.camera_id = text.substr(0, pos);
  if (!detail::parse_number(std::string_view(text).substr(pos + 1), ref.trajectory_id)) {
    throw InputError("trajectory reference '" + text + "' has a non-integer id");
  }
  return ref;
}

void Trajectory::update_times(double fps) {
  if (boxes.empty()) {
    st = et = 0.0;
    return;
  }
  st = first_frame() / fps;
  et = last_frame() / fps;
}

namespace {

nlohmann::json to_json(const Trajectory& t, bool with_frame_features) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& [frame, b] : t.boxes) boxes.push_back({frame, b.x1, b.y1, b.x2, b.y2});
  nlohmann::json j = {{"trajectory_id", t.trajectory_id},
          {"camera_id", t.camera_id},
          {"st", t.st},
          {"et", t.et},
          {"boxes", std::move(boxes)},
          {"feature", t.feature},
          {"orientation", {t.orientation.x, t.orientation.y}},
          {"n_key_frames", t.n_key_frames}};
  if (with_frame_features) j["frame_features"] = t.frame_features;
  return j;
}

Trajectory from_json(const nlohmann::json& j) {
  Trajectory t;
  t.trajectory_id = j.at("trajectory_id").get<std::int64_t>();
  t.camera_id = j.at("camera_id").get<std::string>();
  t.st = j.at("st").get<double>();
  t.et = j.at("et").get<double>();
  for (const auto& row : j.at("boxes")) {
    if (row.size() != 5) throw FormatError("trajectory box row must have 5 entries");
    t.boxes[row[0].get<int>()] = {row[1].get<double>(), row[2].get<double>(),
                                  row[3].get<double>(), row[4].get<double>()};
  }
  t.feature = j.at("feature").get<Feature>();
  const auto& o = j.at("orientation");
  t.orientation = {o.at(0).get<double>(), o.at(1).get<double>()};
  t.n_key_frames = j.value("n_key_frames", static_cast<int>(t.boxes.size()));
  if (j.contains("frame_features")) t.frame_features = j.at("frame_features").get<std::vector<Feature>>();
  return t;
}

}  // namespace

void write_trajectories_jsonl(std::ostream& out, const std::vector<Trajectory>& trajectories,
                              bool with_frame_features) {
  for (const auto& t : trajectories) out << to_json(t, with_frame_features).dump() << '\n';
}

void write_trajectories_jsonl(const std::filesystem::path& path,
                              const std::vector<Trajectory>& trajectories,
                              bool with_frame_features) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  write_trajectories_jsonl(out, trajectories, with_frame_features);
}

std::vector<Trajectory> read_trajectories_jsonl(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("trajectory line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Trajectory> read_trajectories_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_trajectories_jsonl(in);
}

}  // namespace mtmc
