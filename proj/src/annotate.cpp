#include "mtmc/annotate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "io_util.hpp"
#include "mtmc/error.hpp"

namespace mtmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kRecordMagic[4] = {'M', 'T', 'T', 'R'};
constexpr std::uint32_t kRecordVersion = 1;

double as_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

json record_json(const AnnotationRecord& r) {
  json members = json::array();
  for (const auto& m : r.members) members.push_back(m.str());
  json history = json::array();
  for (const auto& h : r.history) {
    history.push_back({{"user", h.user}, {"action", h.action}, {"ts", h.timestamp_ms}});
  }
  return {{"global_id", r.global_id}, {"members", members}, {"version", r.version},
          {"history", history}};
}

AnnotationRecord record_from(const json& j) {
  AnnotationRecord r;
  r.global_id = j.at("global_id").get<GlobalId>();
  for (const auto& m : j.at("members")) r.members.insert(TrajectoryRef::parse(m.get<std::string>()));
  r.version = j.at("version").get<std::int64_t>();
  for (const auto& h : j.at("history")) {
    r.history.push_back({h.at("user").get<std::string>(), h.at("action").get<std::string>(),
                         h.at("ts").get<std::int64_t>()});
  }
  return r;
}

json trajectory_json(const TrajectoryRecord& t) {
  json boxes = json::array();
  for (const auto& b : t.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
  return {{"trajectory_id", t.ref.str()},
          {"camera_id", t.ref.camera_id},
          {"clip_uri", t.clip_uri},
          {"t_s", t.t_s},
          {"t_e", t.t_e},
          {"first_frame", t.first_frame},
          {"boxes", boxes},
          {"orientation", {t.orientation.x, t.orientation.y}},
          {"feature", t.feature}};
}

TrajectoryRecord trajectory_from(const json& j) {
  TrajectoryRecord t;
  t.ref = TrajectoryRef::parse(j.at("trajectory_id").get<std::string>());
  t.clip_uri = j.at("clip_uri").get<std::string>();
  t.t_s = j.at("t_s").get<double>();
  t.t_e = j.at("t_e").get<double>();
  t.first_frame = j.at("first_frame").get<int>();
  for (const auto& b : j.at("boxes")) {
    t.boxes.push_back({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                       b.at(3).get<double>()});
  }
  const auto& o = j.at("orientation");
  t.orientation = {o.at(0).get<double>(), o.at(1).get<double>()};
  t.feature = j.at("feature").get<Feature>();
  return t;
}

json meta_json(const CameraVideoMeta& m) {
  return {{"camera_id", m.camera_id}, {"clip_uri", m.clip_uri}, {"frame_count", m.frame_count},
          {"width", m.width},         {"height", m.height},     {"fps", m.fps}};
}

CameraVideoMeta meta_from(const json& j) {
  CameraVideoMeta m;
  m.camera_id = j.at("camera_id").get<std::string>();
  m.clip_uri = j.at("clip_uri").get<std::string>();
  m.frame_count = j.at("frame_count").get<int>();
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.fps = j.at("fps").get<double>();
  return m;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  const unsigned char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw FormatError("trajectory record truncated");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += n;
    return p;
  }
  std::uint32_t u32() { return detail::get_u32(take(4)); }
  std::int64_t i64() { return static_cast<std::int64_t>(detail::get_u64(take(8))); }
  double f64() { return detail::get_f64(take(8)); }
  double f32() { return detail::get_f32(take(4)); }
  std::string str() {
    const auto n = u32();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

TrajectoryRecord TrajectoryRecord::from_trajectory(const Trajectory& trajectory,
                                                   std::string clip_uri) {
  if (trajectory.boxes.empty()) throw InputError("trajectory has no boxes");
  TrajectoryRecord r;
  r.ref = trajectory.ref();
  r.clip_uri = std::move(clip_uri);
  r.t_s = trajectory.st;
  r.t_e = trajectory.et;
  r.first_frame = trajectory.first_frame();
  int expected = r.first_frame;
  for (const auto& [frame, b] : trajectory.boxes) {
    if (frame != expected) {
      throw ContractViolation("trajectory " + r.ref.str() + " is not dense at frame " +
                              std::to_string(expected));
    }
    ++expected;
    r.boxes.push_back({as_f32(b.x1), as_f32(b.y1), as_f32(b.x2), as_f32(b.y2)});
  }
  r.orientation = trajectory.orientation;
  r.feature.reserve(trajectory.feature.size());
  for (double v : trajectory.feature) r.feature.push_back(as_f32(v));
  return r;
}

Trajectory TrajectoryRecord::to_trajectory() const {
  Trajectory t;
  t.trajectory_id = ref.trajectory_id;
  t.camera_id = ref.camera_id;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    t.boxes.emplace(first_frame + static_cast<int>(k), boxes[k]);
  }
  t.st = t_s;
  t.et = t_e;
  t.feature = feature;
  t.orientation = orientation;
  return t;
}

std::string encode_record(const TrajectoryRecord& r) {
  std::string out(kRecordMagic, 4);
  detail::put_u32(out, kRecordVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(r.ref.camera_id.size()));
  out += r.ref.camera_id;
  detail::put_u64(out, static_cast<std::uint64_t>(r.ref.trajectory_id));
  detail::put_u32(out, static_cast<std::uint32_t>(r.clip_uri.size()));
  out += r.clip_uri;
  detail::put_f64(out, r.t_s);
  detail::put_f64(out, r.t_e);
  detail::put_u32(out, static_cast<std::uint32_t>(r.first_frame));
  detail::put_u32(out, static_cast<std::uint32_t>(r.boxes.size()));
  detail::put_f64(out, r.orientation.x);
  detail::put_f64(out, r.orientation.y);
  detail::put_u32(out, static_cast<std::uint32_t>(r.feature.size()));
  for (double v : r.feature) detail::put_f32(out, static_cast<float>(v));
  for (const auto& b : r.boxes) {
    detail::put_f32(out, static_cast<float>(b.x1));
    detail::put_f32(out, static_cast<float>(b.y1));
    detail::put_f32(out, static_cast<float>(b.x2));
    detail::put_f32(out, static_cast<float>(b.y2));
  }
  return out;
}

TrajectoryRecord decode_record(std::string_view bytes) {
  Reader in(bytes);
  const auto* magic = in.take(4);
  if (!std::equal(kRecordMagic, kRecordMagic + 4, magic)) {
    throw FormatError("trajectory record: bad magic");
  }
  if (in.u32() != kRecordVersion) throw FormatError("trajectory record: unknown version");
  TrajectoryRecord r;
  r.ref.camera_id = in.str();
  r.ref.trajectory_id = in.i64();
  r.clip_uri = in.str();
  r.t_s = in.f64();
  r.t_e = in.f64();
  r.first_frame = static_cast<int>(in.u32());
  const auto n_boxes = in.u32();
  r.orientation.x = in.f64();
  r.orientation.y = in.f64();
  const auto dim = in.u32();
  r.feature.resize(dim);
  for (auto& v : r.feature) v = in.f32();
  r.boxes.resize(n_boxes);
  for (auto& b : r.boxes) {
    b.x1 = in.f32();
    b.y1 = in.f32();
    b.x2 = in.f32();
    b.y2 = in.f32();
  }
  if (!in.done()) throw FormatError("trajectory record: trailing bytes");
  return r;
}

std::string annotation_record_to_json(const AnnotationRecord& record) {
  return record_json(record).dump();
}

std::string trajectory_record_to_json(const TrajectoryRecord& record) {
  return trajectory_json(record).dump();
}

TrajectoryRecord trajectory_record_from_json(const std::string& text) {
  try {
    return trajectory_from(json::parse(text));
  } catch (const json::exception& e) {
    throw FormatError(std::string("trajectory record: ") + e.what());
  }
}

std::string StoreEvent::to_json_line() const {
  return json{{"seq", seq}, {"op", op}, {"payload", json::parse(payload)}, {"user", user},
              {"ts", ts}}
      .dump();
}

StoreEvent StoreEvent::from_json_line(const std::string& line) {
  try {
    const auto j = json::parse(line);
    StoreEvent e;
    e.seq = j.at("seq").get<std::int64_t>();
    e.op = j.at("op").get<std::string>();
    e.payload = j.at("payload").dump();
    e.user = j.at("user").get<std::string>();
    e.ts = j.at("ts").get<std::int64_t>();
    return e;
  } catch (const json::exception& e) {
    throw FormatError(std::string("event log line: ") + e.what());
  }
}

std::size_t OverlayPayload::box_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.boxes.size();
  return n;
}

std::string overlay_to_json(const std::vector<OverlayPayload>& payloads) {
  json out = json::array();
  for (const auto& p : payloads) {
    json frames = json::array();
    for (const auto& f : p.frames) {
      json boxes = json::array();
      for (const auto& b : f.boxes) {
        boxes.push_back({{"trajectory_id", b.ref.str()},
                         {"global_id", b.global_id ? json(*b.global_id) : json(nullptr)},
                         {"box", {b.box.x1, b.box.y1, b.box.x2, b.box.y2}},
                         {"color", b.color}});
      }
      frames.push_back({{"frame", f.frame}, {"boxes", boxes}});
    }
    out.push_back(
        {{"camera_id", p.camera_id}, {"clip_uri", p.clip_uri}, {"fps", p.fps}, {"frames", frames}});
  }
  return json{{"payloads", out}}.dump();
}

std::string identity_color(GlobalId id) {
  std::uint32_t h = 2166136261u;
  for (char c : std::to_string(id)) {
    h ^= static_cast<unsigned char>(c);
    h *= 16777619u;
  }
  const double hue = static_cast<double>(h % 360u);
  const double s = 0.85;
  const double v = 0.95;
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(hue / 60.0, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue / 60.0)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(std::lround((r + m) * 255)),
                static_cast<int>(std::lround((g + m) * 255)),
                static_cast<int>(std::lround((b + m) * 255)));
  return buf;
}

AnnotationStore::AnnotationStore(StoreOptions options, Clock clock)
    : options_(options), clock_(std::move(clock)) {}

std::int64_t AnnotationStore::now() const {
  if (clock_) return clock_();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void AnnotationStore::log_event(const std::string& op, const std::string& payload,
                                const std::string& user, std::int64_t ts) {
  StoreEvent e{seq_offset_ + static_cast<std::int64_t>(events_.size()) + 1, op, payload, user, ts};
  if (sink_) {
    *sink_ << e.to_json_line() << '\n';
    sink_->flush();
  }
  events_.push_back(std::move(e));
}

void AnnotationStore::add_camera(const CameraVideoMeta& meta) {
  meta.validate();
  const auto it = cameras_.find(meta.camera_id);
  if (it != cameras_.end()) {
    if (it->second == meta) return;
    throw InputError("camera " + meta.camera_id + " already registered with different metadata");
  }
  cameras_.emplace(meta.camera_id, meta);
  log_event("camera", meta_json(meta).dump(), "system", now());
}

void AnnotationStore::add_trajectory(const TrajectoryRecord& record) {
  if (!cameras_.contains(record.ref.camera_id)) {
    throw InputError("trajectory " + record.ref.str() + " belongs to unregistered camera");
  }
  if (record.boxes.empty()) throw InputError("trajectory " + record.ref.str() + " has no boxes");
  if (record.t_s > record.t_e) throw InputError("trajectory " + record.ref.str() + ": t_s > t_e");
  const auto it = trajectories_.find(record.ref);
  if (it != trajectories_.end()) {
    if (it->second == record) return;
    throw InputError("trajectory " + record.ref.str() + " already registered with other content");
  }
  trajectories_.emplace(record.ref, record);
  log_event("trajectory", trajectory_json(record).dump(), "system", now());
}

const TrajectoryRecord& AnnotationStore::require_trajectory(const TrajectoryRef& ref) const {
  const auto it = trajectories_.find(ref);
  if (it == trajectories_.end()) throw NotFoundError("unknown trajectory " + ref.str());
  return it->second;
}

const TrajectoryRecord& AnnotationStore::trajectory(const TrajectoryRef& ref) const {
  return require_trajectory(ref);
}

const AnnotationRecord& AnnotationStore::record(GlobalId id) const {
  const auto it = records_.find(id);
  if (it == records_.end()) throw NotFoundError("unknown global id " + std::to_string(id));
  return it->second;
}

std::int64_t AnnotationStore::version_of(const TrajectoryRef& ref) const {
  const auto it = membership_.find(ref);
  return it == membership_.end() ? 0 : records_.at(it->second).version;
}

std::optional<GlobalId> AnnotationStore::global_id_of(const TrajectoryRef& ref) const {
  const auto it = membership_.find(ref);
  if (it == membership_.end()) return std::nullopt;
  return it->second;
}

void AnnotationStore::check_cameras_disjoint(const AnnotationRecord& a,
                                             const AnnotationRecord& b) const {
  if (options_.allow_multi_pass) return;
  for (const auto& x : a.members) {
    for (const auto& y : b.members) {
      if (x.camera_id == y.camera_id) {
        throw InputError("identity would hold two trajectories of camera " + x.camera_id + " (" +
                         x.str() + ", " + y.str() + ")");
      }
    }
  }
}

AnnotationRecord AnnotationStore::submit_match(const TrajectoryRef& query,
                                               const TrajectoryRef& candidate,
                                               const std::string& user,
                                               std::optional<std::int64_t> expected_version) {
  return match_at(query, candidate, user, expected_version, now());
}

AnnotationRecord AnnotationStore::match_at(const TrajectoryRef& query,
                                           const TrajectoryRef& candidate, const std::string& user,
                                           std::optional<std::int64_t> expected_version,
                                           std::int64_t ts) {
  require_trajectory(query);
  require_trajectory(candidate);
  if (query == candidate) throw InputError("cannot match trajectory " + query.str() + " to itself");
  const auto current = version_of(query);
  if (expected_version && *expected_version != current) {
    throw VersionConflict("stale version for " + query.str() + ": expected " +
                              std::to_string(*expected_version) + ", current " +
                              std::to_string(current),
                          current);
  }

  const auto gq = global_id_of(query);
  const auto gc = global_id_of(candidate);
  const HistoryEntry entry{user, "match " + query.str() + " " + candidate.str(), ts};
  GlobalId result_id = 0;

  if (!gq && !gc) {
    AnnotationRecord fresh;
    fresh.members = {query};
    AnnotationRecord other;
    other.members = {candidate};
    check_cameras_disjoint(fresh, other);
    fresh.global_id = next_global_id_++;
    fresh.members.insert(candidate);
    fresh.version = 1;
    fresh.history.push_back(entry);
    membership_[query] = membership_[candidate] = fresh.global_id;
    result_id = fresh.global_id;
    records_.emplace(fresh.global_id, std::move(fresh));
  } else if (gq && gc) {
    if (*gq == *gc) {
      throw InputError(query.str() + " and " + candidate.str() + " already share identity " +
                       std::to_string(*gq));
    }
    const GlobalId keep = std::min(*gq, *gc);
    const GlobalId drop = std::max(*gq, *gc);
    auto& kept = records_.at(keep);
    auto& dropped = records_.at(drop);
    check_cameras_disjoint(kept, dropped);
    kept.version = std::max(kept.version, dropped.version) + 1;
    for (const auto& m : dropped.members) {
      kept.members.insert(m);
      membership_[m] = keep;
    }
    kept.history.insert(kept.history.end(), dropped.history.begin(), dropped.history.end());
    kept.history.push_back(entry);
    records_.erase(drop);
    result_id = keep;
  } else {
    const GlobalId target = gq ? *gq : *gc;
    const TrajectoryRef& joining = gq ? candidate : query;
    auto& rec = records_.at(target);
    AnnotationRecord single;
    single.members = {joining};
    check_cameras_disjoint(rec, single);
    rec.members.insert(joining);
    rec.version += 1;
    rec.history.push_back(entry);
    membership_[joining] = target;
    result_id = target;
  }

  json payload = {{"query", query.str()}, {"candidate", candidate.str()}};
  payload["expected_version"] = expected_version ? json(*expected_version) : json(nullptr);
  log_event("match", payload.dump(), user, ts);
  return records_.at(result_id);
}

std::optional<AnnotationRecord> AnnotationStore::unmatch(const TrajectoryRef& trajectory,
                                                         const std::string& user,
                                                         std::int64_t expected_version) {
  return unmatch_at(trajectory, user, expected_version, now());
}

std::optional<AnnotationRecord> AnnotationStore::unmatch_at(const TrajectoryRef& trajectory,
                                                            const std::string& user,
                                                            std::int64_t expected_version,
                                                            std::int64_t ts) {
  require_trajectory(trajectory);
  const auto gid = global_id_of(trajectory);
  if (!gid) throw NotFoundError("trajectory " + trajectory.str() + " is not assigned");
  auto& rec = records_.at(*gid);
  if (rec.version != expected_version) {
    throw VersionConflict("stale version for " + trajectory.str() + ": expected " +
                              std::to_string(expected_version) + ", current " +
                              std::to_string(rec.version),
                          rec.version);
  }
  rec.members.erase(trajectory);
  membership_.erase(trajectory);
  rec.version += 1;
  rec.history.push_back({user, "unmatch " + trajectory.str(), ts});
  std::optional<AnnotationRecord> result;
  if (rec.members.empty()) {
    records_.erase(*gid);
  } else {
    result = rec;
  }
  log_event("unmatch",
            json{{"trajectory", trajectory.str()}, {"expected_version", expected_version}}.dump(),
            user, ts);
  return result;
}

void AnnotationStore::apply(const StoreEvent& event) {
  const auto p = json::parse(event.payload);
  const auto expected_seq = seq_offset_ + static_cast<std::int64_t>(events_.size()) + 1;
  if (event.seq != expected_seq) {
    throw FormatError("event seq " + std::to_string(event.seq) + " out of order, expected " +
                      std::to_string(expected_seq));
  }
  if (event.op == "camera") {
    const auto meta = meta_from(p);
    meta.validate();
    cameras_.emplace(meta.camera_id, meta);
    log_event(event.op, event.payload, event.user, event.ts);
  } else if (event.op == "trajectory") {
    auto rec = trajectory_from(p);
    trajectories_.emplace(rec.ref, std::move(rec));
    log_event(event.op, event.payload, event.user, event.ts);
  } else if (event.op == "match") {
    std::optional<std::int64_t> expected;
    if (!p.at("expected_version").is_null()) expected = p.at("expected_version").get<std::int64_t>();
    match_at(TrajectoryRef::parse(p.at("query").get<std::string>()),
             TrajectoryRef::parse(p.at("candidate").get<std::string>()), event.user, expected,
             event.ts);
  } else if (event.op == "unmatch") {
    unmatch_at(TrajectoryRef::parse(p.at("trajectory").get<std::string>()), event.user,
               p.at("expected_version").get<std::int64_t>(), event.ts);
  } else {
    throw FormatError("unknown event op '" + event.op + "'");
  }
}

std::set<std::set<TrajectoryRef>> AnnotationStore::partition() const {
  std::set<std::set<TrajectoryRef>> out;
  for (const auto& [id, rec] : records_) out.insert(rec.members);
  for (const auto& [ref, rec] : trajectories_) {
    if (!membership_.contains(ref)) out.insert({ref});
  }
  return out;
}

OverlayPayload AnnotationStore::overlay_for(const TrajectoryRecord& record, double from_s,
                                            double to_s) const {
  const auto& meta = cameras_.at(record.ref.camera_id);
  OverlayPayload payload;
  payload.camera_id = meta.camera_id;
  payload.clip_uri = record.clip_uri;
  payload.fps = meta.fps;
  const auto gid = global_id_of(record.ref);
  const std::string color = gid ? identity_color(*gid) : "#808080";
  // Small tolerance so that a bound given as frame/fps selects that frame.
  const double eps = 1e-9;
  const double lo = std::isinf(from_s) ? -1e18 : std::ceil(from_s * meta.fps - eps);
  const double hi = std::isinf(to_s) ? 1e18 : std::floor(to_s * meta.fps + eps);
  for (std::size_t k = 0; k < record.boxes.size(); ++k) {
    const int frame = record.first_frame + static_cast<int>(k);
    if (frame < lo || frame > hi || frame < 0 || frame >= meta.frame_count) continue;
    payload.frames.push_back({frame, {{record.ref, gid, record.boxes[k], color}}});
  }
  return payload;
}

void AnnotationStore::merge_overlay(OverlayPayload& into, const OverlayPayload& from) const {
  std::map<int, std::vector<OverlayBox>> frames;
  for (auto& f : into.frames) frames[f.frame] = std::move(f.boxes);
  for (const auto& f : from.frames) {
    auto& slot = frames[f.frame];
    slot.insert(slot.end(), f.boxes.begin(), f.boxes.end());
  }
  into.frames.clear();
  for (auto& [frame, boxes] : frames) into.frames.push_back({frame, std::move(boxes)});
}

std::vector<OverlayPayload> AnnotationStore::build_overlay(const TrajectoryRef& ref, double from_s,
                                                           double to_s) const {
  return {overlay_for(require_trajectory(ref), from_s, to_s)};
}

std::vector<OverlayPayload> AnnotationStore::build_overlay(GlobalId id, double from_s,
                                                           double to_s) const {
  const auto& rec = record(id);
  std::map<CameraId, OverlayPayload> per_camera;
  for (const auto& m : rec.members) {
    auto payload = overlay_for(require_trajectory(m), from_s, to_s);
    const auto it = per_camera.find(m.camera_id);
    if (it == per_camera.end()) {
      per_camera.emplace(m.camera_id, std::move(payload));
    } else {
      merge_overlay(it->second, payload);
    }
  }
  std::vector<OverlayPayload> out;
  for (auto& [cam, p] : per_camera) out.push_back(std::move(p));
  return out;
}

StorageReport AnnotationStore::measure_storage() const {
  StorageReport report;
  std::map<CameraId, std::set<int>> annotated_frames;
  for (const auto& [ref, rec] : trajectories_) {
    report.annotation_bytes += encode_record(rec).size();
    auto& frames = annotated_frames[ref.camera_id];
    for (int f = rec.first_frame; f <= rec.last_frame(); ++f) frames.insert(f);
  }
  for (const auto& [id, rec] : records_) {
    report.annotation_bytes += annotation_record_to_json(rec).size();
  }
  for (const auto& [cam, frames] : annotated_frames) {
    const auto& meta = cameras_.at(cam);
    const auto n = static_cast<std::uint64_t>(frames.size());
    report.naive_render_bytes += n * static_cast<std::uint64_t>(meta.width) *
                                 static_cast<std::uint64_t>(meta.height) * 3u;
    report.bitrate_render_bytes += static_cast<std::uint64_t>(
        std::llround(static_cast<double>(n) / meta.fps * kBaselineBitrateBps / 8.0));
  }
  if (report.naive_render_bytes > 0) {
    report.ratio = static_cast<double>(report.annotation_bytes) /
                   static_cast<double>(report.naive_render_bytes);
  }
  if (report.bitrate_render_bytes > 0) {
    report.bitrate_ratio = static_cast<double>(report.annotation_bytes) /
                           static_cast<double>(report.bitrate_render_bytes);
  }
  return report;
}

std::vector<fs::path> AnnotationStore::export_dataset(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("export: cannot create " + dir.string() + ": " + ec.message());

  std::vector<fs::path> written;
  for (const auto& [cam, meta] : cameras_) {
    struct Row {
      int frame;
      GlobalId id;
      BoundingBox box;
    };
    std::vector<Row> rows;
    for (const auto& [gid, rec] : records_) {
      for (const auto& m : rec.members) {
        if (m.camera_id != cam) continue;
        const auto& t = trajectories_.at(m);
        for (std::size_t k = 0; k < t.boxes.size(); ++k) {
          rows.push_back({t.first_frame + static_cast<int>(k), gid, t.boxes[k]});
        }
      }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return std::tie(a.frame, a.id) < std::tie(b.frame, b.id);
    });
    std::ostringstream csv;
    csv << "frame,id,x,y,w,h,conf,wx,wy,wz\n";
    for (const auto& r : rows) {
      csv << r.frame << ',' << r.id << ',' << detail::format_double(r.box.x1) << ','
          << detail::format_double(r.box.y1) << ',' << detail::format_double(r.box.width()) << ','
          << detail::format_double(r.box.height()) << ",1,-1,-1,-1\n";
    }
    const auto path = dir / (cam + ".csv");
    try {
      detail::write_file(path, csv.str());
    } catch (const Error& e) {
      throw Error("export: " + std::string(e.what()));
    }
    written.push_back(path);
  }

  json identities = json::array();
  for (const auto& [gid, rec] : records_) {
    json members = json::array();
    for (const auto& m : rec.members) members.push_back(trajectory_json(trajectories_.at(m)));
    identities.push_back({{"global_id", gid}, {"members", members}});
  }
  const auto index = dir / "index.json";
  try {
    detail::write_file(index, json{{"identities", identities}}.dump() + "\n");
  } catch (const Error& e) {
    throw Error("export: " + std::string(e.what()));
  }
  written.push_back(index);
  return written;
}

std::map<GlobalId, std::set<TrajectoryRef>> import_dataset(const fs::path& dir) {
  std::map<GlobalId, std::set<TrajectoryRef>> out;
  const auto path = dir / "index.json";
  try {
    const auto j = json::parse(detail::read_file(path));
    for (const auto& ident : j.at("identities")) {
      auto& members = out[ident.at("global_id").get<GlobalId>()];
      for (const auto& m : ident.at("members")) {
        members.insert(TrajectoryRef::parse(m.at("trajectory_id").get<std::string>()));
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return out;
}

void AnnotationStore::save_snapshot(const fs::path& dir) const {
  fs::create_directories(dir);
  std::string bin;
  for (const auto& [ref, rec] : trajectories_) {
    const auto enc = encode_record(rec);
    detail::put_u32(bin, static_cast<std::uint32_t>(enc.size()));
    bin += enc;
  }
  json cams = json::array();
  for (const auto& [id, meta] : cameras_) cams.push_back(meta_json(meta));
  json recs = json::array();
  for (const auto& [id, rec] : records_) recs.push_back(record_json(rec));
  const json snap = {{"last_seq", seq_offset_ + static_cast<std::int64_t>(events_.size())},
                     {"next_global_id", next_global_id_},
                     {"cameras", cams},
                     {"records", recs}};
  // Trajectories first: a snapshot.json is only trusted once its companion exists.
  detail::write_file(dir / "trajectories.bin.tmp", bin);
  fs::rename(dir / "trajectories.bin.tmp", dir / "trajectories.bin");
  detail::write_file(dir / "snapshot.json.tmp", snap.dump() + "\n");
  fs::rename(dir / "snapshot.json.tmp", dir / "snapshot.json");
}

AnnotationStore AnnotationStore::load(const fs::path& dir, StoreOptions options, Clock clock) {
  AnnotationStore store(options, std::move(clock));
  std::int64_t last_seq = 0;
  if (fs::exists(dir / "snapshot.json")) {
    try {
      const auto snap = json::parse(detail::read_file(dir / "snapshot.json"));
      last_seq = snap.at("last_seq").get<std::int64_t>();
      store.next_global_id_ = snap.at("next_global_id").get<GlobalId>();
      for (const auto& c : snap.at("cameras")) {
        const auto meta = meta_from(c);
        store.cameras_.emplace(meta.camera_id, meta);
      }
      for (const auto& r : snap.at("records")) {
        auto rec = record_from(r);
        for (const auto& m : rec.members) store.membership_[m] = rec.global_id;
        store.records_.emplace(rec.global_id, std::move(rec));
      }
    } catch (const json::exception& e) {
      throw FormatError("snapshot: " + std::string(e.what()));
    }
    const auto bin = detail::read_file(dir / "trajectories.bin");
    std::size_t pos = 0;
    while (pos < bin.size()) {
      if (pos + 4 > bin.size()) throw FormatError("trajectories.bin truncated");
      const auto n = detail::get_u32(reinterpret_cast<const unsigned char*>(bin.data() + pos));
      pos += 4;
      if (pos + n > bin.size()) throw FormatError("trajectories.bin truncated");
      auto rec = decode_record(std::string_view(bin).substr(pos, n));
      pos += n;
      store.trajectories_.emplace(rec.ref, std::move(rec));
    }
    store.seq_offset_ = last_seq;
  }
  if (fs::exists(dir / "events.jsonl")) {
    std::ifstream in(dir / "events.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto event = StoreEvent::from_json_line(line);
      if (event.seq <= last_seq) continue;
      store.apply(event);
    }
  }
  return store;
}

}  // namespace mtmc
