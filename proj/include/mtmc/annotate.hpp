#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mtmc/ingest.hpp"
#include "mtmc/trajectory.hpp"

namespace mtmc {

using GlobalId = std::int64_t;

/// Structured trajectory tuple (p, t_s, t_e, b), D, f as persisted by the
/// store. Boxes and feature are held at single precision, which is exactly
/// what the binary codec writes, so a record survives encode/decode bit-for-bit.
struct TrajectoryRecord {
  TrajectoryRef ref;
  std::string clip_uri;
  double t_s = 0.0;
  double t_e = 0.0;
  int first_frame = 0;
  std::vector<BoundingBox> boxes;  ///< boxes[k] is frame first_frame + k
  Vec2 orientation;
  Feature feature;

  int last_frame() const { return first_frame + static_cast<int>(boxes.size()) - 1; }

  /// Requires a dense trajectory.
  static TrajectoryRecord from_trajectory(const Trajectory& trajectory, std::string clip_uri);
  /// Dense trajectory with the stored boxes, times, orientation and feature.
  Trajectory to_trajectory() const;

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

/// Compact little-endian encoding: 16 bytes per frame plus a fixed header.
std::string encode_record(const TrajectoryRecord& record);
TrajectoryRecord decode_record(std::string_view bytes);

struct HistoryEntry {
  std::string user;
  std::string action;
  std::int64_t timestamp_ms = 0;

  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct AnnotationRecord {
  GlobalId global_id = 0;
  std::set<TrajectoryRef> members;
  std::int64_t version = 0;
  std::vector<HistoryEntry> history;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

std::string annotation_record_to_json(const AnnotationRecord& record);
std::string trajectory_record_to_json(const TrajectoryRecord& record);
TrajectoryRecord trajectory_record_from_json(const std::string& text);

/// One line of the append-only event log.
struct StoreEvent {
  std::int64_t seq = 0;
  std::string op;       ///< "camera" | "trajectory" | "match" | "unmatch"
  std::string payload;  ///< JSON object text
  std::string user;
  std::int64_t ts = 0;  ///< milliseconds

  std::string to_json_line() const;
  static StoreEvent from_json_line(const std::string& line);

  friend bool operator==(const StoreEvent&, const StoreEvent&) = default;
};

struct OverlayBox {
  TrajectoryRef ref;
  std::optional<GlobalId> global_id;
  BoundingBox box;
  std::string color;  ///< "#rrggbb"
};

struct OverlayFrame {
  int frame = 0;
  std::vector<OverlayBox> boxes;
};

struct OverlayPayload {
  CameraId camera_id;
  std::string clip_uri;
  double fps = 0.0;
  std::vector<OverlayFrame> frames;

  std::size_t box_count() const;
};

std::string overlay_to_json(const std::vector<OverlayPayload>& payloads);

/// Display colour of an identity: FNV-1a of the decimal id mapped to an HSV hue.
std::string identity_color(GlobalId id);

struct StorageReport {
  std::uint64_t annotation_bytes = 0;
  std::uint64_t naive_render_bytes = 0;  ///< raw RGB frames
  double ratio = 0.0;
  std::uint64_t bitrate_render_bytes = 0;  ///< clip seconds at a fixed bitrate
  double bitrate_ratio = 0.0;
};

inline constexpr double kBaselineBitrateBps = 2'000'000.0;

struct StoreOptions {
  /// Allow one identity to hold several trajectories of the same camera.
  bool allow_multi_pass = false;
};

/// Partition of trajectories into global identities with per-record versions
/// and an append-only event log. Not internally synchronised; the service
/// layer serialises writers.
class AnnotationStore {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit AnnotationStore(StoreOptions options = {}, Clock clock = {});

  /// Registration is logged like any other write; repeating an identical
  /// registration is a no-op.
  void add_camera(const CameraVideoMeta& meta);
  /// Registers a trajectory of a known camera. A different record under an
  /// existing ref is an InputError.
  void add_trajectory(const TrajectoryRecord& record);

  /// Links two trajectories. `expected_version` is checked against the
  /// version of the query's current record (0 when unassigned).
  AnnotationRecord submit_match(const TrajectoryRef& query, const TrajectoryRef& candidate,
                                const std::string& user,
                                std::optional<std::int64_t> expected_version = std::nullopt);

  /// Removes a trajectory from its identity. Returns the surviving record, or
  /// nullopt when the record became empty and was deleted.
  std::optional<AnnotationRecord> unmatch(const TrajectoryRef& trajectory,
                                          const std::string& user,
                                          std::int64_t expected_version);

  /// Re-executes a logged event. Used for crash recovery and audit replay.
  void apply(const StoreEvent& event);

  std::int64_t version_of(const TrajectoryRef& ref) const;
  std::optional<GlobalId> global_id_of(const TrajectoryRef& ref) const;
  const AnnotationRecord& record(GlobalId id) const;
  const std::map<GlobalId, AnnotationRecord>& records() const { return records_; }
  const TrajectoryRecord& trajectory(const TrajectoryRef& ref) const;
  bool has_trajectory(const TrajectoryRef& ref) const { return trajectories_.contains(ref); }
  const std::map<TrajectoryRef, TrajectoryRecord>& trajectories() const { return trajectories_; }
  const std::map<CameraId, CameraVideoMeta>& cameras() const { return cameras_; }
  const std::vector<StoreEvent>& events() const { return events_; }

  /// Member sets of all records, including singletons.
  std::set<std::set<TrajectoryRef>> partition() const;

  std::vector<OverlayPayload> build_overlay(const TrajectoryRef& ref, double from_s,
                                            double to_s) const;
  /// One payload per member camera.
  std::vector<OverlayPayload> build_overlay(GlobalId id, double from_s, double to_s) const;

  StorageReport measure_storage() const;

  /// Writes <camera>.csv per camera (MOT ground-truth rows) and index.json.
  std::vector<std::filesystem::path> export_dataset(const std::filesystem::path& dir) const;

  /// Streams every new event to `sink` as a JSON line.
  void set_event_sink(std::ostream* sink) { sink_ = sink; }

  /// snapshot.json + trajectories.bin in `dir`.
  void save_snapshot(const std::filesystem::path& dir) const;
  /// Loads a snapshot (if present) then replays events.jsonl entries newer
  /// than the snapshot. Events are also the only input needed to rebuild a
  /// store from scratch.
  static AnnotationStore load(const std::filesystem::path& dir, StoreOptions options = {},
                              Clock clock = {});

 private:
  AnnotationRecord match_at(const TrajectoryRef& query, const TrajectoryRef& candidate,
                            const std::string& user, std::optional<std::int64_t> expected_version,
                            std::int64_t ts);
  std::optional<AnnotationRecord> unmatch_at(const TrajectoryRef& trajectory,
                                             const std::string& user,
                                             std::int64_t expected_version, std::int64_t ts);
  const TrajectoryRecord& require_trajectory(const TrajectoryRef& ref) const;
  void check_cameras_disjoint(const AnnotationRecord& a, const AnnotationRecord& b) const;
  void log_event(const std::string& op, const std::string& payload, const std::string& user,
                 std::int64_t ts);
  std::int64_t now() const;
  OverlayPayload overlay_for(const TrajectoryRecord& record, double from_s, double to_s) const;
  void merge_overlay(OverlayPayload& into, const OverlayPayload& from) const;

  StoreOptions options_;
  Clock clock_;
  std::map<CameraId, CameraVideoMeta> cameras_;
  std::map<TrajectoryRef, TrajectoryRecord> trajectories_;
  std::map<GlobalId, AnnotationRecord> records_;
  std::map<TrajectoryRef, GlobalId> membership_;
  GlobalId next_global_id_ = 1;
  std::vector<StoreEvent> events_;
  std::int64_t seq_offset_ = 0;  ///< events folded into the loaded snapshot
  std::ostream* sink_ = nullptr;
};

/// Reads index.json written by export_dataset: global id -> members.
std::map<GlobalId, std::set<TrajectoryRef>> import_dataset(const std::filesystem::path& dir);

}  // namespace mtmc
