#include "mtmc/service/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mtmc/error.hpp"
#include "mtmc/trajectory.hpp"

namespace mtmc::service {

namespace fs = std::filesystem;

namespace {

const std::map<JobKind, std::vector<std::string>>& required_inputs() {
  static const std::map<JobKind, std::vector<std::string>> table = {
      {JobKind::kIngest, {"detections", "meta"}},
      {JobKind::kTrack, {"detections", "meta"}},
      {JobKind::kFeature, {"tracks", "meta"}},
      {JobKind::kIndex, {"trajectories", "meta"}},
  };
  return table;
}

}  // namespace

std::string to_string(JobState state) {
  switch (state) {
    case JobState::kQueued:
      return "queued";
    case JobState::kRunning:
      return "running";
    case JobState::kDone:
      return "done";
    case JobState::kDead:
      return "dead";
  }
  return "queued";
}

Pipeline::Pipeline(Broker& broker, fs::path work_dir, PipelineOptions options, IndexSink sink)
    : broker_(broker),
      work_dir_(std::move(work_dir)),
      options_(std::move(options)),
      sink_(std::move(sink)) {
  fs::create_directories(work_dir_ / "results");
  fs::create_directories(work_dir_ / "tmp");
}

fs::path Pipeline::result_dir(const std::string& job_id) const {
  return work_dir_ / "results" / job_id;
}

std::string Pipeline::enqueue(JobKind kind, const CameraId& camera,
                              const std::map<std::string, std::string>& inputs) {
  if (camera.empty()) throw InputError("job needs a camera_id");
  for (const auto& key : required_inputs().at(kind)) {
    const auto it = inputs.find(key);
    if (it == inputs.end()) {
      throw InputError(to_string(kind) + " job needs input '" + key + "'");
    }
    if (!fs::exists(it->second)) {
      throw InputError("input '" + key + "' does not exist: " + it->second);
    }
  }
  JobMessage message;
  message.kind = kind;
  message.camera_id = camera;
  message.inputs = inputs;
  {
    std::lock_guard lock(status_mutex_);
    message.job_id = camera + "-" + to_string(kind) + "-" + std::to_string(next_job_++);
    statuses_[message.job_id] = {JobState::kQueued, 0};
  }
  broker_.publish(message);
  return message.job_id;
}

void Pipeline::set_status(const std::string& job_id, JobState state, int attempts) {
  std::lock_guard lock(status_mutex_);
  auto& s = statuses_[job_id];
  // A redelivered duplicate never moves a finished job backwards.
  if (s.state == JobState::kDone && state != JobState::kDone) return;
  s.state = state;
  s.attempts = std::max(s.attempts, attempts);
}

std::optional<JobStatus> Pipeline::status(const std::string& job_id) const {
  std::lock_guard lock(status_mutex_);
  const auto it = statuses_.find(job_id);
  if (it == statuses_.end()) return std::nullopt;
  return it->second;
}

void Pipeline::fault(const JobMessage& message, FaultPoint point) {
  if (fault_hook_) fault_hook_(message, point);
}

void Pipeline::persist(const std::string& job_id,
                       const std::function<void(const fs::path&)>& write) {
  static std::atomic<std::uint64_t> counter{0};
  const auto tmp = work_dir_ / "tmp" / (job_id + "." + std::to_string(counter++));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write(tmp);
  std::error_code ec;
  fs::rename(tmp, result_dir(job_id), ec);
  if (ec) {
    // Another delivery of the same job won the race; its output is equivalent.
    fs::remove_all(tmp);
    if (!fs::exists(result_dir(job_id))) {
      throw Error("cannot publish result of " + job_id + ": " + ec.message());
    }
  }
}

std::optional<JobMessage> Pipeline::successor(const JobMessage& message) const {
  const auto dir = result_dir(message.job_id);
  JobMessage next;
  next.camera_id = message.camera_id;
  next.inputs["meta"] = message.inputs.at("meta");
  switch (message.kind) {
    case JobKind::kIngest:
      next.kind = JobKind::kTrack;
      next.inputs["detections"] = (dir / "sampled.csv").string();
      break;
    case JobKind::kTrack:
      next.kind = JobKind::kFeature;
      next.inputs["tracks"] = (dir / "tracks.jsonl").string();
      break;
    case JobKind::kFeature:
      next.kind = JobKind::kIndex;
      next.inputs["trajectories"] = (dir / "trajectories.jsonl").string();
      break;
    case JobKind::kIndex:
      return std::nullopt;
  }
  next.job_id = message.job_id + "." + to_string(next.kind);
  return next;
}

std::optional<JobMessage> Pipeline::run_job(const JobMessage& message) {
  if (fs::exists(result_dir(message.job_id))) return successor(message);

  fault(message, FaultPoint::kBeforePersist);
  const auto meta = read_camera_meta(message.inputs.at("meta"));
  if (meta.camera_id != message.camera_id) {
    throw InputError("job " + message.job_id + " camera " + message.camera_id +
                     " does not match metadata camera " + meta.camera_id);
  }
  SamplingConfig sampling = options_.sampling;
  sampling.fps = meta.fps;

  switch (message.kind) {
    case JobKind::kIngest: {
      const auto detections = parse_detections(message.inputs.at("detections"), meta);
      const auto sampled = sample_and_filter(detections, sampling);
      persist(message.job_id,
              [&](const fs::path& dir) { write_detections(dir / "sampled.csv", sampled); });
      break;
    }
    case JobKind::kTrack: {
      const auto detections = parse_detections(message.inputs.at("detections"), meta);
      const auto frames = group_key_frames(detections, sampling.interval, meta.frame_count);
      const auto tracks = associate(frames, options_.association, meta.fps);
      std::vector<Trajectory> dense;
      for (const auto& t : tracks) dense.push_back(interpolate(t, sampling.interval));
      const auto kept = filter_trajectories(dense, options_.association, meta.fps);
      persist(message.job_id, [&](const fs::path& dir) {
        write_trajectories_jsonl(dir / "tracks.jsonl", kept, true);
      });
      break;
    }
    case JobKind::kFeature: {
      auto tracks = read_trajectories_jsonl(fs::path(message.inputs.at("tracks")));
      finalize_features(tracks, options_.association.normalize_features);
      persist(message.job_id, [&](const fs::path& dir) {
        write_trajectories_jsonl(dir / "trajectories.jsonl", tracks);
      });
      break;
    }
    case JobKind::kIndex: {
      const auto trajectories = read_trajectories_jsonl(fs::path(message.inputs.at("trajectories")));
      std::vector<TrajectoryRecord> records;
      nlohmann::json refs = nlohmann::json::array();
      for (const auto& t : trajectories) {
        records.push_back(TrajectoryRecord::from_trajectory(t, meta.clip_uri));
        refs.push_back(t.ref().str());
      }
      if (sink_) sink_(meta, records);
      persist(message.job_id, [&](const fs::path& dir) {
        std::ofstream out(dir / "index.json");
        out << nlohmann::json{{"camera_id", meta.camera_id}, {"trajectories", refs}}.dump()
            << '\n';
      });
      break;
    }
  }
  fault(message, FaultPoint::kAfterPersist);
  return successor(message);
}

void Pipeline::process(const Delivery& delivery) {
  const JobMessage& message = delivery.message;
  set_status(message.job_id, JobState::kRunning, message.attempt + 1);
  try {
    const auto next = run_job(message);
    if (next) {
      {
        std::lock_guard lock(status_mutex_);
        statuses_.try_emplace(next->job_id, JobStatus{JobState::kQueued, 0});
      }
      broker_.publish(*next);
    }
    fault(message, FaultPoint::kAfterPublish);
    broker_.ack(delivery.tag);
    set_status(message.job_id, JobState::kDone, message.attempt + 1);
  } catch (const WorkerCrash&) {
    // Simulated death: no ack, the broker keeps the delivery in flight.
  } catch (const std::exception&) {
    const bool last = message.attempt + 1 >= broker_.max_attempts();
    broker_.nack(delivery.tag, true);
    set_status(message.job_id, last ? JobState::kDead : JobState::kQueued, message.attempt + 1);
  }
}

bool Pipeline::run_once(std::chrono::milliseconds timeout) {
  const auto delivery = broker_.consume(timeout);
  if (!delivery) return false;
  process(*delivery);
  return true;
}

void Pipeline::run_until_idle() {
  while (run_once(std::chrono::milliseconds(0))) {
  }
}

void Pipeline::start_workers(int n) {
  stopping_ = false;
  for (int i = 0; i < n; ++i) {
    workers_.emplace_back([this] {
      while (!stopping_) run_once(std::chrono::milliseconds(20));
    });
  }
}

void Pipeline::stop() {
  stopping_ = true;
  for (auto& w : workers_) w.join();
  workers_.clear();
}

}  // namespace mtmc::service
