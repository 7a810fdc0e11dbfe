#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mtmc/annotate.hpp"
#include "mtmc/ingest.hpp"
#include "mtmc/service/broker.hpp"
#include "mtmc/tracker.hpp"

namespace mtmc::service {

enum class JobState { kQueued, kRunning, kDone, kDead };
std::string to_string(JobState state);

struct JobStatus {
  JobState state = JobState::kQueued;
  int attempts = 0;
};

struct PipelineOptions {
  SamplingConfig sampling;
  AssociationConfig association;
};

/// Receives the finished trajectories of one camera. Must be idempotent.
using IndexSink =
    std::function<void(const CameraVideoMeta& meta, const std::vector<TrajectoryRecord>& records)>;

/// Points in a job where a test can inject a crash.
enum class FaultPoint { kBeforePersist, kAfterPersist, kAfterPublish };

/// Thrown by a fault hook to simulate a worker dying without acknowledging.
struct WorkerCrash {};

/// Per-camera job chain ingest -> track -> feature -> index over a broker.
///
/// Each job writes its output to results/<job_id>/ through an atomic rename,
/// then publishes the next job, then acknowledges. A redelivered job whose
/// output already exists skips processing and only re-publishes its
/// successor, so any number of redeliveries leaves one result per job id.
class Pipeline {
 public:
  Pipeline(Broker& broker, std::filesystem::path work_dir, PipelineOptions options,
           IndexSink sink);

  /// Validates inputs and publishes a root job. Required inputs:
  /// ingest {detections, meta}; track {detections, meta};
  /// feature {tracks, meta}; index {trajectories, meta}.
  std::string enqueue(JobKind kind, const CameraId& camera,
                      const std::map<std::string, std::string>& inputs);

  /// Consumes and processes at most one message. Returns false on timeout.
  bool run_once(std::chrono::milliseconds timeout = std::chrono::milliseconds(50));

  /// Drains the broker on the calling thread.
  void run_until_idle();

  /// Starts `n` worker threads that drain the broker until stop().
  void start_workers(int n);
  void stop();

  std::optional<JobStatus> status(const std::string& job_id) const;

  void set_fault_hook(std::function<void(const JobMessage&, FaultPoint)> hook) {
    fault_hook_ = std::move(hook);
  }

  std::filesystem::path result_dir(const std::string& job_id) const;

 private:
  void process(const Delivery& delivery);
  std::optional<JobMessage> run_job(const JobMessage& message);
  std::optional<JobMessage> successor(const JobMessage& message) const;
  void persist(const std::string& job_id,
               const std::function<void(const std::filesystem::path&)>& write);
  void set_status(const std::string& job_id, JobState state, int attempts);
  void fault(const JobMessage& message, FaultPoint point);

  Broker& broker_;
  std::filesystem::path work_dir_;
  PipelineOptions options_;
  IndexSink sink_;
  std::function<void(const JobMessage&, FaultPoint)> fault_hook_;

  mutable std::mutex status_mutex_;
  std::map<std::string, JobStatus> statuses_;
  std::uint64_t next_job_ = 1;

  std::atomic<bool> stopping_{false};
  std::vector<std::thread> workers_;
};

}  // namespace mtmc::service
