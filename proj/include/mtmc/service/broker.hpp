#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mtmc/ingest.hpp"

namespace mtmc::service {

enum class JobKind { kIngest, kTrack, kFeature, kIndex };

std::string to_string(JobKind kind);
/// Throws InputError for names outside the closed set.
JobKind parse_job_kind(const std::string& text);

struct JobMessage {
  std::string job_id;
  JobKind kind = JobKind::kIngest;
  CameraId camera_id;
  std::map<std::string, std::string> inputs;
  int attempt = 0;

  std::string to_json() const;
  static JobMessage from_json(const std::string& text);

  friend bool operator==(const JobMessage&, const JobMessage&) = default;
};

struct Delivery {
  std::uint64_t tag = 0;
  JobMessage message;
  bool redelivered = false;
};

/// AMQP-style message contract: publish, consume with manual acknowledgement,
/// negative acknowledgement with optional requeue. Unacknowledged deliveries
/// are redelivered, so consumers must be idempotent.
class Broker {
 public:
  virtual ~Broker() = default;

  virtual void publish(const JobMessage& message) = 0;
  virtual std::optional<Delivery> consume(std::chrono::milliseconds timeout) = 0;
  virtual void ack(std::uint64_t tag) = 0;
  /// With `requeue` the message returns with attempt + 1, or goes to the
  /// dead-letter list once max attempts are used up.
  virtual void nack(std::uint64_t tag, bool requeue) = 0;
  virtual int max_attempts() const = 0;
};

class InProcessBroker final : public Broker {
 public:
  explicit InProcessBroker(int max_attempts = 3);

  void publish(const JobMessage& message) override;
  std::optional<Delivery> consume(std::chrono::milliseconds timeout) override;
  void ack(std::uint64_t tag) override;
  void nack(std::uint64_t tag, bool requeue) override;
  int max_attempts() const override { return max_attempts_; }

  /// Returns every unacknowledged delivery to the queue, as a broker does when
  /// a consumer connection drops.
  void recover();

  /// Fault injection: every published message is enqueued twice.
  void set_duplicate_delivery(bool enabled);

  std::size_t ready_count() const;
  std::size_t unacked_count() const;
  std::vector<JobMessage> dead_letters() const;

 private:
  struct Entry {
    JobMessage message;
    bool redelivered = false;
  };

  int max_attempts_;
  mutable std::mutex mutex_;
  std::condition_variable ready_cv_;
  std::deque<Entry> ready_;
  std::map<std::uint64_t, Entry> unacked_;
  std::vector<JobMessage> dead_;
  std::uint64_t next_tag_ = 1;
  bool duplicate_ = false;
};

/// "inproc://" gives an InProcessBroker. Other schemes are rejected with a
/// ConfigError naming the scheme.
std::unique_ptr<Broker> make_broker(const std::string& uri, int max_attempts = 3);

}  // namespace mtmc::service
