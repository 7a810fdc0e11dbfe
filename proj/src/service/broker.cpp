#include "mtmc/service/broker.hpp"

#include <nlohmann/json.hpp>

#include "mtmc/error.hpp"

namespace mtmc::service {

std::string to_string(JobKind kind) {
  switch (kind) {
    case JobKind::kIngest:
      return "ingest";
    case JobKind::kTrack:
      return "track";
    case JobKind::kFeature:
      return "feature";
    case JobKind::kIndex:
      return "index";
  }
  return "ingest";
}

JobKind parse_job_kind(const std::string& text) {
  if (text == "ingest") return JobKind::kIngest;
  if (text == "track") return JobKind::kTrack;
  if (text == "feature") return JobKind::kFeature;
  if (text == "index") return JobKind::kIndex;
  throw InputError("unknown job kind '" + text + "'");
}

std::string JobMessage::to_json() const {
  return nlohmann::json{{"job_id", job_id},       {"kind", to_string(kind)},
                        {"camera_id", camera_id}, {"inputs", inputs},
                        {"attempt", attempt}}
      .dump();
}

JobMessage JobMessage::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    JobMessage m;
    m.job_id = j.at("job_id").get<std::string>();
    m.kind = parse_job_kind(j.at("kind").get<std::string>());
    m.camera_id = j.at("camera_id").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.attempt = j.value("attempt", 0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("job message: ") + e.what());
  }
}

InProcessBroker::InProcessBroker(int max_attempts) : max_attempts_(max_attempts) {}

void InProcessBroker::publish(const JobMessage& message) {
  {
    std::lock_guard lock(mutex_);
    ready_.push_back({message, false});
    if (duplicate_) ready_.push_back({message, true});
  }
  ready_cv_.notify_all();
}

std::optional<Delivery> InProcessBroker::consume(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  if (!ready_cv_.wait_for(lock, timeout, [&] { return !ready_.empty(); })) return std::nullopt;
  Entry entry = std::move(ready_.front());
  ready_.pop_front();
  const auto tag = next_tag_++;
  Delivery d{tag, entry.message, entry.redelivered};
  unacked_.emplace(tag, std::move(entry));
  return d;
}

void InProcessBroker::ack(std::uint64_t tag) {
  std::lock_guard lock(mutex_);
  unacked_.erase(tag);
}

void InProcessBroker::nack(std::uint64_t tag, bool requeue) {
  {
    std::lock_guard lock(mutex_);
    const auto it = unacked_.find(tag);
    if (it == unacked_.end()) return;
    Entry entry = std::move(it->second);
    unacked_.erase(it);
    entry.message.attempt += 1;
    entry.redelivered = true;
    if (requeue && entry.message.attempt < max_attempts_) {
      ready_.push_back(std::move(entry));
    } else {
      dead_.push_back(std::move(entry.message));
    }
  }
  ready_cv_.notify_all();
}

void InProcessBroker::recover() {
  {
    std::lock_guard lock(mutex_);
    for (auto& [tag, entry] : unacked_) {
      entry.redelivered = true;
      ready_.push_back(std::move(entry));
    }
    unacked_.clear();
  }
  ready_cv_.notify_all();
}

void InProcessBroker::set_duplicate_delivery(bool enabled) {
  std::lock_guard lock(mutex_);
  duplicate_ = enabled;
}

std::size_t InProcessBroker::ready_count() const {
  std::lock_guard lock(mutex_);
  return ready_.size();
}

std::size_t InProcessBroker::unacked_count() const {
  std::lock_guard lock(mutex_);
  return unacked_.size();
}

std::vector<JobMessage> InProcessBroker::dead_letters() const {
  std::lock_guard lock(mutex_);
  return dead_;
}

std::unique_ptr<Broker> make_broker(const std::string& uri, int max_attempts) {
  if (uri == "inproc://" || uri == "inproc") return std::make_unique<InProcessBroker>(max_attempts);
  const auto scheme = uri.substr(0, uri.find("://"));
  throw ConfigError("broker scheme '" + scheme +
                    "' is not available in this build; use inproc://");
}

}  // namespace mtmc::service
