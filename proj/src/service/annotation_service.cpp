#include "mtmc/service/annotation_service.hpp"

namespace mtmc::service {

AnnotationService::AnnotationService(AnnotationStore store)
    : store_(std::move(store)), writer_([this] { writer_loop(); }) {}

AnnotationService::~AnnotationService() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  writer_.join();
}

void AnnotationService::enqueue(std::function<void()> task) {
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(std::move(task));
  }
  queue_cv_.notify_one();
}

void AnnotationService::writer_loop() {
  while (true) {
    std::function<void()> task;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    std::unique_lock state(state_mutex_);
    task();
  }
}

}  // namespace mtmc::service
