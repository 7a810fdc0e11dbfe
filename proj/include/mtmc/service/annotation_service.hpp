#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <type_traits>
#include <utility>

#include "mtmc/annotate.hpp"

namespace mtmc::service {

/// Owns the annotation store. Every mutation is queued FIFO and applied by a
/// single writer thread; readers run concurrently under a shared lock and see
/// the state between two writes.
class AnnotationService {
 public:
  explicit AnnotationService(AnnotationStore store);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  template <class F>
  auto write(F&& fn) -> std::future<std::invoke_result_t<F, AnnotationStore&>> {
    using R = std::invoke_result_t<F, AnnotationStore&>;
    auto task = std::make_shared<std::packaged_task<R()>>(
        [this, fn = std::forward<F>(fn)]() mutable { return fn(store_); });
    auto future = task->get_future();
    enqueue([task] { (*task)(); });
    return future;
  }

  template <class F>
  auto read(F&& fn) const -> std::invoke_result_t<F, const AnnotationStore&> {
    std::shared_lock lock(state_mutex_);
    return fn(static_cast<const AnnotationStore&>(store_));
  }

 private:
  void enqueue(std::function<void()> task);
  void writer_loop();

  AnnotationStore store_;
  mutable std::shared_mutex state_mutex_;
  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::thread writer_;
};

}  // namespace mtmc::service
