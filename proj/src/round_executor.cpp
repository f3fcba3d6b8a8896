#include "zopmc/round_executor.hpp"

#include <utility>

#include "zopmc/errors.hpp"

namespace zopmc {

WorkerPool::WorkerPool(std::size_t workers) {
  if (workers < 1) throw UsageError("WorkerPool: need at least one worker");
  threads_.reserve(workers - 1);
  for (std::size_t i = 0; i + 1 < workers; ++i) {
    threads_.emplace_back([this](std::stop_token st) { worker_loop(st); });
  }
}

WorkerPool::~WorkerPool() {
  for (auto& t : threads_) t.request_stop();
  start_cv_.notify_all();
  threads_.clear();  // joins
}

void WorkerPool::drain() {
  const auto& task = *task_;
  for (std::size_t i = next_.fetch_add(1); i < batch_size_;
       i = next_.fetch_add(1)) {
    try {
      task(i);
    } catch (...) {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
  }
}

void WorkerPool::worker_loop(std::stop_token stop) {
  std::uint64_t seen = 0;
  while (true) {
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, stop, [&] { return generation_ != seen; });
      if (stop.stop_requested()) return;
      seen = generation_;
    }
    drain();
    {
      std::lock_guard lock(mutex_);
      if (--busy_ == 0) done_cv_.notify_one();
    }
  }
}

void WorkerPool::run(std::size_t n,
                     const std::function<void(std::size_t)>& task) {
  if (n == 0) return;
  if (threads_.empty() || n == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    task_ = &task;
    batch_size_ = n;
    next_.store(0);
    busy_ = threads_.size();
    error_ = nullptr;
    ++generation_;
  }
  start_cv_.notify_all();
  drain();
  std::exception_ptr error;
  {
    std::unique_lock lock(mutex_);
    done_cv_.wait(lock, [&] { return busy_ == 0; });
    task_ = nullptr;
    error = std::exchange(error_, nullptr);
  }
  if (error) std::rethrow_exception(error);
}

void RoundExecutor::evaluate(
    const TargetModel& target,
    const std::function<VectorXd(std::size_t)>& make_point,
    std::span<double> out, RoundLedger& ledger) {
  pool_.run(out.size(), [&](std::size_t i) {
    out[i] = target.potential(make_point(i));
  });
  ledger.charge(out.size());
}

}  // namespace zopmc
