#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "zopmc/targets.hpp"

namespace zopmc {

/// Cost accounting in the unit of parallel rounds: one round is a batch of
/// potential evaluations issued together and joined before continuing.
struct RoundLedger {
  std::uint64_t rounds = 0;
  std::uint64_t evals = 0;

  void charge(std::uint64_t evaluations) {
    rounds += 1;
    evals += evaluations;
  }

  RoundLedger& operator+=(const RoundLedger& other) {
    rounds += other.rounds;
    evals += other.evals;
    return *this;
  }
};

/// Fixed pool of worker threads. The calling thread takes part in every
/// batch, so a pool of size 1 spawns no threads at all.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const { return threads_.size() + 1; }

  /// Runs task(i) for every i in [0, n) and blocks until all finish.
  /// Rethrows the first exception raised by any task.
  void run(std::size_t n, const std::function<void(std::size_t)>& task);

 private:
  void worker_loop(std::stop_token stop);
  void drain();

  std::mutex mutex_;
  std::condition_variable_any start_cv_;
  std::condition_variable done_cv_;
  std::uint64_t generation_ = 0;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::size_t batch_size_ = 0;
  std::atomic<std::size_t> next_{0};
  std::size_t busy_ = 0;
  std::exception_ptr error_;
  std::vector<std::jthread> threads_;
};

/// Dispatches batches of potential evaluations as parallel rounds. Each
/// evaluation writes only its own output slot, so results do not depend on
/// the worker count or on scheduling.
class RoundExecutor {
 public:
  explicit RoundExecutor(std::size_t workers = 1) : pool_(workers) {}

  std::size_t workers() const { return pool_.size(); }

  /// out[i] = U(make_point(i)) for i < out.size(), charged as one round of
  /// out.size() evaluations. make_point must be safe to call concurrently.
  void evaluate(const TargetModel& target,
                const std::function<VectorXd(std::size_t)>& make_point,
                std::span<double> out, RoundLedger& ledger);

 private:
  WorkerPool pool_;
};

}  // namespace zopmc
