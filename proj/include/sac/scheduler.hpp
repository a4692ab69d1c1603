#pragma once

// Fork-join substrate.  The engine needs three things from a scheduler:
// enter a bounded arena, fork two strands and join them, and fan a range
// out over strands.  oneTBB provides all three with nested blocking joins
// and work stealing; this facade pins down the slice we rely on and keeps
// the trace code scheduler-agnostic.

#include <thread>

#include <oneapi/tbb/blocked_range.h>
#include <oneapi/tbb/parallel_for.h>
#include <oneapi/tbb/parallel_invoke.h>
#include <oneapi/tbb/task_arena.h>

namespace sac {

class Scheduler {
 public:
  explicit Scheduler(int workers = 0)
      : workers_(workers > 0 ? workers : default_workers()),
        arena_(workers_) {}

  int workers() const { return workers_; }

  // Top-level entry: run f inside the arena so every fork below spreads
  // over at most `workers` strands.
  template <class F>
  void execute(F&& f) {
    arena_.execute(std::forward<F>(f));
  }

  template <class A, class B>
  static void fork2(A&& a, B&& b) {
    oneapi::tbb::parallel_invoke(std::forward<A>(a), std::forward<B>(b));
  }

  template <class F>
  static void for_range(size_t lo, size_t hi, F&& f) {
    oneapi::tbb::parallel_for(oneapi::tbb::blocked_range<size_t>(lo, hi),
                              [&](const oneapi::tbb::blocked_range<size_t>& r) {
                                for (size_t i = r.begin(); i != r.end(); ++i)
                                  f(i);
                              });
  }

  static int default_workers() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }

 private:
  int workers_;
  oneapi::tbb::task_arena arena_;
};

inline Scheduler& default_scheduler() {
  static Scheduler s;
  return s;
}

}  // namespace sac
