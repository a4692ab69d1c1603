#pragma once

// Divide-and-conquer sum over n input cells.  The simplest of the
// benchmark apps and the reference point for the distance-growth checks:
// a batch of k changed inputs re-executes the union of k leaf-to-root
// combiner paths, O(k·log(1 + n/k)) readers.

#include <cstdint>
#include <vector>

#include "sac/apps/common.hpp"

namespace sac::apps {

class SumApp {
 public:
  static constexpr const char* kName = "sum";

  SumApp(size_t n, uint64_t seed)
      : n_(n), vals_(rng_stream(seed, 1)), picks_(rng_stream(seed, 2)) {
    model_.resize(n_);
    in_.resize(n_);
    for (size_t i = 0; i < n_; ++i) {
      model_[i] = draw();
      in_[i]->write(model_[i]);
    }
  }

  // Explicit initial contents; mutations still come from the seed.
  SumApp(std::vector<long> values, uint64_t seed)
      : n_(values.size()),
        vals_(rng_stream(seed, 1)),
        picks_(rng_stream(seed, 2)),
        model_(std::move(values)) {
    in_.resize(n_);
    for (size_t i = 0; i < n_; ++i) in_[i]->write(model_[i]);
  }

  SumApp(const SumApp&) = delete;
  SumApp& operator=(const SumApp&) = delete;

  void build(Scheduler& sched) {
    comp_ = run(
        [&] {
          reduce_tree<long>(in_.view(), total_.get(),
                            [](long a, long b) { return a + b; });
        },
        sched);
  }

  void mutate(size_t k) {
    for (size_t i : sample_distinct(picks_, n_, k)) {
      long v = draw();
      while (v == model_[i]) v = draw();
      model_[i] = v;
      write(in_[i], v);
    }
  }

  bool verify() const { return total_->value() == fold(); }

  uint64_t baseline_pass() const { return static_cast<uint64_t>(fold()); }
  uint64_t output_digest() const {
    return static_cast<uint64_t>(total_->value());
  }

  long output() const { return total_->value(); }
  Computation& comp() { return comp_; }

 private:
  long draw() { return static_cast<long>(draw_below(vals_, 2000001)) - 1000000; }

  long fold() const {
    long s = 0;
    for (long v : model_) s += v;
    return s;
  }

  size_t n_;
  std::mt19937_64 vals_, picks_;
  std::vector<long> model_;
  InputArray<long> in_;
  ModPtr<long> total_ = make_input<long>();
  Computation comp_;
};

}  // namespace sac::apps
