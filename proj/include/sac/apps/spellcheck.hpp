#pragma once

// Spellcheck: minimum edit distance from a corpus of fixed-length strings
// to one reference string.  Each string gets a heavy reader (the full
// O(L²) DP, reported as work ticks), and the distances are min-reduced
// with the sum skeleton.  Replacing a string re-executes one DP reader
// plus its combiner path.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "sac/apps/common.hpp"

namespace sac::apps {

class SpellcheckApp {
 public:
  static constexpr const char* kName = "spellcheck";
  static constexpr size_t kStringLen = 80;

  SpellcheckApp(size_t n, uint64_t seed)
      : n_(n),
        strings_(rng_stream(seed, 3)),
        picks_(rng_stream(seed, 4)),
        ref_(random_string(strings_, kStringLen)) {
    model_.reserve(n_);
    in_.resize(n_);
    for (size_t i = 0; i < n_; ++i) {
      model_.push_back(random_string(strings_, kStringLen));
      in_[i]->write(model_[i]);
    }
  }

  SpellcheckApp(const SpellcheckApp&) = delete;
  SpellcheckApp& operator=(const SpellcheckApp&) = delete;

  void build(Scheduler& sched) {
    comp_ = run(
        [&] {
          auto dist = alloc_array<long>(n_);
          parfor(0, n_, [this, &dist](size_t i) {
            read(in_[i], [this, d = dist[i]](const std::string& s) {
              work(s.size() * ref_.size());
              write(d, static_cast<long>(edit_distance(s, ref_)));
            });
          });
          reduce_tree<long>(dist, best_.get(),
                            [](long a, long b) { return std::min(a, b); });
        },
        sched);
  }

  void mutate(size_t k) {
    for (size_t i : sample_distinct(picks_, n_, k)) {
      std::string s = random_string(picks_, kStringLen);
      while (s == model_[i]) s = random_string(picks_, kStringLen);
      model_[i] = std::move(s);
      write(in_[i], model_[i]);
    }
  }

  bool verify() const { return best_->value() == oracle_min(); }

  uint64_t baseline_pass() const {
    return static_cast<uint64_t>(oracle_min());
  }
  uint64_t output_digest() const {
    return static_cast<uint64_t>(best_->value());
  }

  long output() const { return best_->value(); }
  Computation& comp() { return comp_; }

 private:
  long oracle_min() const {
    long best = static_cast<long>(ref_.size()) + kStringLen + 1;
    for (const std::string& s : model_)
      best = std::min(best, static_cast<long>(edit_distance(s, ref_)));
    return best;
  }

  size_t n_;
  std::mt19937_64 strings_, picks_;
  std::string ref_;
  std::vector<std::string> model_;
  InputArray<std::string> in_;
  ModPtr<long> best_ = make_input<long>();
  Computation comp_;
};

}  // namespace sac::apps
