#pragma once

// Reader-set stress: w workers each read one cell chosen at random from a
// pool of m modifiables and copy its value to a private output.  With
// m = w every registry holds a single inline reader; with m = 1 all the
// workers pile onto one registry's tree.  The update rewrites every cell,
// so propagation re-executes all w readers regardless of batch size (the
// k parameter is accepted for harness uniformity and ignored).

#include <cstdint>
#include <vector>

#include "sac/apps/common.hpp"

namespace sac::apps {

class ReaderStressApp {
 public:
  static constexpr const char* kName = "readers";

  // granularity = workers per cell: m = max(1, n / granularity).
  ReaderStressApp(size_t n, uint64_t seed, size_t granularity = 1)
      : w_(n),
        m_(std::max<size_t>(1, granularity == 0 ? n : n / granularity)),
        rng_(rng_stream(seed, 7)) {
    model_.resize(m_);
    in_.resize(m_);
    for (size_t j = 0; j < m_; ++j) {
      model_[j] = static_cast<long>(draw_below(rng_, 1u << 30));
      in_[j]->write(model_[j]);
    }
    if (m_ == w_) {
      // One reader per cell: a random permutation, so every registry ends
      // up holding exactly one (inline) reader.
      target_ = sample_distinct(rng_, m_, m_);
    } else {
      target_.resize(w_);
      for (size_t i = 0; i < w_; ++i) target_[i] = draw_below(rng_, m_);
    }
    out_.resize(w_);
  }

  ReaderStressApp(const ReaderStressApp&) = delete;
  ReaderStressApp& operator=(const ReaderStressApp&) = delete;

  void build(Scheduler& sched) {
    comp_ = run(
        [&] {
          parfor(0, w_, [this](size_t i) {
            read(in_[target_[i]],
                 [o = out_[i]](long v) { write(o, v); });
          });
        },
        sched);
  }

  void mutate(size_t /*k*/) {
    for (size_t j = 0; j < m_; ++j) {
      model_[j] += 1;
      write(in_[j], model_[j]);
    }
  }

  bool verify() const {
    for (size_t i = 0; i < w_; ++i)
      if (out_[i]->value() != model_[target_[i]]) return false;
    return true;
  }

  uint64_t baseline_pass() const {
    uint64_t h = 0;
    for (size_t i = 0; i < w_; ++i)
      h = digest_mix(h, static_cast<uint64_t>(model_[target_[i]]));
    return h;
  }
  uint64_t output_digest() const {
    uint64_t h = 0;
    for (size_t i = 0; i < w_; ++i)
      h = digest_mix(h, static_cast<uint64_t>(out_[i]->value()));
    return h;
  }

  // Debug probe: true when every input registry stores its reader inline.
  bool all_reader_sets_inline() const {
    for (size_t j = 0; j < m_; ++j)
      if (in_[j]->readers().state() != ReaderSet::State::Inline) return false;
    return true;
  }

  size_t workers() const { return w_; }
  size_t cells() const { return m_; }
  Computation& comp() { return comp_; }

 private:
  size_t w_, m_;
  std::mt19937_64 rng_;
  std::vector<long> model_;
  InputArray<long> in_;
  std::vector<size_t> target_;
  InputArray<long> out_;
  Computation comp_;
};

}  // namespace sac::apps
