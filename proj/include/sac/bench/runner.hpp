#pragma once

// Drives the benchmark apps through their measured phases and collects one
// row per (benchmark, phase, k, thread count).
//
// Phases per benchmark:
//   baseline  sequential from-scratch pass over the host model, no trace
//   initial   building the trace from scratch under the worker pool
//   update    propagating a batch of k input changes
//   gc        sweeping the garbage pile the update left behind
//
// Every phase runs `reps` times on a freshly built app so repetitions are
// identical replays; wall times are averaged, while the trace counters must
// match across repetitions exactly (same seed, same batch — a drift is a
// determinism bug, reported like an oracle mismatch).  Oracle verification
// brackets every timed window and is never inside one.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sac/apps/filter_bst.hpp"
#include "sac/apps/list_contraction.hpp"
#include "sac/apps/reader_stress.hpp"
#include "sac/apps/spellcheck.hpp"
#include "sac/apps/string_hash.hpp"
#include "sac/apps/sum.hpp"
#include "sac/apps/tree_contraction.hpp"
#include "sac/bench/options.hpp"
#include "sac/engine.hpp"

namespace sac::bench {

struct Row {
  std::string benchmark;
  uint64_t n = 0;
  uint64_t k = 0;
  uint64_t threads = 0;
  std::string phase;
  uint64_t time_ns = 0;
  uint64_t affected_readers = 0;
  uint64_t reexec_work_units = 0;
  uint64_t tree_nodes = 0;
  uint64_t tree_height = 0;
  double su = 1.0;  // time at the smallest thread count / time here
  double ws = 1.0;  // baseline time / time here
  double total = 1.0;  // su * ws
};

// The run produced wrong answers (or, equally fatal, counters that drift
// across identical repetitions).  The driver maps this to exit code 3.
struct CorrectnessFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline volatile uint64_t baseline_sink = 0;

template <class F>
uint64_t timed_ns(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return static_cast<uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
}

template <class App>
void check_oracle(const App& app, const std::string& name, bool inject) {
  if (!app.verify() || inject)
    throw CorrectnessFailure("oracle mismatch: benchmark '" + name +
                             "' disagrees with the from-scratch result");
}

// Accumulates one row's repetitions: times are averaged, counters are
// pinned by the first repetition and must recur exactly.
class RowAccum {
 public:
  void add(uint64_t time_ns, uint64_t affected, uint64_t work, uint64_t nodes,
           uint64_t height, const std::string& name, const std::string& phase) {
    time_sum_ += time_ns;
    if (reps_ == 0) {
      affected_ = affected;
      work_ = work;
      nodes_ = nodes;
      height_ = height;
    } else if (affected != affected_ || work != work_ || nodes != nodes_ ||
               height != height_) {
      throw CorrectnessFailure(
          "counter drift: benchmark '" + name + "' phase '" + phase +
          "' produced different trace counters on identical repetitions");
    }
    ++reps_;
  }

  Row row(const std::string& name, uint64_t n, uint64_t k, uint64_t threads,
          const std::string& phase) const {
    Row r;
    r.benchmark = name;
    r.n = n;
    r.k = k;
    r.threads = threads;
    r.phase = phase;
    r.time_ns = reps_ ? time_sum_ / reps_ : 0;
    r.affected_readers = affected_;
    r.reexec_work_units = work_;
    r.tree_nodes = nodes_;
    r.tree_height = height_;
    return r;
  }

 private:
  uint64_t reps_ = 0;
  uint64_t time_sum_ = 0;
  uint64_t affected_ = 0, work_ = 0, nodes_ = 0, height_ = 0;
};

inline double round4(double v) { return std::round(v * 1e4) / 1e4; }

// su needs a per-(phase, k) reference time and ws a per-benchmark baseline;
// both land here once all of a benchmark's rows exist.  Times are clamped
// to 1ns so a degenerate 0ns phase yields a huge ratio, never a NaN.
inline void finalize_ratios(std::vector<Row>& rows, size_t first,
                            uint64_t baseline_ns) {
  const double base = static_cast<double>(std::max<uint64_t>(baseline_ns, 1));
  std::map<std::pair<std::string, uint64_t>, double> ref;
  for (size_t i = first; i < rows.size(); ++i) {
    Row& r = rows[i];
    const double t = static_cast<double>(std::max<uint64_t>(r.time_ns, 1));
    auto [it, fresh] = ref.try_emplace({r.phase, r.k}, t);
    r.su = round4(it->second / t);
    r.ws = round4(base / t);
    r.total = round4(r.su * r.ws);
    (void)fresh;
  }
}

template <class App, class MakeApp>
void run_one(const Options& opt, const std::string& name, MakeApp make,
             std::vector<Row>& rows) {
  const uint64_t n = opt.n ? *opt.n : default_n(name, opt.paper_scale);
  const size_t first = rows.size();

  {
    RowAccum acc;
    for (uint64_t rep = 0; rep < opt.reps; ++rep) {
      App app = make(n);
      const uint64_t dt =
          timed_ns([&] { baseline_sink = app.baseline_pass(); });
      acc.add(dt, 0, 0, 0, 0, name, "baseline");
    }
    rows.push_back(acc.row(name, n, 0, 1, "baseline"));
  }
  const uint64_t baseline_ns = rows.back().time_ns;

  for (uint64_t t : opt.threads) {
    Scheduler sched(static_cast<int>(t));

    {
      RowAccum acc;
      for (uint64_t rep = 0; rep < opt.reps; ++rep) {
        App app = make(n);
        const uint64_t dt = timed_ns([&] { app.build(sched); });
        check_oracle(app, name, opt.inject_fault);
        const MetricsSample m = app.comp().metrics_sample();
        acc.add(dt, m.readers_reexecuted, m.reexec_work_units,
                app.comp().tree_nodes(), app.comp().tree_height(), name,
                "initial");
      }
      rows.push_back(acc.row(name, n, 0, t, "initial"));
    }

    for (uint64_t k : opt.ks) {
      RowAccum upd, gc;
      for (uint64_t rep = 0; rep < opt.reps; ++rep) {
        App app = make(n);
        app.build(sched);
        check_oracle(app, name, opt.inject_fault);
        app.mutate(k);
        const uint64_t dt = timed_ns([&] { propagate(app.comp()); });
        check_oracle(app, name, opt.inject_fault);
        const MetricsSample m = app.comp().metrics_sample();
        upd.add(dt, m.readers_reexecuted, m.reexec_work_units,
                app.comp().tree_nodes(), app.comp().tree_height(), name,
                "update");
        const uint64_t dg = timed_ns([&] { gc_collect(app.comp()); });
        gc.add(dg, 0, 0, app.comp().tree_nodes(), app.comp().tree_height(),
               name, "gc");
      }
      rows.push_back(upd.row(name, n, k, t, "update"));
      rows.push_back(gc.row(name, n, k, t, "gc"));
    }
  }

  finalize_ratios(rows, first, baseline_ns);
}

}  // namespace detail

// Runs every configured benchmark and returns the full grid of rows.
// Throws CorrectnessFailure on the first oracle mismatch or counter drift.
inline std::vector<Row> run_all(const Options& opt) {
  std::vector<Row> rows;
  for (const std::string& b : opt.benches) {
    const uint64_t g = opt.granularity ? *opt.granularity
                                       : default_granularity(b);
    if (b == "sum") {
      detail::run_one<apps::SumApp>(
          opt, b, [&](uint64_t n) { return apps::SumApp(n, opt.seed); }, rows);
    } else if (b == "spellcheck") {
      detail::run_one<apps::SpellcheckApp>(
          opt, b, [&](uint64_t n) { return apps::SpellcheckApp(n, opt.seed); },
          rows);
    } else if (b == "hash") {
      detail::run_one<apps::StringHashApp>(
          opt, b,
          [&](uint64_t n) { return apps::StringHashApp(n, opt.seed, g); },
          rows);
    } else if (b == "list") {
      detail::run_one<apps::ListContractionApp>(
          opt, b,
          [&](uint64_t n) { return apps::ListContractionApp(n, opt.seed); },
          rows);
    } else if (b == "tree") {
      detail::run_one<apps::TreeContractionApp>(
          opt, b,
          [&](uint64_t n) { return apps::TreeContractionApp(n, opt.seed); },
          rows);
    } else if (b == "filter") {
      detail::run_one<apps::FilterBstApp>(
          opt, b,
          [&](uint64_t n) { return apps::FilterBstApp(n, opt.seed, g); },
          rows);
    } else if (b == "readers") {
      detail::run_one<apps::ReaderStressApp>(
          opt, b,
          [&](uint64_t n) { return apps::ReaderStressApp(n, opt.seed, g); },
          rows);
    }
  }
  return rows;
}

}  // namespace sac::bench
