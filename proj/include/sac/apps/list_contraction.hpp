#pragma once

// List contraction: maintains the sum of every maximal segment of a
// doubly-linked list under cut and rejoin updates.
//
// Elements are packed 30 to a chunk; each chunk cell carries its element's
// successor, predecessor, and accumulated value, with a 32-bit liveness
// bitset per chunk.  Contraction proceeds in a fixed ladder of rounds: in
// round r an element dies when it has a predecessor, its round-r coin is
// heads, and its predecessor's coin is tails (no two adjacent elements die
// together), and a dying element's accumulated value merges into its
// predecessor.  One block reader per (round, chunk) reads the chunk and
// whichever neighbor chunks its live cells' links point into, and writes
// the chunk's next-round image — so a changed link re-executes only the
// readers along its contraction trail.
//
// All coins are pre-generated from the seed.  The ladder height is fixed
// at build time; segments that outlive it (possible but unlikely) are
// finished exactly by the final sweep, which walks any residual chain.
// Heads report their segment sums; every other element reports -1.

#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "sac/apps/common.hpp"

namespace sac::apps {

class ListContractionApp {
 public:
  static constexpr const char* kName = "list";
  static constexpr size_t kChunk = 30;

  struct Cell {
    int32_t succ = -1, pred = -1;
    int64_t acc = 0;
    bool operator==(const Cell&) const = default;
  };
  struct Chunk {
    uint32_t alive = 0;
    std::array<Cell, kChunk> cell{};
    bool operator==(const Chunk&) const = default;
  };
  struct AnsChunk {
    std::array<int64_t, kChunk> ans{};
    bool operator==(const AnsChunk&) const = default;
  };

  ListContractionApp(size_t n, uint64_t seed)
      : n_(n),
        nc_((n + kChunk - 1) / kChunk),
        rounds_(ladder_height(n)),
        vals_(rng_stream(seed, 9)),
        coins_rng_(rng_stream(seed, 10)),
        ops_(rng_stream(seed, 11)) {
    val_.resize(n_);
    for (size_t i = 0; i < n_; ++i)
      val_[i] = 1 + static_cast<int64_t>(draw_below(vals_, 1000));
    init_chain();
  }

  // Explicit initial values (one chain element each); mutations still
  // come from the seed.
  ListContractionApp(std::vector<int64_t> values, uint64_t seed)
      : n_(values.size()),
        nc_((n_ + kChunk - 1) / kChunk),
        rounds_(ladder_height(n_)),
        vals_(rng_stream(seed, 9)),
        coins_rng_(rng_stream(seed, 10)),
        ops_(rng_stream(seed, 11)),
        val_(std::move(values)) {
    init_chain();
  }

  ListContractionApp(const ListContractionApp&) = delete;
  ListContractionApp& operator=(const ListContractionApp&) = delete;

  void build(Scheduler& sched) {
    comp_ = run(
        [&] {
          layers_.assign(rounds_ + 1, {});
          layers_[0].reserve(nc_);
          for (size_t c = 0; c < nc_; ++c) layers_[0].push_back(in_[c]);
          for (size_t r = 1; r <= rounds_; ++r)
            layers_[r] = alloc_array<Chunk>(nc_);
          ans_ = alloc_array<AnsChunk>(nc_);
          for (size_t r = 0; r < rounds_; ++r)
            parfor(0, nc_, [this, r](size_t c) { step_reader(r, c); });
          parfor(0, nc_, [this](size_t c) { sweep_reader(c); });
        },
        sched);
  }

  // k cut-or-rejoin operations; each touched input chunk is written once.
  void mutate(size_t k) {
    std::set<size_t> touched;
    for (size_t i = 0; i < k; ++i) {
      if (ops_() % 2 == 0) {
        if (!do_cut(touched)) do_rejoin(touched);
      } else {
        if (!do_rejoin(touched)) do_cut(touched);
      }
    }
    for (size_t c : touched) write(in_[c], chunk_value(c));
  }

  // Severs the link leaving `i`.
  void cut(size_t i, std::set<size_t>& touched) {
    const int32_t j = succ_model_.at(i);
    if (j < 0) throw std::invalid_argument("cut of an unlinked element");
    succ_model_[i] = -1;
    pred_model_[j] = -1;
    touched.insert(i / kChunk);
    touched.insert(static_cast<size_t>(j) / kChunk);
  }

  // Links tail t to head h; both ends must be free and in different
  // segments.
  void rejoin(size_t t, size_t h, std::set<size_t>& touched) {
    if (succ_model_.at(t) != -1 || pred_model_.at(h) != -1)
      throw std::invalid_argument("rejoin would link an element twice");
    for (int32_t w = static_cast<int32_t>(t); w != -1; w = pred_model_[w])
      if (w == static_cast<int32_t>(h))
        throw std::invalid_argument("rejoin would close a cycle");
    succ_model_[t] = static_cast<int32_t>(h);
    pred_model_[h] = static_cast<int32_t>(t);
    touched.insert(t / kChunk);
    touched.insert(h / kChunk);
  }

  bool verify() const {
    const std::vector<int64_t> want = oracle_sums();
    for (size_t c = 0; c < nc_; ++c) {
      const AnsChunk a = ans_[c]->value();
      for (size_t s = 0; s < kChunk; ++s) {
        const size_t gid = c * kChunk + s;
        if (gid >= n_) break;
        if (a.ans[s] != want[gid]) return false;
      }
    }
    return true;
  }

  uint64_t baseline_pass() const {
    uint64_t h = 0;
    for (int64_t v : oracle_sums()) h = digest_mix(h, static_cast<uint64_t>(v));
    return h;
  }
  uint64_t output_digest() const {
    uint64_t h = 0;
    for (size_t c = 0; c < nc_; ++c) {
      const AnsChunk a = ans_[c]->value();
      for (size_t s = 0; s < kChunk && c * kChunk + s < n_; ++s)
        h = digest_mix(h, static_cast<uint64_t>(a.ans[s]));
    }
    return h;
  }

  // Per-element expected answers: segment sum at heads, -1 elsewhere.
  std::vector<int64_t> oracle_sums() const {
    std::vector<int64_t> out(n_, -1);
    for (size_t i = 0; i < n_; ++i) {
      if (pred_model_[i] != -1) continue;
      int64_t sum = 0;
      for (int32_t w = static_cast<int32_t>(i); w != -1; w = succ_model_[w])
        sum += val_[w];
      out[i] = sum;
    }
    return out;
  }

  // Writes back the input chunks touched by direct cut/rejoin calls.
  void flush(const std::set<size_t>& touched) {
    for (size_t c : touched) write(in_[c], chunk_value(c));
  }

  int32_t succ_of(size_t i) const { return succ_model_.at(i); }
  size_t rounds() const { return rounds_; }
  Computation& comp() { return comp_; }

 private:
  static size_t ladder_height(size_t n) {
    if (n <= 1) return 0;
    const double lg = std::log2(static_cast<double>(n));
    return static_cast<size_t>(std::ceil(2.5 * lg)) + 8;
  }

  // One chain 0 → … → n−1, per-round coins, and the initial chunk cells.
  void init_chain() {
    succ_model_.resize(n_);
    pred_model_.resize(n_);
    for (size_t i = 0; i < n_; ++i) {
      succ_model_[i] = i + 1 < n_ ? static_cast<int32_t>(i + 1) : -1;
      pred_model_[i] = i > 0 ? static_cast<int32_t>(i - 1) : -1;
    }
    const size_t words = (n_ + 63) / 64;
    coins_.resize(rounds_);
    for (auto& round : coins_) {
      round.resize(words);
      for (uint64_t& w : round) w = coins_rng_();
    }
    in_.resize(nc_);
    for (size_t c = 0; c < nc_; ++c) in_[c]->write(chunk_value(c));
  }

  bool coin(size_t r, size_t gid) const {
    return (coins_[r][gid >> 6] >> (gid & 63)) & 1;
  }
  // Independent-set rule: heads coin over a tails predecessor, heads of
  // segments never die.
  bool dies(size_t r, const Cell& c, size_t gid) const {
    return c.pred != -1 && coin(r, gid) && !coin(r, c.pred);
  }

  Chunk chunk_value(size_t c) const {
    Chunk ch{};
    for (size_t s = 0; s < kChunk; ++s) {
      const size_t gid = c * kChunk + s;
      if (gid >= n_) break;
      ch.alive |= 1u << s;
      ch.cell[s] = Cell{succ_model_[gid], pred_model_[gid], val_[gid]};
    }
    return ch;
  }

  void step_reader(size_t r, size_t c) {
    read_block([this, r, c](Block& b) {
      const Chunk& cur = b.get(layers_[r][c]);
      auto cell_at = [&](int32_t gid) -> const Cell& {
        return b.get(layers_[r][gid / kChunk]).cell[gid % kChunk];
      };
      Chunk out{};
      size_t ticks = 0;
      for (size_t s = 0; s < kChunk; ++s) {
        if (!(cur.alive & (1u << s))) continue;
        const size_t gid = c * kChunk + s;
        const Cell& v = cur.cell[s];
        ++ticks;
        if (dies(r, v, gid)) continue;
        Cell nv = v;
        if (nv.succ != -1) {
          const Cell& sc = cell_at(nv.succ);
          if (dies(r, sc, nv.succ)) {
            nv.acc += sc.acc;
            nv.succ = sc.succ;
          }
        }
        if (nv.pred != -1) {
          const Cell& pc = cell_at(nv.pred);
          if (dies(r, pc, nv.pred)) nv.pred = pc.pred;
        }
        out.alive |= 1u << s;
        out.cell[s] = nv;
      }
      work(ticks);
      write(layers_[r + 1][c], out);
    });
  }

  void sweep_reader(size_t c) {
    read_block([this, c](Block& b) {
      const Chunk& last = b.get(layers_[rounds_][c]);
      AnsChunk a{};
      a.ans.fill(-1);
      size_t ticks = 0;
      for (size_t s = 0; s < kChunk; ++s) {
        if (!(last.alive & (1u << s))) continue;
        const Cell& v = last.cell[s];
        if (v.pred != -1) continue;  // not a head
        int64_t sum = v.acc;
        ++ticks;
        for (int32_t w = v.succ; w != -1;) {
          const Cell& wc =
              b.get(layers_[rounds_][w / kChunk]).cell[w % kChunk];
          sum += wc.acc;
          w = wc.succ;
          ++ticks;
        }
        a.ans[s] = sum;
      }
      work(ticks);
      write(ans_[c], a);
    });
  }

  bool do_cut(std::set<size_t>& touched) {
    for (size_t tries = 0; tries < n_; ++tries) {
      const size_t i = draw_below(ops_, n_);
      if (succ_model_[i] != -1) {
        cut(i, touched);
        return true;
      }
    }
    return false;
  }

  bool do_rejoin(std::set<size_t>& touched) {
    for (size_t tries = 0; tries < 32; ++tries) {
      size_t t = draw_below(ops_, n_);
      while (succ_model_[t] != -1) t = (t + 1) % n_;  // next free tail
      size_t h = draw_below(ops_, n_);
      while (pred_model_[h] != -1) h = (h + 1) % n_;  // next free head
      int32_t head_of_t = static_cast<int32_t>(t);
      while (pred_model_[head_of_t] != -1) head_of_t = pred_model_[head_of_t];
      if (head_of_t == static_cast<int32_t>(h)) continue;  // same segment
      rejoin(t, h, touched);
      return true;
    }
    return false;
  }

  size_t n_, nc_, rounds_;
  std::mt19937_64 vals_, coins_rng_, ops_;
  std::vector<int64_t> val_;
  std::vector<int32_t> succ_model_, pred_model_;
  std::vector<std::vector<uint64_t>> coins_;
  InputArray<Chunk> in_;
  std::vector<std::vector<Modifiable<Chunk>*>> layers_;
  std::vector<Modifiable<AnsChunk>*> ans_;
  Computation comp_;
};

}  // namespace sac::apps
