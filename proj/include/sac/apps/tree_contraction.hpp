#pragma once

// Tree contraction over a rooted tree of max degree 3 (a parent and up to
// two children per vertex), maintaining for every vertex the weight of the
// heaviest edge on its path to the root.
//
// Contraction runs in a fixed ladder of rounds with two removal rules,
// decided locally and identically by every reader that looks at a vertex:
//
//   rake      — a leaf with a parent is removed;
//   compress  — a vertex with a parent and exactly one child is removed
//               when its coin is heads, its parent's and child's coins are
//               tails, and the child is not itself raking; its child links
//               to its parent and the two edge weights merge by max.
//
// A removed vertex's cell keeps its at-removal parent and edge weight plus
// the round it died, which is exactly what the expansion pass needs: the
// answer ladder walks the rounds backwards, so a vertex removed in round r
// computes  ans = max(w_at_removal, ans(parent_at_removal))  where the
// parent, having survived round r, already has its answer one level up.
// Survivors of the whole ladder (normally just the root) resolve by
// walking their residual parent chain exactly.
//
// Vertices pack 30 to a chunk as in list contraction; readers are block
// readers over the chunks their cells' links reach into.

#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "sac/apps/common.hpp"

namespace sac::apps {

class TreeContractionApp {
 public:
  static constexpr const char* kName = "tree";
  static constexpr size_t kChunk = 30;

  struct Cell {
    int32_t parent = -1, kid0 = -1, kid1 = -1;
    int64_t w = 0;            // (contracted) edge weight to parent
    int32_t died_round = -1;  // set when removed; the removal record
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

  TreeContractionApp(size_t n, uint64_t seed)
      : n_(n),
        nc_((n + kChunk - 1) / kChunk),
        rounds_(ladder_height(n)),
        build_rng_(rng_stream(seed, 12)),
        coins_rng_(rng_stream(seed, 13)),
        ops_(rng_stream(seed, 14)) {
    if (n_ == 0) throw std::invalid_argument("tree needs at least the root");
    parent_model_.assign(n_, -1);
    weight_model_.assign(n_, 0);
    kid_count_.assign(n_, 0);
    for (size_t v = 1; v < n_; ++v) {
      size_t p = draw_below(build_rng_, v);
      while (kid_count_[p] == 2) p = draw_below(build_rng_, v);
      parent_model_[v] = static_cast<int32_t>(p);
      weight_model_[v] = draw_weight(build_rng_);
      ++kid_count_[p];
    }
    init_coins_and_chunks();
  }

  // Explicit shape: parents[0] must be -1 (the root), every other vertex's
  // parent an earlier index; weights[v] is the edge weight to parents[v].
  // Mutations still come from the seed.
  TreeContractionApp(std::vector<int32_t> parents, std::vector<int64_t> weights,
                     uint64_t seed)
      : n_(parents.size()),
        nc_((n_ + kChunk - 1) / kChunk),
        rounds_(ladder_height(n_)),
        build_rng_(rng_stream(seed, 12)),
        coins_rng_(rng_stream(seed, 13)),
        ops_(rng_stream(seed, 14)),
        parent_model_(std::move(parents)),
        weight_model_(std::move(weights)) {
    if (n_ == 0 || parent_model_[0] != -1 || weight_model_.size() != n_)
      throw std::invalid_argument("malformed explicit tree");
    kid_count_.assign(n_, 0);
    for (size_t v = 1; v < n_; ++v) {
      const int32_t p = parent_model_[v];
      if (p < 0 || static_cast<size_t>(p) >= v)
        throw std::invalid_argument("malformed explicit tree");
      if (++kid_count_[p] > 2)
        throw std::invalid_argument("explicit tree exceeds the degree bound");
    }
    init_coins_and_chunks();
  }

  TreeContractionApp(const TreeContractionApp&) = delete;
  TreeContractionApp& operator=(const TreeContractionApp&) = delete;

  void build(Scheduler& sched) {
    comp_ = run(
        [&] {
          layers_.assign(rounds_ + 1, {});
          layers_[0].reserve(nc_);
          for (size_t c = 0; c < nc_; ++c) layers_[0].push_back(in_[c]);
          for (size_t r = 1; r <= rounds_; ++r)
            layers_[r] = alloc_array<Chunk>(nc_);
          alayers_.assign(rounds_ + 1, {});
          for (size_t r = 0; r <= rounds_; ++r)
            alayers_[r] = alloc_array<AnsChunk>(nc_);
          for (size_t r = 0; r < rounds_; ++r)
            parfor(0, nc_, [this, r](size_t c) { step_reader(r, c); });
          parfor(0, nc_, [this](size_t c) { residual_reader(c); });
          for (size_t r = rounds_; r-- > 0;)
            parfor(0, nc_, [this, r](size_t c) { expand_reader(r, c); });
        },
        sched);
  }

  // k edge replacements: detach a random non-root vertex and re-hang it
  // under a vertex with spare child capacity outside its own subtree.
  void mutate(size_t k) {
    std::set<size_t> touched;
    for (size_t i = 0; i < k && n_ > 1; ++i) {
      const size_t v = 1 + draw_below(ops_, n_ - 1);
      bool found = false;
      size_t p = 0;
      for (size_t tries = 0; tries < 4 * n_ && !found; ++tries) {
        p = draw_below(ops_, n_);
        found = p != v && !in_subtree(p, v) &&
                (kid_count_[p] < 2 ||
                 parent_model_[v] == static_cast<int32_t>(p));
      }
      if (!found) continue;  // no legal slot sampled, skip this op
      relink(v, p, draw_weight(ops_), touched);
    }
    for (size_t c : touched) write(in_[c], chunk_value(c));
  }

  // Moves v's parent edge to (v → p) with the given weight.
  void relink(size_t v, size_t p, int64_t w, std::set<size_t>& touched) {
    if (v == 0 || v >= n_ || p >= n_)
      throw std::invalid_argument("relink endpoints out of range");
    if (p == v || in_subtree(p, v))
      throw std::invalid_argument("relink would close a cycle");
    const int32_t old_p = parent_model_[v];
    if (static_cast<size_t>(old_p) != p && kid_count_[p] == 2)
      throw std::invalid_argument("relink exceeds the degree bound");
    --kid_count_[old_p];
    parent_model_[v] = static_cast<int32_t>(p);
    weight_model_[v] = w;
    ++kid_count_[p];
    touched.insert(v / kChunk);
    touched.insert(static_cast<size_t>(old_p) / kChunk);
    touched.insert(p / kChunk);
  }

  void flush(const std::set<size_t>& touched) {
    for (size_t c : touched) write(in_[c], chunk_value(c));
  }

  bool verify() const {
    const std::vector<int64_t> want = oracle_answers();
    for (size_t c = 0; c < nc_; ++c) {
      const AnsChunk a = alayers_[0][c]->value();
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
    for (int64_t v : oracle_answers())
      h = digest_mix(h, static_cast<uint64_t>(v));
    return h;
  }
  uint64_t output_digest() const {
    uint64_t h = 0;
    for (size_t c = 0; c < nc_; ++c) {
      const AnsChunk a = alayers_[0][c]->value();
      for (size_t s = 0; s < kChunk && c * kChunk + s < n_; ++s)
        h = digest_mix(h, static_cast<uint64_t>(a.ans[s]));
    }
    return h;
  }

  // Heaviest edge weight on each vertex's path to the root (root: 0),
  // memoized top-down.
  std::vector<int64_t> oracle_answers() const {
    std::vector<int64_t> ans(n_, -1);
    ans[0] = 0;
    for (size_t v = 1; v < n_; ++v) resolve(v, ans);
    return ans;
  }

  int64_t answer_of(size_t v) const {
    return alayers_[0][v / kChunk]->value().ans[v % kChunk];
  }

  size_t rounds() const { return rounds_; }
  Computation& comp() { return comp_; }

 private:
  static size_t ladder_height(size_t n) {
    if (n <= 1) return 0;
    const double lg = std::log2(static_cast<double>(n));
    return static_cast<size_t>(std::ceil(3.0 * lg)) + 8;
  }

  void init_coins_and_chunks() {
    const size_t words = (n_ + 63) / 64;
    coins_.resize(rounds_);
    for (auto& round : coins_) {
      round.resize(words);
      for (uint64_t& w : round) w = coins_rng_();
    }
    in_.resize(nc_);
    for (size_t c = 0; c < nc_; ++c) in_[c]->write(chunk_value(c));
  }

  static int64_t draw_weight(std::mt19937_64& rng) {
    return 1 + static_cast<int64_t>(draw_below(rng, 1000000));
  }

  bool in_subtree(size_t x, size_t top) const {
    for (int32_t w = static_cast<int32_t>(x); w != -1; w = parent_model_[w])
      if (w == static_cast<int32_t>(top)) return true;
    return false;
  }

  void resolve(size_t v, std::vector<int64_t>& ans) const {
    if (ans[v] != -1) return;
    const size_t p = static_cast<size_t>(parent_model_[v]);
    resolve(p, ans);
    ans[v] = std::max(weight_model_[v], ans[p]);
  }

  bool coin(size_t r, size_t gid) const {
    return (coins_[r][gid >> 6] >> (gid & 63)) & 1;
  }

  static int nkids(const Cell& c) {
    return (c.kid0 != -1) + (c.kid1 != -1);
  }
  static int32_t only_kid(const Cell& c) {
    return c.kid0 != -1 ? c.kid0 : c.kid1;
  }

  Chunk chunk_value(size_t c) const {
    Chunk ch{};
    for (size_t s = 0; s < kChunk; ++s) {
      const size_t gid = c * kChunk + s;
      if (gid >= n_) break;
      ch.alive |= 1u << s;
      ch.cell[s].parent = parent_model_[gid];
      ch.cell[s].w = weight_model_[gid];
    }
    // Children of this chunk's vertices, slots filled in vertex order.
    for (size_t v = 0; v < n_; ++v) {
      const int32_t p = parent_model_[v];
      if (p < 0) continue;
      const size_t pc = static_cast<size_t>(p) / kChunk;
      if (pc != c) continue;
      Cell& cell = ch.cell[static_cast<size_t>(p) % kChunk];
      (cell.kid0 == -1 ? cell.kid0 : cell.kid1) = static_cast<int32_t>(v);
    }
    return ch;
  }

  void step_reader(size_t r, size_t c) {
    read_block([this, r, c](Block& b) {
      const Chunk& cur = b.get(layers_[r][c]);
      auto cell_at = [&](int32_t gid) -> const Cell& {
        return b.get(layers_[r][gid / kChunk]).cell[gid % kChunk];
      };
      // Removal rules on the layer-r state; every reader that can see a
      // vertex's cell evaluates these identically.
      auto dies_rake = [](const Cell& x) {
        return x.parent != -1 && nkids(x) == 0;
      };
      auto dies_comp = [&](const Cell& x, size_t gid) {
        if (x.parent == -1 || nkids(x) != 1) return false;
        const int32_t kid = only_kid(x);
        if (dies_rake(cell_at(kid))) return false;
        return coin(r, gid) && !coin(r, static_cast<size_t>(x.parent)) &&
               !coin(r, static_cast<size_t>(kid));
      };
      Chunk out{};
      size_t ticks = 0;
      for (size_t s = 0; s < kChunk; ++s) {
        const size_t gid = c * kChunk + s;
        if (!(cur.alive & (1u << s))) {
          out.cell[s] = cur.cell[s];  // dead: removal record rides along
          continue;
        }
        const Cell& v = cur.cell[s];
        ++ticks;
        Cell nv = v;
        nv.died_round = -1;
        if (dies_rake(v) || dies_comp(v, gid)) {
          nv.kid0 = nv.kid1 = -1;
          nv.died_round = static_cast<int32_t>(r);
          out.cell[s] = nv;  // alive bit stays clear: the removal record
          continue;
        }
        if (nv.parent != -1) {
          const Cell& pc = cell_at(nv.parent);
          if (dies_comp(pc, static_cast<size_t>(nv.parent))) {
            nv.w = std::max(nv.w, pc.w);
            nv.parent = pc.parent;
          }
        }
        int32_t kids[2] = {nv.kid0, nv.kid1};
        nv.kid0 = nv.kid1 = -1;
        for (int32_t kid : kids) {
          if (kid == -1) continue;
          const Cell& kc = cell_at(kid);
          int32_t keep = kid;
          if (dies_rake(kc))
            keep = -1;
          else if (dies_comp(kc, static_cast<size_t>(kid)))
            keep = only_kid(kc);
          if (keep != -1) (nv.kid0 == -1 ? nv.kid0 : nv.kid1) = keep;
        }
        out.alive |= 1u << s;
        out.cell[s] = nv;
      }
      work(ticks);
      write(layers_[r + 1][c], out);
    });
  }

  // Ladder survivors (normally just the root) walk their residual parent
  // chain in the last layer.
  void residual_reader(size_t c) {
    read_block([this, c](Block& b) {
      const Chunk& last = b.get(layers_[rounds_][c]);
      AnsChunk a{};
      a.ans.fill(-1);
      size_t ticks = 0;
      for (size_t s = 0; s < kChunk; ++s) {
        if (!(last.alive & (1u << s))) continue;
        const Cell& v = last.cell[s];
        int64_t best = 0;
        ++ticks;
        for (const Cell* w = &v; w->parent != -1;) {
          best = std::max(best, w->w);
          w = &b.get(layers_[rounds_][w->parent / kChunk])
                   .cell[w->parent % kChunk];
          ++ticks;
        }
        a.ans[s] = best;
      }
      work(ticks);
      write(alayers_[rounds_][c], a);
    });
  }

  // Backward round r: survivors copy their answer down; vertices removed
  // in round r resolve against their at-removal parent's answer.
  void expand_reader(size_t r, size_t c) {
    read_block([this, r, c](Block& b) {
      const Chunk& next = b.get(layers_[r + 1][c]);
      const AnsChunk& down = b.get(alayers_[r + 1][c]);
      AnsChunk a{};
      a.ans.fill(-1);
      size_t ticks = 0;
      for (size_t s = 0; s < kChunk; ++s) {
        const size_t gid = c * kChunk + s;
        if (gid >= n_) break;
        const Cell& v = next.cell[s];
        if (next.alive & (1u << s)) {
          a.ans[s] = down.ans[s];
          ++ticks;
        } else if (v.died_round == static_cast<int32_t>(r)) {
          const AnsChunk& pa =
              b.get(alayers_[r + 1][static_cast<size_t>(v.parent) / kChunk]);
          a.ans[s] =
              std::max(v.w, pa.ans[static_cast<size_t>(v.parent) % kChunk]);
          ++ticks;
        }
      }
      work(ticks);
      write(alayers_[r][c], a);
    });
  }

  size_t n_, nc_, rounds_;
  std::mt19937_64 build_rng_, coins_rng_, ops_;
  std::vector<int32_t> parent_model_;
  std::vector<int64_t> weight_model_;
  std::vector<int> kid_count_;
  std::vector<std::vector<uint64_t>> coins_;
  InputArray<Chunk> in_;
  std::vector<std::vector<Modifiable<Chunk>*>> layers_;
  std::vector<std::vector<Modifiable<AnsChunk>*>> alayers_;
  Computation comp_;
};

}  // namespace sac::apps
