#pragma once

// Filter over a binary search tree: the output tree contains exactly the
// input elements satisfying a predicate (odd values), in search order.
//
// The input tree lives in modifiables: internal nodes expose a pivot value
// and two child handles, leaves hold up to `cap` sorted values in a single
// chunk cell.  One reader per node re-filters when that node's handle,
// pivot, or chunk changes; subtree results combine with join (pivot kept,
// O(1)) or join2 (pivot dropped: detach the left subtree's maximum and
// join around it, O(right-spine)).
//
// Output nodes are immutable and reference-counted, and handles compare by
// a content fingerprint.  Two consequences: rebuilding an identical
// subtree produces an equal handle, so nothing upstream re-executes; and
// a replaced subtree stays alive exactly as long as some live cell or
// recorded value still references it, so retired trace regions on the
// garbage pile can be reclaimed in any order.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "sac/apps/common.hpp"

namespace sac::apps {

using ChunkVals = std::vector<long>;

struct InNode;

struct InHandle {
  InNode* node = nullptr;
  bool leaf = false;
  bool operator==(const InHandle&) const = default;
};

struct InNode {
  Modifiable<long> value;       // pivot (internal nodes)
  Modifiable<InHandle> left, right;
  Modifiable<ChunkVals> chunk;  // sorted payload (leaves)
};

struct OutNode;

struct OutHandle {
  uint64_t key = 0;  // content fingerprint; 0 is the null handle
  std::shared_ptr<const OutNode> node;
  bool operator==(const OutHandle& o) const { return key == o.key; }
  explicit operator bool() const { return node != nullptr; }
};

struct OutNode {
  ChunkVals vals;  // nonempty, sorted; in-order = left ++ vals ++ right
  OutHandle left, right;
  long mn, mx;  // subtree bounds, for order assertions
};

inline OutHandle make_out(ChunkVals vals, OutHandle l, OutHandle r) {
  uint64_t key = detail::mix64(0x0f1beull);
  for (long v : vals) key = detail::mix64(key ^ static_cast<uint64_t>(v));
  key = detail::mix64(key ^ l.key);
  key = detail::mix64(key ^ r.key);
  if (key == 0) key = 1;
  auto n = std::make_shared<OutNode>();
  n->mn = l ? l.node->mn : vals.front();
  n->mx = r ? r.node->mx : vals.back();
  n->vals = std::move(vals);
  n->left = std::move(l);
  n->right = std::move(r);
  return OutHandle{key, std::move(n)};
}

// l < v <= r, non-strict on the right because duplicates sort right.
inline OutHandle bst_join(OutHandle l, long v, OutHandle r) {
  if ((l && l.node->mx > v) || (r && r.node->mn < v))
    throw ContractViolation("join arguments out of search order");
  return make_out(ChunkVals{v}, std::move(l), std::move(r));
}

// Splits off the maximum element; counts spine steps into *steps.
inline std::pair<OutHandle, long> detach_max(const OutHandle& h,
                                             size_t* steps) {
  ++*steps;
  const OutNode& n = *h.node;
  if (n.right) {
    auto [rest, m] = detach_max(n.right, steps);
    return {make_out(n.vals, n.left, std::move(rest)), m};
  }
  const long m = n.vals.back();
  if (n.vals.size() > 1)
    return {make_out(ChunkVals(n.vals.begin(), n.vals.end() - 1), n.left,
                     OutHandle{}),
            m};
  return {n.left, m};
}

inline OutHandle bst_join2(OutHandle l, OutHandle r, size_t* steps) {
  if (!l) return r;
  if (!r) return l;
  auto [rest, m] = detach_max(l, steps);
  return bst_join(std::move(rest), m, std::move(r));
}

class FilterBstApp {
 public:
  static constexpr const char* kName = "filter";

  FilterBstApp(size_t n, uint64_t seed, size_t cap = 64)
      : n_(n),
        cap_(cap == 0 ? 1 : cap),
        keys_(rng_stream(seed, 8)),
        root_model_(std::make_unique<MNode>()) {
    for (size_t i = 0; i < n_; ++i) model_insert(next_key());
    root_in_->write(materialize(root_model_.get()));
  }

  // Explicit initial keys, inserted in order; mutations still come from
  // the seed (drawn in [0, 4·max(n,1)) with n = keys.size()).
  FilterBstApp(const std::vector<long>& keys, uint64_t seed, size_t cap = 64)
      : n_(keys.size()),
        cap_(cap == 0 ? 1 : cap),
        keys_(rng_stream(seed, 8)),
        root_model_(std::make_unique<MNode>()) {
    for (long x : keys) model_insert(x);
    root_in_->write(materialize(root_model_.get()));
  }

  FilterBstApp(const FilterBstApp&) = delete;
  FilterBstApp& operator=(const FilterBstApp&) = delete;

  void build(Scheduler& sched) {
    comp_ = run([&] { filter_node(root_in_.get(), root_out_.get()); }, sched);
  }

  void mutate(size_t k) {
    Batch b;
    for (size_t i = 0; i < k; ++i) insert_into(next_key(), b);
    flush(b);
  }

  // Single insert as its own one-element batch (one write per epoch rule:
  // use mutate for several inserts between propagations).
  void insert(long x) {
    Batch b;
    insert_into(x, b);
    flush(b);
  }

  bool verify() const { return output() == oracle(); }

  uint64_t baseline_pass() const {
    uint64_t h = 0;
    for (long v : oracle()) h = digest_mix(h, static_cast<uint64_t>(v));
    return h;
  }
  uint64_t output_digest() const {
    uint64_t h = 0;
    for (long v : output()) h = digest_mix(h, static_cast<uint64_t>(v));
    return h;
  }

  std::vector<long> oracle() const {
    std::vector<long> out;
    model_walk(root_model_.get(), out);
    return out;
  }

  std::vector<long> output() const {
    std::vector<long> out;
    out_walk(root_out_->value(), out);
    return out;
  }

  size_t input_height() const { return model_height(root_model_.get()); }

  OutHandle out_root() const { return root_out_->value(); }

  Computation& comp() { return comp_; }

 private:
  struct MNode {
    bool leaf = true;
    long pivot = 0;
    ChunkVals vals;
    std::unique_ptr<MNode> l, r;
    InNode* live = nullptr;
  };

  // Dirty sets of one update batch.  Handles are (parent, side) pairs;
  // parent == nullptr means the root handle itself.
  struct Batch {
    std::set<MNode*> leaves;
    std::set<std::pair<MNode*, int>> handles;
  };

  void insert_into(long x, Batch& b) {
    MNode* parent = nullptr;
    int side = 0;
    MNode* m = root_model_.get();
    while (!m->leaf) {
      parent = m;
      side = x < m->pivot ? 0 : 1;
      auto& kid = side == 0 ? m->l : m->r;
      if (kid == nullptr) {
        kid = std::make_unique<MNode>();
        if (m->live != nullptr) b.handles.insert({m, side});
      }
      m = kid.get();
    }
    m->vals.insert(std::upper_bound(m->vals.begin(), m->vals.end(), x), x);
    if (m->vals.size() > cap_) {
      const bool was_live = m->live != nullptr;
      split(*m);  // old input twin (if any) is retired by propagation
      b.leaves.erase(m);
      if (was_live) {
        if (parent == nullptr)
          b.handles.insert({nullptr, 0});
        else if (parent->live != nullptr)
          b.handles.insert({parent, side});
        // A parent created this same batch has no live twin yet; its
        // handles are written at materialization from the final model.
      }
    } else if (m->live != nullptr) {
      b.leaves.insert(m);
    }
  }

  // Every touched modifiable gets exactly one write.
  void flush(const Batch& b) {
    for (MNode* m : b.leaves) write(&m->live->chunk, m->vals);
    for (auto [parent, side] : b.handles) {
      MNode* child = parent == nullptr
                         ? root_model_.get()
                         : (side == 0 ? parent->l.get() : parent->r.get());
      const InHandle h = materialize(child);
      if (parent == nullptr)
        write(root_in_.get(), h);
      else
        write(side == 0 ? &parent->live->left : &parent->live->right, h);
    }
  }

  long next_key() {
    return static_cast<long>(draw_below(keys_, 4 * std::max<size_t>(n_, 1)));
  }

  void model_insert(long x) {
    MNode* m = root_model_.get();
    while (!m->leaf) {
      auto& kid = x < m->pivot ? m->l : m->r;
      if (kid == nullptr) kid = std::make_unique<MNode>();
      m = kid.get();
    }
    m->vals.insert(std::upper_bound(m->vals.begin(), m->vals.end(), x), x);
    if (m->vals.size() > cap_) split(*m);
  }

  // Leaf becomes internal in place: median promoted, halves to new leaves.
  void split(MNode& m) {
    const size_t mid = m.vals.size() / 2;
    m.pivot = m.vals[mid];
    if (mid > 0) {
      m.l = std::make_unique<MNode>();
      m.l->vals.assign(m.vals.begin(), m.vals.begin() + mid);
    }
    if (mid + 1 < m.vals.size()) {
      m.r = std::make_unique<MNode>();
      m.r->vals.assign(m.vals.begin() + mid + 1, m.vals.end());
    }
    m.vals.clear();
    m.leaf = false;
    m.live = nullptr;
  }

  // Builds input cells for a model subtree; reuses live twins untouched
  // this batch, creates fresh nodes (writing every field once) otherwise.
  InHandle materialize(MNode* m) {
    if (m == nullptr) return InHandle{};
    if (m->live != nullptr) return InHandle{m->live, m->leaf};
    InNode* node = &pool_.emplace_back();
    m->live = node;
    if (m->leaf) {
      node->chunk.write(m->vals);
    } else {
      node->value.write(m->pivot);
      node->left.write(materialize(m->l.get()));
      node->right.write(materialize(m->r.get()));
    }
    return InHandle{node, m->leaf};
  }

  static bool keep(long v) { return (v & 1) != 0; }

  void filter_node(Modifiable<InHandle>* src, Modifiable<OutHandle>* dest) {
    read(src, [this, dest](const InHandle& h) {
      if (h.node == nullptr) {
        write(dest, OutHandle{});
        return;
      }
      if (h.leaf) {
        read(&h.node->chunk, [dest](const ChunkVals& vs) {
          work(vs.size());
          ChunkVals oddvals;
          for (long v : vs)
            if (keep(v)) oddvals.push_back(v);
          write(dest, oddvals.empty()
                          ? OutHandle{}
                          : make_out(std::move(oddvals), {}, {}));
        });
        return;
      }
      auto* dl = alloc<OutHandle>();
      auto* dr = alloc<OutHandle>();
      par([this, h, dl] { filter_node(&h.node->left, dl); },
          [this, h, dr] { filter_node(&h.node->right, dr); });
      read(std::tuple{&h.node->value, dl, dr},
           [dest](long v, const OutHandle& l, const OutHandle& r) {
             size_t steps = 0;
             OutHandle out = keep(v) ? bst_join(l, v, r)
                                     : bst_join2(l, r, &steps);
             work(1 + steps);
             write(dest, std::move(out));
           });
    });
  }

  void model_walk(const MNode* m, std::vector<long>& out) const {
    if (m == nullptr) return;
    if (m->leaf) {
      for (long v : m->vals)
        if (keep(v)) out.push_back(v);
      return;
    }
    model_walk(m->l.get(), out);
    if (keep(m->pivot)) out.push_back(m->pivot);
    model_walk(m->r.get(), out);
  }

  static void out_walk(const OutHandle& h, std::vector<long>& out) {
    if (!h) return;
    out_walk(h.node->left, out);
    out.insert(out.end(), h.node->vals.begin(), h.node->vals.end());
    out_walk(h.node->right, out);
  }

  static size_t model_height(const MNode* m) {
    if (m == nullptr) return 0;
    if (m->leaf) return 1;
    return 1 + std::max(model_height(m->l.get()), model_height(m->r.get()));
  }

  size_t n_, cap_;
  std::mt19937_64 keys_;
  std::unique_ptr<MNode> root_model_;
  std::deque<InNode> pool_;
  ModPtr<InHandle> root_in_ = make_input<InHandle>();
  ModPtr<OutHandle> root_out_ = make_input<OutHandle>();
  Computation comp_;
};

}  // namespace sac::apps
