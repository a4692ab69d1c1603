#pragma once

// Concurrent reader registries for modifiables.
//
// A registry morphs through three states as readers attach:
//
//   empty  ->  inline (one reader, zero allocation)  ->  hash-keyed BST
//
// The state word is a tagged pointer: 0 for empty, an untagged reader
// pointer for inline, a tree root with its low bit set otherwise.  Keys are
// a bit-mixed image of the reader's node id, so trees are balanced in
// expectation no matter how ids are handed out.
//
// Concurrency protocol:
//   * insert is a lock-free CAS descent; a failed CAS re-reads the slot and
//     keeps descending, so concurrent distinct inserts all land.
//   * remove only flips a per-entry dead bit (monotone), which is safe to
//     run against concurrent inserts and traversals.
//   * for_each skips dead entries; it is never run concurrently with an
//     insert into the same set by a valid program (a read racing the write
//     of the same modifiable would be a determinacy race already).
//   * compact() physically drops dead entries and rebalances; the collector
//     calls it while the trace is quiescent.
//
// Deferred mode buffers insert/remove pairs and replays them in order on
// commit; traversals in between see the pre-batch membership.

#include <atomic>
#include <cstdint>
#include <mutex>
#include <utility>
#include <vector>

#include "sac/errors.hpp"

namespace sac {

namespace detail {

// splitmix64 finalizer; decorrelates sequential ids into uniform keys.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

template <class Reader>
class ReaderSetT {
 public:
  enum class State { Empty, Inline, Tree };

  ReaderSetT() = default;
  ReaderSetT(const ReaderSetT&) = delete;
  ReaderSetT& operator=(const ReaderSetT&) = delete;

  ~ReaderSetT() {
    free_tree();
    delete defer_.load(std::memory_order_relaxed);
  }

  void insert(Reader* r, uint64_t id) {
    if (Defer* d = defer_.load(std::memory_order_acquire)) {
      std::lock_guard<std::mutex> g(d->mu);
      d->ops.push_back({Op::Insert, r, id});
      return;
    }
    insert_now(r, id);
  }

  // allow_dead tolerates an entry that was already dead-marked earlier in
  // the same epoch (a block reader relinked away before its subtree died);
  // a plainly missing reader is a contract breach either way.
  void remove(Reader* r, uint64_t id, bool allow_dead = false) {
    if (Defer* d = defer_.load(std::memory_order_acquire)) {
      std::lock_guard<std::mutex> g(d->mu);
      d->ops.push_back({Op::Remove, r, id});
      return;
    }
    remove_now(r, id, allow_dead);
  }

  template <class F>
  void for_each(F&& f) const {
    uintptr_t s = state_.load(std::memory_order_acquire);
    if (s == 0) return;
    if (!(s & kTreeTag)) {
      f(reinterpret_cast<Reader*>(s));
      return;
    }
    // Iterative in-order walk; no recursion so huge fan-outs cannot blow
    // the stack of whichever strand happens to write.
    std::vector<Entry*> stack;
    Entry* e = untag(s);
    while (e != nullptr || !stack.empty()) {
      while (e != nullptr) {
        stack.push_back(e);
        e = e->kid[0].load(std::memory_order_acquire);
      }
      e = stack.back();
      stack.pop_back();
      if (!e->dead.load(std::memory_order_acquire)) f(e->node);
      e = e->kid[1].load(std::memory_order_acquire);
    }
  }

  bool contains(const Reader* r, uint64_t id) const {
    uintptr_t s = state_.load(std::memory_order_acquire);
    if (s == 0) return false;
    if (!(s & kTreeTag)) return reinterpret_cast<const Reader*>(s) == r;
    const uint64_t key = detail::mix64(id);
    const Entry* e = untag(s);
    while (e != nullptr) {
      if (key == e->key && id == e->id)
        return e->node == r && !e->dead.load(std::memory_order_acquire);
      e = e->kid[descend_dir(key, id, e)].load(std::memory_order_acquire);
    }
    return false;
  }

  void defer_begin() {
    Defer* d = new Defer();
    Defer* expected = nullptr;
    if (!defer_.compare_exchange_strong(expected, d,
                                        std::memory_order_acq_rel)) {
      delete d;
      throw ContractViolation("reader set is already in deferred mode");
    }
  }

  void defer_commit() {
    Defer* d = defer_.exchange(nullptr, std::memory_order_acq_rel);
    if (d == nullptr)
      throw ContractViolation("defer_commit without defer_begin");
    for (const PendingOp& op : d->ops) {
      if (op.op == Op::Insert)
        insert_now(op.reader, op.id);
      else
        remove_now(op.reader, op.id, false);
    }
    delete d;
  }

  // --- quiescent-only operations -----------------------------------------

  // Physically drops dead entries and rebuilds the survivors midpoint-
  // balanced (collapsing to inline/empty when few remain).
  void compact() {
    uintptr_t s = state_.load(std::memory_order_relaxed);
    if (!(s & kTreeTag)) return;  // empty and inline states carry no dead entries
    std::vector<std::pair<Reader*, uint64_t>> live;
    walk_entries(untag(s), [&](Entry* e) {
      if (!e->dead.load(std::memory_order_relaxed))
        live.push_back({e->node, e->id});
    });
    free_tree();
    if (live.empty()) {
      state_.store(0, std::memory_order_release);
    } else if (live.size() == 1) {
      state_.store(reinterpret_cast<uintptr_t>(live[0].first),
                   std::memory_order_release);
    } else {
      Entry* root = build_balanced(live, 0, live.size());
      state_.store(tag(root), std::memory_order_release);
    }
  }

  // --- probes (tests and audits) ------------------------------------------

  State state() const {
    uintptr_t s = state_.load(std::memory_order_acquire);
    if (s == 0) return State::Empty;
    return (s & kTreeTag) ? State::Tree : State::Inline;
  }

  size_t live_count() const {
    size_t n = 0;
    for_each([&](Reader*) { ++n; });
    return n;
  }

  // Longest root-to-entry chain, dead entries included (structure probe).
  size_t depth() const {
    uintptr_t s = state_.load(std::memory_order_acquire);
    if (s == 0) return 0;
    if (!(s & kTreeTag)) return 1;
    size_t best = 0;
    std::vector<std::pair<Entry*, size_t>> stack{{untag(s), 1}};
    while (!stack.empty()) {
      auto [e, d] = stack.back();
      stack.pop_back();
      best = d > best ? d : best;
      for (int i = 0; i < 2; ++i)
        if (Entry* k = e->kid[i].load(std::memory_order_acquire))
          stack.push_back({k, d + 1});
    }
    return best;
  }

 private:
  struct Entry {
    uint64_t key;
    uint64_t id;
    Reader* node;
    std::atomic<bool> dead{false};
    std::atomic<Entry*> kid[2]{nullptr, nullptr};

    Entry(uint64_t k, uint64_t i, Reader* n) : key(k), id(i), node(n) {}
  };

  enum class Op : uint8_t { Insert, Remove };
  struct PendingOp {
    Op op;
    Reader* reader;
    uint64_t id;
  };
  struct Defer {
    std::mutex mu;
    std::vector<PendingOp> ops;
  };

  static constexpr uintptr_t kTreeTag = 1;

  static Entry* untag(uintptr_t s) {
    return reinterpret_cast<Entry*>(s & ~kTreeTag);
  }
  static uintptr_t tag(Entry* e) {
    return reinterpret_cast<uintptr_t>(e) | kTreeTag;
  }

  // (key, id) lexicographic order; ids are unique so equal pairs mean the
  // same reader.
  static int descend_dir(uint64_t key, uint64_t id, const Entry* e) {
    if (key != e->key) return key < e->key ? 0 : 1;
    return id < e->id ? 0 : 1;
  }

  void insert_now(Reader* r, uint64_t id) {
    const uint64_t key = detail::mix64(id);
    uintptr_t s = state_.load(std::memory_order_acquire);
    for (;;) {
      if (s == 0) {
        if (state_.compare_exchange_weak(s, reinterpret_cast<uintptr_t>(r),
                                         std::memory_order_acq_rel,
                                         std::memory_order_acquire))
          return;
        continue;  // s reloaded
      }
      if (!(s & kTreeTag)) {
        Reader* cur = reinterpret_cast<Reader*>(s);
        if (cur == r)
          throw ContractViolation("reader inserted twice into one set");
        // Escalate: build a private two-entry tree, publish it with one CAS.
        Entry* mine = new Entry(key, id, r);
        Entry* theirs = new Entry(detail::mix64(cur->id), cur->id, cur);
        Entry* root = theirs;
        root->kid[descend_dir(key, id, root)].store(
            mine, std::memory_order_relaxed);
        if (state_.compare_exchange_weak(s, tag(root),
                                         std::memory_order_acq_rel,
                                         std::memory_order_acquire))
          return;
        delete mine;
        delete theirs;
        continue;
      }
      Entry* e = untag(s);
      Entry* fresh = nullptr;
      for (;;) {
        if (key == e->key && id == e->id) {
          delete fresh;
          if (e->node != r)
            // An id reused for a different reader object would mean node
            // ids were recycled while still referenced.
            throw ContractViolation("reader id collision in reader set");
          if (!e->dead.load(std::memory_order_acquire))
            throw ContractViolation("reader inserted twice into one set");
          // The reader left this set earlier (lazy removal keeps the entry)
          // and is linking back; revive the entry in place.
          e->dead.store(false, std::memory_order_release);
          return;
        }
        const int d = descend_dir(key, id, e);
        Entry* kid = e->kid[d].load(std::memory_order_acquire);
        if (kid == nullptr) {
          if (fresh == nullptr) fresh = new Entry(key, id, r);
          if (e->kid[d].compare_exchange_weak(kid, fresh,
                                              std::memory_order_acq_rel,
                                              std::memory_order_acquire))
            return;
          // kid reloaded by the failed CAS; fall through and keep descending.
        }
        if (kid != nullptr) e = kid;
      }
    }
  }

  void remove_now(Reader* r, uint64_t id, bool allow_dead) {
    uintptr_t s = state_.load(std::memory_order_acquire);
    if (s == reinterpret_cast<uintptr_t>(r)) {
      if (state_.compare_exchange_strong(s, 0, std::memory_order_acq_rel,
                                         std::memory_order_acquire))
        return;
      // Lost to a concurrent escalation; the reader now lives in the tree.
    }
    if (s == 0 || !(s & kTreeTag))
      throw ContractViolation("remove of a reader not in the set");
    const uint64_t key = detail::mix64(id);
    Entry* e = untag(s);
    while (e != nullptr) {
      if (key == e->key && id == e->id) {
        if (e->node != r)
          throw ContractViolation("reader id collision in reader set");
        if (e->dead.load(std::memory_order_acquire)) {
          if (allow_dead) return;
          throw ContractViolation("remove of a reader not in the set");
        }
        e->dead.store(true, std::memory_order_release);
        return;
      }
      e = e->kid[descend_dir(key, id, e)].load(std::memory_order_acquire);
    }
    throw ContractViolation("remove of a reader not in the set");
  }

  template <class F>
  static void walk_entries(Entry* root, F&& f) {
    std::vector<Entry*> stack;
    Entry* e = root;
    while (e != nullptr || !stack.empty()) {
      while (e != nullptr) {
        stack.push_back(e);
        e = e->kid[0].load(std::memory_order_relaxed);
      }
      e = stack.back();
      stack.pop_back();
      Entry* right = e->kid[1].load(std::memory_order_relaxed);
      f(e);
      e = right;
    }
  }

  Entry* build_balanced(const std::vector<std::pair<Reader*, uint64_t>>& live,
                        size_t lo, size_t hi) {
    if (lo >= hi) return nullptr;
    const size_t mid = lo + (hi - lo) / 2;
    auto [node, id] = live[mid];
    Entry* e = new Entry(detail::mix64(id), id, node);
    e->kid[0].store(build_balanced(live, lo, mid), std::memory_order_relaxed);
    e->kid[1].store(build_balanced(live, mid + 1, hi),
                    std::memory_order_relaxed);
    return e;
  }

  void free_tree() {
    uintptr_t s = state_.load(std::memory_order_relaxed);
    if (!(s & kTreeTag)) return;
    std::vector<Entry*> stack{untag(s)};
    while (!stack.empty()) {
      Entry* e = stack.back();
      stack.pop_back();
      for (int i = 0; i < 2; ++i)
        if (Entry* k = e->kid[i].load(std::memory_order_relaxed))
          stack.push_back(k);
      delete e;
    }
    state_.store(0, std::memory_order_relaxed);
  }

  std::atomic<uintptr_t> state_{0};
  std::atomic<Defer*> defer_{nullptr};
};

}  // namespace sac
