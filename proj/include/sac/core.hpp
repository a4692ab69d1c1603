#pragma once

// The trace data model: series-parallel dependency trees with read nodes
// (RSP trees), write-once-per-epoch modifiables, and the snapshots of read
// values that make traces diffable.
//
// Memory-ordering contract, in one place so the rest of the code can stay
// quiet about it:
//   * `marked` and `affected` are monotone within an epoch.  Writers set
//     `affected` with a release store and then mark ancestors with acq_rel
//     exchanges; the propagation traversal reads both with acquire, so a
//     mark seen implies the affected flag below it is seen too.
//   * Trace structure (child pointers, recorded values, modifiable values)
//     is published across strands by fork/join boundaries: the scheduler
//     joins a strand before anything sequentially after the join looks at
//     what it built.  Those fields are therefore plain.
//   * Reader sets have their own protocol (reader_set.hpp).

#include <any>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "sac/errors.hpp"
#include "sac/reader_set.hpp"

namespace sac {

class ModifiableBase;
struct RNode;

using ReaderSet = ReaderSetT<RNode>;

namespace detail {

// Process-wide write epoch.  run() and propagate() each open a fresh epoch
// on entry and close it on exit, so initial runs, input-mutation windows,
// and propagations are all distinct epochs.  Only double-write detection
// keys off these stamps.
inline std::atomic<uint64_t>& epoch_counter() {
  static std::atomic<uint64_t> e{1};
  return e;
}
inline uint64_t current_epoch() {
  return epoch_counter().load(std::memory_order_relaxed);
}
inline void bump_epoch() {
  epoch_counter().fetch_add(1, std::memory_order_relaxed);
}

inline uint64_t next_mod_id() {
  static std::atomic<uint64_t> c{1};
  return c.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

enum class NodeKind : uint8_t { Seq, Par, Read, Fan };

inline const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Seq: return "S";
    case NodeKind::Par: return "P";
    case NodeKind::Read: return "R";
    case NodeKind::Fan: return "F";
  }
  return "?";
}

// One vertex of the dependency trace.  S and P nodes shape control flow,
// R nodes remember reads (RNode below), fan nodes record parallel-for
// blocks (FanNode below).  left/right are the at-most-two ordered children
// of S/P/R; fan children live in FanNode::children.
struct Node {
  const NodeKind kind;
  int32_t slot;  // position under parent: 0 = left, 1 = right, i for fan arms
  std::atomic<bool> marked{false};
  Node* parent;
  Node* left = nullptr;
  Node* right = nullptr;
  const uint64_t id;
  // Modifiables allocated while this node was the innermost scope; they die
  // when the subtree is collected.
  std::vector<std::unique_ptr<ModifiableBase>> owned_mods;

  Node(NodeKind k, uint64_t node_id, Node* p, int32_t child_slot)
      : kind(k), slot(child_slot), parent(p), id(node_id) {}
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
  virtual ~Node();

  // Flag the path to the root so propagation can find its way down.  Stops
  // at the first node that was already marked: some earlier ascent owns the
  // rest of the path, and flags are only cleared top-down by propagation.
  void mark() {
    for (Node* n = this; n != nullptr; n = n->parent)
      if (n->marked.exchange(true, std::memory_order_acq_rel)) break;
  }
};

// Values a reader saw at its last execution, copied out at read time so
// trace diffing never needs the source modifiables to stay alive.
class RecordedValues {
 public:
  virtual ~RecordedValues() = default;
  virtual size_t arity() const = 0;
  // Does the i-th recorded value equal the current value of m?
  virtual bool matches_current(size_t i, const ModifiableBase& m) const = 0;
  virtual bool equals(const RecordedValues& other) const = 0;
  virtual std::unique_ptr<RecordedValues> clone() const = 0;
};

// A read record.  Re-execution detaches its children into the garbage pile
// and runs `body` again under the node as scope; `body` re-reads current
// values, replaces `recorded`, and calls the user function.
struct RNode final : Node {
  std::atomic<bool> affected{false};
  std::vector<ModifiableBase*> mods;         // dependencies, in read order
  std::unique_ptr<RecordedValues> recorded;  // what the last execution saw
  std::function<void()> body;
  std::atomic<uint64_t> ticks{0};  // direct work units of the last execution
  bool dynamic_deps = false;       // block readers relink on re-execution

  RNode(uint64_t node_id, Node* p, int32_t child_slot)
      : Node(NodeKind::Read, node_id, p, child_slot) {}
  // Detached reader; unit tests and reader-set probes.
  explicit RNode(uint64_t node_id) : RNode(node_id, nullptr, -1) {}
};

// A parallel-for record: k ordered arms, each an S scope for one index.
struct FanNode final : Node {
  std::vector<Node*> children;

  FanNode(uint64_t node_id, Node* p, int32_t child_slot)
      : Node(NodeKind::Fan, node_id, p, child_slot) {}
};

template <class F>
void for_each_child(const Node& n, F&& f) {
  if (n.kind == NodeKind::Fan) {
    for (Node* c : static_cast<const FanNode&>(n).children)
      if (c != nullptr) f(c);
    return;
  }
  if (n.left != nullptr) f(n.left);
  if (n.right != nullptr) f(n.right);
}

// Pre-order visit of a subtree, iterative so callers never worry about
// stack depth on wide fans.
template <class F>
void walk_subtree(Node* root, F&& f) {
  if (root == nullptr) return;
  std::vector<Node*> stack{root};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    f(n);
    for_each_child(*n, [&](Node* c) { stack.push_back(c); });
  }
}

inline size_t subtree_nodes(const Node* root) {
  size_t n = 0;
  walk_subtree(const_cast<Node*>(root), [&](Node*) { ++n; });
  return n;
}

// Levels on the longest root-to-leaf path: empty 0, single node 1.
inline size_t subtree_height(const Node* root) {
  if (root == nullptr) return 0;
  size_t best = 0;
  std::vector<std::pair<const Node*, size_t>> stack{{root, 1}};
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    best = d > best ? d : best;
    for_each_child(*n, [&](Node* c) { stack.push_back({c, d + 1}); });
  }
  return best;
}

// Path from the root, as child-slot indices; two nodes in isomorphic traces
// correspond exactly when their paths are equal.
inline std::vector<int32_t> node_path(const Node* n) {
  std::vector<int32_t> path;
  for (; n != nullptr && n->parent != nullptr; n = n->parent)
    path.push_back(n->slot);
  std::vector<int32_t> out(path.rbegin(), path.rend());
  return out;
}

class ModifiableBase {
 public:
  ModifiableBase() : id_(detail::next_mod_id()) {}
  ModifiableBase(const ModifiableBase&) = delete;
  ModifiableBase& operator=(const ModifiableBase&) = delete;
  virtual ~ModifiableBase() = default;

  uint64_t id() const { return id_; }
  Node* owner() const { return owner_; }
  void set_owner(Node* scope) { owner_ = scope; }
  ReaderSet& readers() { return readers_; }
  const ReaderSet& readers() const { return readers_; }
  bool written() const { return engaged_.load(std::memory_order_acquire); }

 protected:
  const uint64_t id_;
  Node* owner_ = nullptr;  // allocating scope; null for static inputs
  ReaderSet readers_;
  std::atomic<bool> engaged_{false};
  std::atomic<uint64_t> write_epoch_{0};
};

template <class V>
concept ModValue = std::equality_comparable<V> && std::copy_constructible<V>;

// A write-once-per-epoch cell.  The guard makes writes idempotent on equal
// values (nothing propagates) and loud on differing double-writes.
template <ModValue V>
class Modifiable final : public ModifiableBase {
 public:
  Modifiable() = default;

  void write(const V& v) {
    const uint64_t e = detail::current_epoch();
    if (engaged_.load(std::memory_order_acquire)) {
      if (*value_ == v) {
        // Unchanged: remember the epoch so a later differing write in the
        // same epoch is still caught, but mark nothing.
        write_epoch_.store(e, std::memory_order_relaxed);
        return;
      }
      if (write_epoch_.load(std::memory_order_relaxed) == e)
        throw WriteOnceViolation("differing second write in one epoch");
    }
    const uint64_t prev = write_epoch_.exchange(e, std::memory_order_acq_rel);
    if (prev == e) {
      // Another strand claimed this epoch's write first.  Tolerated exactly
      // when it stored the same value; wait for the value to land.
      while (!engaged_.load(std::memory_order_acquire))
        std::this_thread::yield();
      if (*value_ == v) return;
      throw WriteOnceViolation("differing concurrent writes in one epoch");
    }
    if (engaged_.load(std::memory_order_relaxed)) {
      *value_ = v;
    } else {
      value_.emplace(v);
      engaged_.store(true, std::memory_order_release);
    }
    readers_.for_each([](RNode* r) {
      r->affected.store(true, std::memory_order_release);
      r->mark();
    });
  }

  const V& value() const {
    if (!written()) throw UnwrittenRead("read of an unwritten modifiable");
    return *value_;
  }

  bool equals_current(const V& v) const { return written() && *value_ == v; }

 private:
  std::optional<V> value_;
};

inline Node::~Node() = default;

namespace detail {

template <class V>
bool mod_value_equals(const ModifiableBase& m, const V& v) {
  return static_cast<const Modifiable<V>&>(m).equals_current(v);
}

template <class... Vs>
class TupleRecord final : public RecordedValues {
 public:
  explicit TupleRecord(std::tuple<Vs...> v) : values_(std::move(v)) {}

  size_t arity() const override { return sizeof...(Vs); }

  bool matches_current(size_t i, const ModifiableBase& m) const override {
    bool ok = false;
    size_t j = 0;
    std::apply(
        [&](const auto&... v) {
          ((j++ == i ? void(ok = mod_value_equals(m, v)) : void()), ...);
        },
        values_);
    return ok;
  }

  bool equals(const RecordedValues& other) const override {
    auto* p = dynamic_cast<const TupleRecord*>(&other);
    return p != nullptr && p->values_ == values_;
  }

  std::unique_ptr<RecordedValues> clone() const override {
    return std::make_unique<TupleRecord>(values_);
  }

  const std::tuple<Vs...>& values() const { return values_; }

 private:
  std::tuple<Vs...> values_;
};

template <class V>
class VectorRecord final : public RecordedValues {
 public:
  explicit VectorRecord(std::vector<V> v) : values_(std::move(v)) {}

  size_t arity() const override { return values_.size(); }

  bool matches_current(size_t i, const ModifiableBase& m) const override {
    return mod_value_equals(m, values_[i]);
  }

  bool equals(const RecordedValues& other) const override {
    auto* p = dynamic_cast<const VectorRecord*>(&other);
    return p != nullptr && p->values_ == values_;
  }

  std::unique_ptr<RecordedValues> clone() const override {
    return std::make_unique<VectorRecord>(values_);
  }

 private:
  std::vector<V> values_;
};

// Heterogeneous record for block readers, ordered by first access.
class AnyRecord final : public RecordedValues {
 public:
  template <class V>
  void add(const V& v) {
    slots_.push_back(Slot{
        std::any(v),
        [](const std::any& a, const std::any& b) {
          const V* pb = std::any_cast<V>(&b);
          return pb != nullptr && *std::any_cast<V>(&a) == *pb;
        },
        [](const std::any& a, const ModifiableBase& m) {
          return mod_value_equals(m, *std::any_cast<V>(&a));
        }});
  }

  size_t arity() const override { return slots_.size(); }

  bool matches_current(size_t i, const ModifiableBase& m) const override {
    return slots_[i].eq_mod(slots_[i].v, m);
  }

  bool equals(const RecordedValues& other) const override {
    auto* p = dynamic_cast<const AnyRecord*>(&other);
    if (p == nullptr || p->slots_.size() != slots_.size()) return false;
    for (size_t i = 0; i < slots_.size(); ++i)
      if (!slots_[i].eq_any(slots_[i].v, p->slots_[i].v)) return false;
    return true;
  }

  std::unique_ptr<RecordedValues> clone() const override {
    return std::make_unique<AnyRecord>(*this);
  }

 private:
  struct Slot {
    std::any v;
    bool (*eq_any)(const std::any&, const std::any&);
    bool (*eq_mod)(const std::any&, const ModifiableBase&);
  };
  std::vector<Slot> slots_;
};

}  // namespace detail

// --- instrumentation -------------------------------------------------------

struct MetricsSample {
  uint64_t readers_reexecuted = 0;   // R_delta of the last propagation
  uint64_t reexec_work_units = 0;    // old-side units destroyed + new-side run
  uint64_t nodes_visited = 0;        // trace nodes the traversal touched
  uint64_t pile_nodes_collected = 0; // lifetime total freed by gc_collect
  uint64_t run_ns = 0;
  uint64_t propagate_ns = 0;
  uint64_t gc_ns = 0;
};

struct TraceMetrics {
  std::atomic<uint64_t> readers_reexecuted{0};
  std::atomic<uint64_t> reexec_work_units{0};
  std::atomic<uint64_t> nodes_visited{0};
  std::atomic<uint64_t> pile_nodes_collected{0};
  uint64_t run_ns = 0;
  uint64_t propagate_ns = 0;
  uint64_t gc_ns = 0;

  void reset_propagation_counters() {
    readers_reexecuted.store(0, std::memory_order_relaxed);
    reexec_work_units.store(0, std::memory_order_relaxed);
    nodes_visited.store(0, std::memory_order_relaxed);
  }

  MetricsSample sample() const {
    return MetricsSample{
        readers_reexecuted.load(std::memory_order_relaxed),
        reexec_work_units.load(std::memory_order_relaxed),
        nodes_visited.load(std::memory_order_relaxed),
        pile_nodes_collected.load(std::memory_order_relaxed),
        run_ns,
        propagate_ns,
        gc_ns,
    };
  }
};

struct VisitEvent {
  uint64_t node_id;
  uint64_t stamp;  // from one process-wide logical clock
  uint32_t strand;
  NodeKind kind;
  bool enter;
};

// Enter/exit journal of a propagation traversal.  Off by default; the
// fast path is one relaxed load.
class VisitLog {
 public:
  void enable(bool on) { enabled_.store(on, std::memory_order_relaxed); }
  bool enabled() const { return enabled_.load(std::memory_order_relaxed); }

  void clear() {
    std::lock_guard<std::mutex> g(mu_);
    events_.clear();
  }

  void record(const Node& n, bool enter) {
    if (!enabled()) return;
    VisitEvent ev{n.id, clock_.fetch_add(1, std::memory_order_relaxed),
                  strand_tag(), n.kind, enter};
    std::lock_guard<std::mutex> g(mu_);
    events_.push_back(ev);
  }

  std::vector<VisitEvent> events() const {
    std::lock_guard<std::mutex> g(mu_);
    return events_;
  }

  static uint32_t strand_tag() {
    static std::atomic<uint32_t> next{1};
    thread_local uint32_t tag = next.fetch_add(1, std::memory_order_relaxed);
    return tag;
  }

 private:
  std::atomic<bool> enabled_{false};
  std::atomic<uint64_t> clock_{1};
  mutable std::mutex mu_;
  std::vector<VisitEvent> events_;
};

}  // namespace sac
