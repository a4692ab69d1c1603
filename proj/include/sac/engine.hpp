#pragma once

// The change-propagation engine: computations, the primitives that grow a
// trace (alloc / write / read / read_array / read_block / par / parfor),
// parallel propagation of input changes, and deferred destruction of the
// subtrees propagation replaces.
//
// Execution model in brief: a computation runs once and records an RSP
// trace.  Writing a modifiable with a different value flags its readers
// (`affected`) and marks the path to the root.  propagate() descends the
// marked skeleton in trace order — S children sequentially, P children and
// fan arms in parallel — and re-executes affected readers against current
// values.  A re-executed reader's old children move to the garbage pile
// (so re-created readers keep their identity while everything below them is
// replaced); gc_collect() frees the pile once the trace is quiescent.

#include <algorithm>
#include <chrono>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <type_traits>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sac/core.hpp"
#include "sac/errors.hpp"
#include "sac/scheduler.hpp"

namespace sac {

class Computation;

namespace detail {

struct CompState;

// What a strand needs to know while running trace code: which computation
// it grows, the scope node new records attach under, the innermost reader
// (work ticks land there), and whether this is a propagation re-execution.
struct StrandContext {
  CompState* comp = nullptr;
  Node* scope = nullptr;
  RNode* reader = nullptr;
  bool propagating = false;
};

inline StrandContext& tls() {
  static thread_local StrandContext ctx;
  return ctx;
}

// Save/restore guard.  Every task body a strand may steal re-establishes
// its context through one of these, so contexts survive work stealing.
class ScopedStrand {
 public:
  explicit ScopedStrand(const StrandContext& c) : saved_(tls()) { tls() = c; }
  ~ScopedStrand() { tls() = saved_; }
  ScopedStrand(const ScopedStrand&) = delete;
  ScopedStrand& operator=(const ScopedStrand&) = delete;

 private:
  StrandContext saved_;
};

struct CompState {
  Node* root = nullptr;
  Scheduler* sched = nullptr;
  std::atomic<uint64_t> next_node_id{1};
  TraceMetrics metrics;
  VisitLog vlog;

  // The garbage pile: subtrees and modifiables detached by re-execution.
  // Nodes stay allocated (readers inside keep their identity in reader
  // sets, dead-marked) until gc_collect frees them.
  std::mutex pile_mu;
  std::vector<Node*> pile;
  std::vector<std::unique_ptr<ModifiableBase>> pile_mods;
  std::vector<ModifiableBase*> touched_sets;  // registries holding dead marks

  std::mutex reexec_mu;
  std::vector<RNode*> reexec_log;  // readers re-executed by the last propagate

  uint64_t fresh_id() {
    return next_node_id.fetch_add(1, std::memory_order_relaxed);
  }

  CompState() = default;
  CompState(const CompState&) = delete;
  CompState& operator=(const CompState&) = delete;
  ~CompState();
};

inline uint64_t now_ns() {
  return static_cast<uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

// Attach a fresh node under `parent`, left slot first.  The scope cursor
// discipline means callers see a free left slot; both-occupied is misuse.
inline Node* attach_new(CompState* c, NodeKind k, Node* parent) {
  int32_t slot;
  if (parent->left == nullptr)
    slot = 0;
  else if (parent->right == nullptr)
    slot = 1;
  else
    throw ContractViolation("both child slots of the scope are occupied");
  Node* n;
  switch (k) {
    case NodeKind::Read: n = new RNode(c->fresh_id(), parent, slot); break;
    case NodeKind::Fan: n = new FanNode(c->fresh_id(), parent, slot); break;
    default: n = new Node(k, c->fresh_id(), parent, slot); break;
  }
  (slot == 0 ? parent->left : parent->right) = n;
  return n;
}

// After a primitive's record lands in the left slot, the rest of the scope
// continues in a fresh right S sibling.
inline void hop_continuation(StrandContext& ctx, Node* cur) {
  ctx.scope = attach_new(ctx.comp, NodeKind::Seq, cur);
}

inline Node* require_scope(const char* what) {
  StrandContext& ctx = tls();
  if (ctx.comp == nullptr || ctx.scope == nullptr)
    throw ContractViolation(std::string(what) +
                            " called outside a computation scope");
  return ctx.scope;
}

inline void reader_tick(CompState* c, RNode* r, bool propagating, uint64_t n) {
  r->ticks.fetch_add(n, std::memory_order_relaxed);
  if (propagating)
    c->metrics.reexec_work_units.fetch_add(n, std::memory_order_relaxed);
}

// Run (or re-run) a reader body with the node as both scope and reader.
// The invocation itself is one work unit; work() adds the rest.
inline void execute_reader(CompState* c, RNode* r) {
  const bool propagating = tls().propagating;
  ScopedStrand guard(StrandContext{c, r, r, propagating});
  r->ticks.store(0, std::memory_order_relaxed);
  reader_tick(c, r, propagating, 1);
  r->body();
}

}  // namespace detail

// A computation handle: owns the trace, its metrics, and its garbage pile.
// Move-only; destruction collects everything including static reader-set
// entries the trace held.
class Computation {
 public:
  Computation() = default;
  explicit Computation(std::unique_ptr<detail::CompState> st)
      : st_(std::move(st)) {}
  Computation(Computation&&) = default;
  Computation& operator=(Computation&&) = default;

  bool valid() const { return st_ != nullptr; }
  Node* root() const { return st_ ? st_->root : nullptr; }

  TraceMetrics& metrics() { return st_->metrics; }
  MetricsSample metrics_sample() const { return st_->metrics.sample(); }
  VisitLog& visit_log() { return st_->vlog; }
  const VisitLog& visit_log() const { return st_->vlog; }

  size_t tree_nodes() const { return subtree_nodes(root()); }
  size_t tree_height() const { return subtree_height(root()); }

  // Readers the last propagation re-executed, in visit order per strand.
  std::vector<RNode*> last_reexecuted() const {
    std::lock_guard<std::mutex> g(st_->reexec_mu);
    return st_->reexec_log;
  }

  size_t pile_subtrees() const {
    std::lock_guard<std::mutex> g(st_->pile_mu);
    return st_->pile.size();
  }

  detail::CompState* state() const { return st_.get(); }

 private:
  std::unique_ptr<detail::CompState> st_;
};

// --- allocation --------------------------------------------------------------

// A modifiable allocated inside a computation is owned by the current scope
// and dies when that subtree is collected.
template <ModValue V>
Modifiable<V>* alloc() {
  Node* scope = detail::require_scope("alloc");
  auto m = std::make_unique<Modifiable<V>>();
  Modifiable<V>* p = m.get();
  p->set_owner(scope);
  scope->owned_mods.push_back(std::move(m));
  return p;
}

template <ModValue V>
std::vector<Modifiable<V>*> alloc_array(size_t n) {
  std::vector<Modifiable<V>*> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(alloc<V>());
  return out;
}

// Static inputs live outside any computation and belong to the caller.
template <ModValue V>
using ModPtr = std::unique_ptr<Modifiable<V>>;

template <ModValue V>
ModPtr<V> make_input() {
  return std::make_unique<Modifiable<V>>();
}

// An owned block of static inputs with span views for read_array.
template <ModValue V>
class InputArray {
 public:
  InputArray() = default;
  explicit InputArray(size_t n) { resize(n); }

  void resize(size_t n) {
    own_.clear();
    raw_.clear();
    own_.reserve(n);
    raw_.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      own_.push_back(std::make_unique<Modifiable<V>>());
      raw_.push_back(own_.back().get());
    }
  }

  size_t size() const { return raw_.size(); }
  Modifiable<V>* operator[](size_t i) const { return raw_[i]; }
  std::span<Modifiable<V>* const> view() const {
    return {raw_.data(), raw_.size()};
  }
  std::span<Modifiable<V>* const> slice(size_t lo, size_t hi) const {
    return {raw_.data() + lo, hi - lo};
  }

 private:
  std::vector<std::unique_ptr<Modifiable<V>>> own_;
  std::vector<Modifiable<V>*> raw_;
};

// --- write -------------------------------------------------------------------

template <ModValue V>
void write(Modifiable<V>* m, std::type_identity_t<const V&> v) {
  m->write(v);
}

// --- read --------------------------------------------------------------------

// Read a fixed tuple of modifiables.  The reader function runs now against
// current values and re-runs whenever any of them changes to something
// unequal; everything it builds (nested records, allocations, writes) is
// replaced wholesale on re-execution.
template <class... Vs, class F>
void read(std::tuple<Modifiable<Vs>*...> mods, F fn) {
  Node* cur = detail::require_scope("read");
  detail::CompState* c = detail::tls().comp;
  std::apply(
      [](auto*... m) {
        ((m->written()
              ? void(0)
              : throw UnwrittenRead("read of an unwritten modifiable")),
         ...);
      },
      mods);
  auto* r = static_cast<RNode*>(detail::attach_new(c, NodeKind::Read, cur));
  r->mods = std::apply(
      [](auto*... m) {
        return std::vector<ModifiableBase*>{
            static_cast<ModifiableBase*>(m)...};
      },
      mods);
  r->body = [r, mods, fn]() {
    auto vals = std::apply(
        [](auto*... m) { return std::tuple<Vs...>(m->value()...); }, mods);
    r->recorded = std::make_unique<detail::TupleRecord<Vs...>>(vals);
    std::apply(fn, vals);
  };
  std::apply([&](auto*... m) { (m->readers().insert(r, r->id), ...); }, mods);
  detail::execute_reader(c, r);
  detail::hop_continuation(detail::tls(), cur);
}

template <ModValue V, class F>
void read(Modifiable<V>* m, F fn) {
  read(std::tuple<Modifiable<V>*>{m}, std::move(fn));
}

// Read a contiguous slice of same-typed modifiables as one record; the
// reader sees the values as a span.  One record of n values, not n records.
template <ModValue V, class F>
void read_array(std::span<Modifiable<V>* const> slice, F fn) {
  Node* cur = detail::require_scope("read_array");
  detail::CompState* c = detail::tls().comp;
  for (Modifiable<V>* m : slice)
    if (!m->written())
      throw UnwrittenRead("read_array of an unwritten modifiable");
  auto* r = static_cast<RNode*>(detail::attach_new(c, NodeKind::Read, cur));
  r->mods.assign(slice.begin(), slice.end());
  r->body = [r, mv = std::vector<Modifiable<V>*>(slice.begin(), slice.end()),
             fn]() {
    std::vector<V> vals;
    vals.reserve(mv.size());
    for (Modifiable<V>* m : mv) vals.push_back(m->value());
    r->recorded = std::make_unique<detail::VectorRecord<V>>(vals);
    fn(std::span<const V>(vals.data(), vals.size()));
  };
  for (Modifiable<V>* m : slice) m->readers().insert(r, r->id);
  detail::execute_reader(c, r);
  detail::hop_continuation(detail::tls(), cur);
}

template <ModValue V, class F>
void read_array(const std::vector<Modifiable<V>*>& mods, F fn) {
  read_array(std::span<Modifiable<V>* const>(mods.data(), mods.size()),
             std::move(fn));
}

// --- read_block ---------------------------------------------------------------

// Accessor handed to block readers.  Each distinct modifiable fetched
// through get() becomes a dependency of the enclosing reader; dependencies
// are re-derived from scratch on every execution, so data-dependent read
// sets stay exact.
class Block {
 public:
  template <ModValue V>
  const V& get(Modifiable<V>* m) {
    if (!open_)
      throw ContractViolation("block accessor used outside its reader");
    for (ModifiableBase* seen : touched_)
      if (seen == m) return m->value();
    const V& v = m->value();  // throws UnwrittenRead before linking
    touched_.push_back(m);
    rec_->add(v);
    return v;
  }

 private:
  friend struct BlockAccess;
  explicit Block(detail::AnyRecord* rec) : rec_(rec) {}

  bool open_ = true;
  std::vector<ModifiableBase*> touched_;
  detail::AnyRecord* rec_;
};

struct BlockAccess {
  static Block make(detail::AnyRecord* rec) { return Block(rec); }
  static void close(Block& b) { b.open_ = false; }
  static std::vector<ModifiableBase*>& touched(Block& b) { return b.touched_; }
};

template <class F>
void read_block(F fn) {
  Node* cur = detail::require_scope("read_block");
  detail::CompState* c = detail::tls().comp;
  auto* r = static_cast<RNode*>(detail::attach_new(c, NodeKind::Read, cur));
  r->dynamic_deps = true;
  r->body = [r, fn]() {
    auto rec = std::make_unique<detail::AnyRecord>();
    Block b = BlockAccess::make(rec.get());
    fn(b);
    BlockAccess::close(b);
    std::vector<ModifiableBase*>& now = BlockAccess::touched(b);
    std::vector<ModifiableBase*> before = std::move(r->mods);
    std::vector<ModifiableBase*> dropped;
    for (ModifiableBase* m : before)
      if (std::find(now.begin(), now.end(), m) == now.end()) {
        m->readers().remove(r, r->id);
        dropped.push_back(m);
      }
    for (ModifiableBase* m : now)
      if (std::find(before.begin(), before.end(), m) == before.end())
        m->readers().insert(r, r->id);
    r->mods = std::move(now);
    r->recorded = std::move(rec);
    if (!dropped.empty()) {
      detail::CompState* cc = detail::tls().comp;
      std::lock_guard<std::mutex> g(cc->pile_mu);
      cc->touched_sets.insert(cc->touched_sets.end(), dropped.begin(),
                              dropped.end());
    }
  };
  detail::execute_reader(c, r);
  detail::hop_continuation(detail::tls(), cur);
}

// --- fork-join ----------------------------------------------------------------

// Fork two strands under a P record with an S scope each.  Writes in one
// branch must not race reads of the same modifiable in the other; that is
// the program's determinacy obligation, not the engine's.
template <class A, class B>
void par(A fa, B fb) {
  Node* cur = detail::require_scope("par");
  detail::StrandContext base = detail::tls();
  Node* p = detail::attach_new(base.comp, NodeKind::Par, cur);
  Node* ls = detail::attach_new(base.comp, NodeKind::Seq, p);
  Node* rs = detail::attach_new(base.comp, NodeKind::Seq, p);
  Scheduler::fork2(
      [&] {
        detail::ScopedStrand g(
            {base.comp, ls, base.reader, base.propagating});
        fa();
      },
      [&] {
        detail::ScopedStrand g(
            {base.comp, rs, base.reader, base.propagating});
        fb();
      });
  detail::hop_continuation(detail::tls(), cur);
}

// Fan a range out over strands, one ordered S arm per index.  An empty
// range is a complete no-op: no record, no trace growth.
template <class F>
void parfor(size_t lo, size_t hi, F fn) {
  if (lo >= hi) return;
  Node* cur = detail::require_scope("parfor");
  detail::StrandContext base = detail::tls();
  auto* fan =
      static_cast<FanNode*>(detail::attach_new(base.comp, NodeKind::Fan, cur));
  const size_t k = hi - lo;
  fan->children.resize(k);
  for (size_t i = 0; i < k; ++i)
    fan->children[i] = new Node(NodeKind::Seq, base.comp->fresh_id(), fan,
                                static_cast<int32_t>(i));
  Scheduler::for_range(0, k, [&](size_t i) {
    detail::ScopedStrand g(
        {base.comp, fan->children[i], base.reader, base.propagating});
    fn(lo + i);
  });
  detail::hop_continuation(detail::tls(), cur);
}

// --- work accounting -----------------------------------------------------------

// Charge n work units to the innermost reader (no-op outside readers).
// Apps call this so re-execution cost has a data-size-independent unit.
inline void work(uint64_t n) {
  detail::StrandContext& ctx = detail::tls();
  if (ctx.reader == nullptr) return;
  detail::reader_tick(ctx.comp, ctx.reader, ctx.propagating, n);
}

inline void mark(Node& n) { n.mark(); }

// --- reader-set facade ----------------------------------------------------------

inline void rs_insert(ReaderSet& s, RNode* r) { s.insert(r, r->id); }
inline void rs_remove(ReaderSet& s, RNode* r) { s.remove(r, r->id); }
template <class F>
void rs_for_each(const ReaderSet& s, F&& f) {
  s.for_each(std::forward<F>(f));
}
inline void rs_defer_begin(ReaderSet& s) { s.defer_begin(); }
inline void rs_defer_commit(ReaderSet& s) { s.defer_commit(); }

// --- run ------------------------------------------------------------------------

template <class F>
Computation run(F main_fn, Scheduler& sched = default_scheduler()) {
  auto st = std::make_unique<detail::CompState>();
  st->sched = &sched;
  detail::CompState* c = st.get();
  detail::bump_epoch();
  c->root = new Node(NodeKind::Seq, c->fresh_id(), nullptr, -1);
  const uint64_t t0 = detail::now_ns();
  sched.execute([&] {
    detail::ScopedStrand g({c, c->root, nullptr, false});
    main_fn();
  });
  c->metrics.run_ns = detail::now_ns() - t0;
  detail::bump_epoch();
  return Computation(std::move(st));
}

// --- propagation -----------------------------------------------------------------

namespace detail {

inline uint64_t subtree_direct_ticks(Node* root) {
  uint64_t units = 0;
  walk_subtree(root, [&](Node* n) {
    if (n->kind == NodeKind::Read)
      units += static_cast<RNode*>(n)->ticks.load(std::memory_order_relaxed);
  });
  return units;
}

// Dead-mark every reader of a doomed subtree in its registries so writes
// later this epoch skip them; physical removal waits for gc_collect.
inline void retire_subtree(Node* root, std::vector<ModifiableBase*>& touched) {
  walk_subtree(root, [&](Node* n) {
    if (n->kind != NodeKind::Read) return;
    auto* r = static_cast<RNode*>(n);
    for (ModifiableBase* m : r->mods) {
      m->readers().remove(r, r->id, /*allow_dead=*/true);
      touched.push_back(m);
    }
  });
}

inline void reexecute_reader(CompState* c, RNode* r) {
  uint64_t old_units = r->ticks.load(std::memory_order_relaxed);
  Node* kids[2] = {r->left, r->right};
  r->left = nullptr;
  r->right = nullptr;
  std::vector<ModifiableBase*> touched;
  for (Node* child : kids) {
    if (child == nullptr) continue;
    child->parent = nullptr;  // stray marks from the pile stop here
    child->slot = -1;
    old_units += subtree_direct_ticks(child);
    retire_subtree(child, touched);
  }
  {
    std::lock_guard<std::mutex> g(c->pile_mu);
    for (Node* child : kids)
      if (child != nullptr) c->pile.push_back(child);
    for (auto& m : r->owned_mods) c->pile_mods.push_back(std::move(m));
    c->touched_sets.insert(c->touched_sets.end(), touched.begin(),
                           touched.end());
  }
  r->owned_mods.clear();
  c->metrics.readers_reexecuted.fetch_add(1, std::memory_order_relaxed);
  c->metrics.reexec_work_units.fetch_add(old_units, std::memory_order_relaxed);
  {
    std::lock_guard<std::mutex> g(c->reexec_mu);
    c->reexec_log.push_back(r);
  }
  execute_reader(c, r);
  r->affected.store(false, std::memory_order_release);
}

inline void propagate_node(CompState* c, Node* n);

inline void propagate_children_seq(CompState* c, Node* n) {
  if (n->left != nullptr && n->left->marked.load(std::memory_order_acquire))
    propagate_node(c, n->left);
  if (n->right != nullptr && n->right->marked.load(std::memory_order_acquire))
    propagate_node(c, n->right);
}

inline void propagate_node(CompState* c, Node* n) {
  c->metrics.nodes_visited.fetch_add(1, std::memory_order_relaxed);
  c->vlog.record(*n, true);
  switch (n->kind) {
    case NodeKind::Seq:
      propagate_children_seq(c, n);
      break;
    case NodeKind::Read: {
      auto* r = static_cast<RNode*>(n);
      if (r->affected.load(std::memory_order_acquire))
        reexecute_reader(c, r);
      else
        propagate_children_seq(c, n);
      break;
    }
    case NodeKind::Par: {
      Node* l = n->left;
      Node* rt = n->right;
      const bool lm =
          l != nullptr && l->marked.load(std::memory_order_acquire);
      const bool rm =
          rt != nullptr && rt->marked.load(std::memory_order_acquire);
      if (lm && rm) {
        StrandContext base = tls();
        Scheduler::fork2(
            [&] {
              ScopedStrand g(base);
              propagate_node(c, l);
            },
            [&] {
              ScopedStrand g(base);
              propagate_node(c, rt);
            });
      } else if (lm) {
        propagate_node(c, l);
      } else if (rm) {
        propagate_node(c, rt);
      }
      break;
    }
    case NodeKind::Fan: {
      auto* f = static_cast<FanNode*>(n);
      std::vector<Node*> hot;
      for (Node* child : f->children)
        if (child != nullptr &&
            child->marked.load(std::memory_order_acquire))
          hot.push_back(child);
      if (hot.size() == 1) {
        propagate_node(c, hot[0]);
      } else if (!hot.empty()) {
        StrandContext base = tls();
        Scheduler::for_range(0, hot.size(), [&](size_t i) {
          ScopedStrand g(base);
          propagate_node(c, hot[i]);
        });
      }
      break;
    }
  }
  n->marked.store(false, std::memory_order_release);
  c->vlog.record(*n, false);
}

}  // namespace detail

// Re-execute everything the writes since the last quiescent point affected.
// Counters describe this propagation only; the visit log, if enabled, gets
// one enter/exit pair per traversed node.
inline void propagate(Computation& comp) {
  detail::CompState* c = comp.state();
  if (c == nullptr) throw ContractViolation("propagate on an empty computation");
  detail::bump_epoch();
  c->metrics.reset_propagation_counters();
  {
    std::lock_guard<std::mutex> g(c->reexec_mu);
    c->reexec_log.clear();
  }
  const uint64_t t0 = detail::now_ns();
  if (c->root != nullptr && c->root->marked.load(std::memory_order_acquire)) {
    c->sched->execute([&] {
      detail::ScopedStrand g({c, nullptr, nullptr, true});
      detail::propagate_node(c, c->root);
    });
  }
  c->metrics.propagate_ns = detail::now_ns() - t0;
  detail::bump_epoch();
}

// --- collection ------------------------------------------------------------------

namespace detail {

inline uint64_t collect_now(CompState* c) {
  std::vector<Node*> roots;
  std::vector<std::unique_ptr<ModifiableBase>> orphans;
  std::vector<ModifiableBase*> touched;
  {
    std::lock_guard<std::mutex> g(c->pile_mu);
    roots.swap(c->pile);
    orphans.swap(c->pile_mods);
    touched.swap(c->touched_sets);
  }
  std::vector<Node*> all;
  std::unordered_set<const ModifiableBase*> dying;
  for (Node* root : roots)
    walk_subtree(root, [&](Node* n) {
      all.push_back(n);
      for (auto& m : n->owned_mods) dying.insert(m.get());
    });
  for (auto& m : orphans) dying.insert(m.get());
  // Rebuild every registry that holds dead marks — unless the modifiable
  // itself dies with this collection.
  std::unordered_set<ModifiableBase*> compactable;
  for (ModifiableBase* m : touched)
    if (dying.find(m) == dying.end()) compactable.insert(m);
  for (ModifiableBase* m : compactable) m->readers().compact();
  for (Node* n : all) delete n;
  orphans.clear();
  c->metrics.pile_nodes_collected.fetch_add(all.size(),
                                            std::memory_order_relaxed);
  return all.size();
}

inline CompState::~CompState() {
  if (root != nullptr) {
    pile.push_back(root);
    root = nullptr;
  }
  collect_now(this);
}

}  // namespace detail

// Free the garbage pile.  Requires quiescence (no propagation in flight).
// Returns the number of trace nodes destroyed.
inline uint64_t gc_collect(Computation& comp) {
  detail::CompState* c = comp.state();
  if (c == nullptr)
    throw ContractViolation("gc_collect on an empty computation");
  const uint64_t t0 = detail::now_ns();
  const uint64_t n = detail::collect_now(c);
  c->metrics.gc_ns = detail::now_ns() - t0;
  return n;
}

// --- audit -----------------------------------------------------------------------

struct AuditViolation {
  std::string code;
  uint64_t id;  // node or modifiable id, whichever the code concerns
  std::string detail;
};

struct AuditReport {
  std::vector<AuditViolation> violations;
  bool clean() const { return violations.empty(); }
};

// Whole-trace invariant check, meant for quiescent moments (after a run,
// after propagate, after gc_collect).  Verifies structure (parent/slot
// back-pointers, P shape), record arity, mark hygiene (marked implies an
// affected reader below, affected implies a marked path above), reader-set
// bidirectionality, and allocation extent (readers sit inside the owning
// scope of everything they read).
inline AuditReport audit_trace(const Computation& comp) {
  AuditReport rep;
  auto add = [&](const char* code, uint64_t id, std::string detail) {
    rep.violations.push_back(AuditViolation{code, id, std::move(detail)});
  };
  detail::CompState* c = comp.state();
  if (c == nullptr || c->root == nullptr) return rep;

  std::unordered_set<const Node*> live;
  std::unordered_set<const RNode*> live_readers;
  std::vector<const RNode*> readers;
  std::unordered_set<const ModifiableBase*> owned_live;
  walk_subtree(c->root, [&](Node* n) {
    live.insert(n);
    for (auto& m : n->owned_mods) owned_live.insert(m.get());
    auto check_child = [&](Node* ch, int32_t slot) {
      if (ch == nullptr) return;
      if (ch->parent != n)
        add("parent-link", ch->id, "child does not point back to parent");
      if (ch->slot != slot)
        add("child-slot", ch->id, "slot index disagrees with position");
    };
    if (n->kind == NodeKind::Fan) {
      auto* f = static_cast<FanNode*>(n);
      for (size_t i = 0; i < f->children.size(); ++i)
        check_child(f->children[i], static_cast<int32_t>(i));
      if (n->left != nullptr || n->right != nullptr)
        add("fan-shape", n->id, "fan node with left/right children");
    } else {
      check_child(n->left, 0);
      check_child(n->right, 1);
    }
    if (n->kind == NodeKind::Par) {
      if (n->left == nullptr || n->right == nullptr ||
          n->left->kind != NodeKind::Seq || n->right->kind != NodeKind::Seq)
        add("par-shape", n->id, "P node without exactly two S children");
    }
    if (n->kind == NodeKind::Read) {
      auto* r = static_cast<RNode*>(n);
      live_readers.insert(r);
      readers.push_back(r);
      if (r->recorded == nullptr)
        add("unrecorded-reader", r->id, "reader has never recorded values");
      else if (r->recorded->arity() != r->mods.size())
        add("record-arity", r->id, "recorded arity differs from dependencies");
    }
  });

  // Mark hygiene, both directions.
  std::function<bool(const Node*)> affected_below =
      [&](const Node* n) -> bool {
    bool any = n->kind == NodeKind::Read &&
               static_cast<const RNode*>(n)->affected.load(
                   std::memory_order_relaxed);
    for_each_child(*n, [&](Node* ch) { any = affected_below(ch) || any; });
    if (n->marked.load(std::memory_order_relaxed) && !any)
      add("stale-mark", n->id, "marked node with no affected reader below");
    return any;
  };
  affected_below(c->root);
  for (const RNode* r : readers) {
    if (!r->affected.load(std::memory_order_relaxed)) continue;
    for (const Node* a = r; a != nullptr; a = a->parent)
      if (!a->marked.load(std::memory_order_relaxed)) {
        add("unreachable-affected", r->id,
            "affected reader with an unmarked ancestor");
        break;
      }
  }

  // Reader-set bidirectionality and allocation extent.
  std::unordered_set<const ModifiableBase*> audited;
  for (const RNode* r : readers) {
    for (ModifiableBase* m : r->mods) {
      if (!m->readers().contains(r, r->id))
        add("missing-reader-entry", r->id,
            "dependency registry does not list this reader");
      if (Node* o = m->owner(); o != nullptr) {
        if (live.find(o) == live.end()) {
          add("dead-owner", r->id, "reader depends on a collected scope");
        } else {
          bool inside = false;
          for (const Node* a = r; a != nullptr; a = a->parent)
            if (a == o) {
              inside = true;
              break;
            }
          if (!inside)
            add("scope-extent", r->id,
                "reader outside the owning scope of a dependency");
        }
      }
      audited.insert(m);
    }
  }
  auto audit_registry = [&](const ModifiableBase* m) {
    m->readers().for_each([&](RNode* er) {
      if (live_readers.find(er) == live_readers.end()) {
        add("dangling-reader-entry", m->id(),
            "registry lists a collected reader");
        return;
      }
      if (std::find(er->mods.begin(), er->mods.end(), m) == er->mods.end())
        add("entry-not-linked", m->id(),
            "registry lists a reader that does not depend on it");
    });
  };
  for (const ModifiableBase* m : audited) audit_registry(m);
  for (const ModifiableBase* m : owned_live)
    if (audited.find(m) == audited.end()) audit_registry(m);

  return rep;
}

}  // namespace sac
