#pragma once

// Trace introspection: deep snapshots, the two differencing oracles
// (affected readers and the additive distance between traces), and
// analyses over propagation visit logs.
//
// The oracles deliberately know nothing about the engine's flags.  They
// lock-step two snapshots by structure: two readers are cognates when the
// labeled paths from the roots coincide; a cognate pair whose recorded
// values differ is affected, and everything below it is subsumed.  That
// lets tests compare what a propagation actually re-executed against what
// two independent from-scratch runs say it should have.

#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sac/core.hpp"
#include "sac/engine.hpp"

namespace sac {

// One node of a structural deep copy.  Children are slot-indexed with null
// gaps so paths survive the copy exactly.
struct SnapNode {
  NodeKind kind = NodeKind::Seq;
  uint64_t live_id = 0;   // id of the copied node; diagnostic only
  uint64_t direct_ticks = 0;
  uint64_t subtree_ticks = 0;  // direct + everything below
  std::unique_ptr<RecordedValues> recorded;  // readers only
  std::vector<std::unique_ptr<SnapNode>> kids;

  SnapNode() = default;
  explicit SnapNode(NodeKind k) : kind(k) {}
};

struct TraceSnapshot {
  std::unique_ptr<SnapNode> root;
};

namespace detail {

inline std::unique_ptr<SnapNode> snapshot_node(const Node* n) {
  auto s = std::make_unique<SnapNode>(n->kind);
  s->live_id = n->id;
  if (n->kind == NodeKind::Read) {
    auto* r = static_cast<const RNode*>(n);
    s->direct_ticks = r->ticks.load(std::memory_order_relaxed);
    if (r->recorded != nullptr) s->recorded = r->recorded->clone();
  }
  if (n->kind == NodeKind::Fan) {
    auto* f = static_cast<const FanNode*>(n);
    s->kids.resize(f->children.size());
    for (size_t i = 0; i < f->children.size(); ++i)
      if (f->children[i] != nullptr)
        s->kids[i] = snapshot_node(f->children[i]);
  } else {
    s->kids.resize(2);
    if (n->left != nullptr) s->kids[0] = snapshot_node(n->left);
    if (n->right != nullptr) s->kids[1] = snapshot_node(n->right);
  }
  s->subtree_ticks = s->direct_ticks;
  for (const auto& k : s->kids)
    if (k != nullptr) s->subtree_ticks += k->subtree_ticks;
  return s;
}

inline std::string path_string(const std::vector<int32_t>& path) {
  std::string out = "/";
  char buf[16];
  for (int32_t s : path) {
    std::snprintf(buf, sizeof buf, "%d/", s);
    out += buf;
  }
  return out;
}

}  // namespace detail

// Deep copy of a quiescent trace; recorded values are cloned, so the
// snapshot outlives the computation.
inline TraceSnapshot snapshot(const Computation& c) {
  TraceSnapshot s;
  if (c.root() != nullptr) s.root = detail::snapshot_node(c.root());
  return s;
}

// --- affected-reader oracle ---------------------------------------------------

struct AffectedPair {
  std::vector<int32_t> path;  // child slots from the root
  const SnapNode* before;
  const SnapNode* after;
};

struct TraceDiff {
  std::vector<AffectedPair> affected;      // outermost differing cognates
  std::vector<std::string> diagnostics;    // structural divergence above them
  bool structurally_consistent() const { return diagnostics.empty(); }
};

namespace detail {

inline void diff_walk(const SnapNode* a, const SnapNode* b,
                      std::vector<int32_t>& path, TraceDiff& out) {
  if (a == nullptr || b == nullptr) {
    if (a != b)
      out.diagnostics.push_back("presence mismatch at " + path_string(path));
    return;
  }
  if (a->kind != b->kind) {
    out.diagnostics.push_back("kind mismatch at " + path_string(path));
    return;
  }
  if (a->kind == NodeKind::Read) {
    const bool same = a->recorded != nullptr && b->recorded != nullptr &&
                      a->recorded->equals(*b->recorded);
    if (!same) {
      out.affected.push_back(AffectedPair{path, a, b});
      return;  // everything below is subsumed by this re-execution
    }
  }
  if (a->kids.size() != b->kids.size()) {
    out.diagnostics.push_back("fan-out mismatch at " + path_string(path));
    return;
  }
  for (size_t i = 0; i < a->kids.size(); ++i) {
    path.push_back(static_cast<int32_t>(i));
    diff_walk(a->kids[i].get(), b->kids[i].get(), path, out);
    path.pop_back();
  }
}

}  // namespace detail

// The frontier of cognate readers whose recorded values differ between two
// traces of the same program on different inputs.
inline TraceDiff affected_readers(const TraceSnapshot& before,
                                  const TraceSnapshot& after) {
  TraceDiff out;
  std::vector<int32_t> path;
  detail::diff_walk(before.root.get(), after.root.get(), path, out);
  return out;
}

// --- distance -------------------------------------------------------------------

namespace detail {

inline uint64_t distance_walk(const SnapNode* a, const SnapNode* b) {
  if (a == nullptr && b == nullptr) return 0;
  if (a == nullptr) return b->subtree_ticks;
  if (b == nullptr) return a->subtree_ticks;
  if (a->kind != b->kind) return a->subtree_ticks + b->subtree_ticks;
  if (a->kind == NodeKind::Read) {
    const bool same = a->recorded != nullptr && b->recorded != nullptr &&
                      a->recorded->equals(*b->recorded);
    if (!same) return a->subtree_ticks + b->subtree_ticks;
  }
  if (a->kids.size() != b->kids.size())
    return a->subtree_ticks + b->subtree_ticks;
  uint64_t d = 0;
  for (size_t i = 0; i < a->kids.size(); ++i)
    d += distance_walk(a->kids[i].get(), b->kids[i].get());
  return d;
}

}  // namespace detail

// Additive distance between two traces: at a differing cognate reader the
// whole weight of both subtrees counts (one is destroyed, the other built);
// everywhere else the children's distances sum.  Zero on identical traces,
// symmetric by construction.
inline uint64_t computation_distance(const TraceSnapshot& a,
                                     const TraceSnapshot& b) {
  return detail::distance_walk(a.root.get(), b.root.get());
}

// --- propagation introspection ----------------------------------------------------

// Paths (root slots) of the readers the last propagation re-executed.
inline std::vector<std::vector<int32_t>> reexecuted_paths(
    const Computation& c) {
  std::vector<std::vector<int32_t>> out;
  for (const RNode* r : c.last_reexecuted()) out.push_back(node_path(r));
  return out;
}

struct VisitWindow {
  uint64_t first_enter = 0;
  uint64_t last_exit = 0;
  bool seen = false;
};

inline std::unordered_map<uint64_t, VisitWindow> visit_windows(
    const std::vector<VisitEvent>& events) {
  std::unordered_map<uint64_t, VisitWindow> win;
  for (const VisitEvent& e : events) {
    VisitWindow& w = win[e.node_id];
    if (e.enter) {
      if (!w.seen || e.stamp < w.first_enter) w.first_enter = e.stamp;
      w.seen = true;
    } else {
      if (e.stamp > w.last_exit) w.last_exit = e.stamp;
    }
  }
  return win;
}

struct OrderViolation {
  uint64_t seq_id;
  uint64_t left_id;
  uint64_t right_id;
};

// Sequential-order safety over one logged propagation: wherever an S node
// had both children visited, the left child's window must close before the
// right child's opens.
inline std::vector<OrderViolation> sequential_order_violations(
    const Computation& c) {
  auto win = visit_windows(c.visit_log().events());
  std::vector<OrderViolation> out;
  walk_subtree(c.root(), [&](Node* n) {
    if (n->kind != NodeKind::Seq && n->kind != NodeKind::Read) return;
    if (n->left == nullptr || n->right == nullptr) return;
    auto li = win.find(n->left->id);
    auto ri = win.find(n->right->id);
    if (li == win.end() || ri == win.end()) return;
    if (!li->second.seen || !ri->second.seen) return;
    if (li->second.last_exit >= ri->second.first_enter)
      out.push_back(OrderViolation{n->id, n->left->id, n->right->id});
  });
  return out;
}

// Node ids a traversal may touch: every reader it re-executed plus all of
// their ancestors.  Anything visited beyond this set was wasted motion.
inline std::unordered_set<uint64_t> reexec_closure_ids(const Computation& c) {
  std::unordered_set<uint64_t> allowed;
  for (const RNode* r : c.last_reexecuted())
    for (const Node* a = r; a != nullptr; a = a->parent) allowed.insert(a->id);
  return allowed;
}

inline std::unordered_set<uint64_t> visited_ids(
    const std::vector<VisitEvent>& events) {
  std::unordered_set<uint64_t> ids;
  for (const VisitEvent& e : events)
    if (e.enter) ids.insert(e.node_id);
  return ids;
}

// Readers whose recorded values drifted from the current values of their
// dependencies.  Empty on a quiescent, fully propagated trace.
inline std::vector<uint64_t> stale_recorded(const Computation& c) {
  std::vector<uint64_t> out;
  walk_subtree(c.root(), [&](Node* n) {
    if (n->kind != NodeKind::Read) return;
    auto* r = static_cast<RNode*>(n);
    if (r->recorded == nullptr) return;
    for (size_t i = 0; i < r->mods.size(); ++i)
      if (!r->recorded->matches_current(i, *r->mods[i])) {
        out.push_back(r->id);
        return;
      }
  });
  return out;
}

}  // namespace sac
