// Engine behavior: trace shapes the primitives record, change propagation,
// re-execution, the garbage pile, and collection.

#include <gtest/gtest.h>

#include <tuple>
#include <vector>

#include "sac/sac.hpp"

namespace {

using namespace sac;

size_t count_kind(const Computation& c, NodeKind k) {
  size_t n = 0;
  walk_subtree(c.root(), [&](Node* node) { n += node->kind == k; });
  return n;
}

std::vector<RNode*> readers_of(const Computation& c) {
  std::vector<RNode*> out;
  walk_subtree(c.root(), [&](Node* n) {
    if (n->kind == NodeKind::Read) out.push_back(static_cast<RNode*>(n));
  });
  return out;
}

// Divide-and-conquer sum over an input array; the canonical small program.
struct MiniSum {
  InputArray<long> in;
  ModPtr<long> total = make_input<long>();
  Computation comp;

  explicit MiniSum(const std::vector<long>& vals) {
    in.resize(vals.size());
    for (size_t i = 0; i < vals.size(); ++i) in[i]->write(vals[i]);
    comp = run([&] { build(0, vals.size(), total.get()); });
  }

  void build(size_t lo, size_t hi, Modifiable<long>* dest) {
    if (hi - lo == 1) {
      read(in[lo], [dest](long v) { write(dest, v); });
      return;
    }
    const size_t mid = lo + (hi - lo) / 2;
    auto* l = alloc<long>();
    auto* r = alloc<long>();
    par([&] { build(lo, mid, l); }, [&] { build(mid, hi, r); });
    read(std::tuple{l, r},
         [dest](long a, long b) { write(dest, a + b); });
  }
};

TEST(Shapes, TrivialRunIsASingleScope) {
  Computation c = run([] {});
  ASSERT_TRUE(c.valid());
  EXPECT_EQ(c.tree_nodes(), 1u);
  EXPECT_EQ(c.tree_height(), 1u);
  EXPECT_TRUE(audit_trace(c).clean());
}

TEST(Shapes, ParRecordsAParNodeWithTwoScopedArms) {
  Computation c = run([] { par([] {}, [] {}); });
  EXPECT_EQ(c.tree_nodes(), 5u);  // root, P, two arms, continuation
  EXPECT_EQ(count_kind(c, NodeKind::Par), 1u);
  EXPECT_EQ(count_kind(c, NodeKind::Seq), 4u);
  EXPECT_TRUE(audit_trace(c).clean());
}

TEST(Shapes, NestedParBuildsThreeParsWithSixArms) {
  Computation c = run([] {
    par([] { par([] {}, [] {}); }, [] { par([] {}, [] {}); });
  });
  EXPECT_EQ(count_kind(c, NodeKind::Par), 3u);
  size_t arms = 0;
  walk_subtree(c.root(), [&](Node* n) {
    if (n->parent != nullptr && n->parent->kind == NodeKind::Par) {
      EXPECT_EQ(n->kind, NodeKind::Seq);
      ++arms;
    }
  });
  EXPECT_EQ(arms, 6u);
  EXPECT_EQ(c.tree_nodes(), 13u);
  EXPECT_TRUE(audit_trace(c).clean());
}

TEST(Shapes, ParforRecordsOneArmPerIndex) {
  Computation c = run([] { parfor(0, 3, [](size_t) {}); });
  EXPECT_EQ(count_kind(c, NodeKind::Fan), 1u);
  EXPECT_EQ(c.tree_nodes(), 6u);  // root, fan, three arms, continuation
  EXPECT_TRUE(audit_trace(c).clean());
}

TEST(Shapes, EmptyParforLeavesNoRecord) {
  Computation c = run([] { parfor(7, 7, [](size_t) {}); });
  EXPECT_EQ(c.tree_nodes(), 1u);
}

TEST(Shapes, OccupyingBothSlotsIsAContractBreach) {
  Computation c = run([] {
    auto& ctx = detail::tls();
    detail::attach_new(ctx.comp, NodeKind::Seq, ctx.scope);
    detail::attach_new(ctx.comp, NodeKind::Seq, ctx.scope);
    EXPECT_THROW(detail::attach_new(ctx.comp, NodeKind::Seq, ctx.scope),
                 ContractViolation);
  });
}

TEST(Contracts, PrimitivesOutsideAScopeThrow) {
  EXPECT_THROW(alloc<int>(), ContractViolation);
  EXPECT_THROW(par([] {}, [] {}), ContractViolation);
  EXPECT_THROW(read_block([](Block&) {}), ContractViolation);
  Computation empty;
  EXPECT_THROW(propagate(empty), ContractViolation);
  EXPECT_THROW(gc_collect(empty), ContractViolation);
}

TEST(Contracts, ReadOfUnwrittenInputThrowsBeforeRecording) {
  auto m = make_input<int>();
  EXPECT_THROW(run([&] { read(m.get(), [](int) {}); }), UnwrittenRead);
  auto blocky = make_input<int>();
  EXPECT_THROW(run([&] { read_block([&](Block& b) { b.get(blocky.get()); }); }),
               UnwrittenRead);
}

TEST(Sum, BuildsSevenReadersForFourInputs) {
  MiniSum s({1, 2, 3, 4});
  EXPECT_EQ(s.total->value(), 10);
  EXPECT_EQ(readers_of(s.comp).size(), 7u);
  EXPECT_TRUE(audit_trace(s.comp).clean());
}

TEST(Sum, OneLeafChangeReexecutesItsSpineOnly) {
  MiniSum s({1, 2, 3, 4});
  write(s.in[1], 9L);
  propagate(s.comp);
  EXPECT_EQ(s.total->value(), 17);
  auto m = s.comp.metrics_sample();
  // The leaf reader, the inner combiner, and the root combiner.
  EXPECT_EQ(m.readers_reexecuted, 3u);
  // Three destroyed one-tick executions plus three fresh ones.
  EXPECT_EQ(m.reexec_work_units, 6u);
  EXPECT_TRUE(audit_trace(s.comp).clean());
}

TEST(Sum, EqualValueWriteReexecutesNothing) {
  MiniSum s({1, 2, 3, 4});
  write(s.in[1], 2L);
  propagate(s.comp);
  EXPECT_EQ(s.comp.metrics_sample().readers_reexecuted, 0u);
  EXPECT_EQ(s.comp.metrics_sample().nodes_visited, 0u);
  EXPECT_EQ(s.total->value(), 10);
}

TEST(Sum, PropagationIsIdempotent) {
  MiniSum s({1, 2, 3, 4, 5, 6, 7, 8});
  write(s.in[5], -6L);
  propagate(s.comp);
  EXPECT_EQ(s.total->value(), 24);
  propagate(s.comp);
  EXPECT_EQ(s.comp.metrics_sample().readers_reexecuted, 0u);
  EXPECT_EQ(s.comp.metrics_sample().nodes_visited, 0u);
  EXPECT_EQ(s.total->value(), 24);
}

TEST(Sum, BatchOfChangesConvergesInOnePropagation) {
  MiniSum s({1, 2, 3, 4, 5, 6, 7, 8});
  write(s.in[0], 10L);
  write(s.in[7], 80L);
  propagate(s.comp);
  EXPECT_EQ(s.total->value(), 10 + 2 + 3 + 4 + 5 + 6 + 7 + 80);
  // Two leaf spines of four readers each, sharing only the root combiner.
  EXPECT_EQ(s.comp.metrics_sample().readers_reexecuted, 7u);
  EXPECT_TRUE(audit_trace(s.comp).clean());
}

TEST(Work, TicksLandOnTheInnermostReader) {
  auto m = make_input<int>();
  m->write(1);
  Computation c = run([&] {
    read(m.get(), [](int) { work(5); });
  });
  auto rs = readers_of(c);
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs[0]->ticks.load(), 6u);  // invocation + 5
  work(3);  // outside any reader: charged to nobody, no crash
  EXPECT_EQ(rs[0]->ticks.load(), 6u);
}

TEST(Reexecution, RetiresReplacedSubtreesToThePile) {
  auto sel = make_input<int>();
  sel->write(0);
  InputArray<long> in(2);
  in[0]->write(10);
  in[1]->write(20);
  auto out = make_input<long>();
  Computation c = run([&] {
    read(sel.get(), [&](int s) {
      read(in[s], [&](long v) { write(out.get(), 2 * v); });
    });
  });
  EXPECT_EQ(out->value(), 20);
  EXPECT_EQ(c.pile_subtrees(), 0u);

  write(sel.get(), 1);
  propagate(c);
  EXPECT_EQ(out->value(), 40);
  EXPECT_GT(c.pile_subtrees(), 0u);
  EXPECT_TRUE(audit_trace(c).clean()) << "dead marks keep audits clean pre-gc";

  // The retired reader of in[0] is gone: changing in[0] moves nothing.
  write(in[0], 11L);
  propagate(c);
  EXPECT_EQ(c.metrics_sample().readers_reexecuted, 0u);
  EXPECT_EQ(out->value(), 40);

  const uint64_t freed = gc_collect(c);
  EXPECT_GT(freed, 0u);
  EXPECT_EQ(c.pile_subtrees(), 0u);
  EXPECT_EQ(c.metrics_sample().pile_nodes_collected, freed);
  EXPECT_TRUE(audit_trace(c).clean());
  EXPECT_EQ(gc_collect(c), 0u) << "collection is idempotent";

  // And the replacement reader still works.
  write(in[1], 30L);
  propagate(c);
  EXPECT_EQ(out->value(), 60);
  EXPECT_TRUE(audit_trace(c).clean());
}

TEST(ReadArray, OneRecordManyValues) {
  InputArray<int> in(3);
  for (size_t i = 0; i < 3; ++i) in[i]->write(static_cast<int>(i) + 1);
  auto out = make_input<int>();
  Computation c = run([&] {
    read_array(in.view(), [&](std::span<const int> vs) {
      int sum = 0;
      for (int v : vs) sum += v;
      write(out.get(), sum);
    });
  });
  EXPECT_EQ(out->value(), 6);
  EXPECT_EQ(readers_of(c).size(), 1u);
  EXPECT_TRUE(audit_trace(c).clean());

  write(in[1], 5);
  propagate(c);
  EXPECT_EQ(out->value(), 9);
  EXPECT_EQ(c.metrics_sample().readers_reexecuted, 1u);
}

TEST(ReadBlock, DependenciesFollowTheDataPath) {
  auto flag = make_input<bool>();
  flag->write(true);
  auto a = make_input<long>();
  a->write(100);
  auto b = make_input<long>();
  b->write(200);
  auto out = make_input<long>();
  Computation c = run([&] {
    read_block([&](Block& blk) {
      const bool f = blk.get(flag.get());
      write(out.get(), f ? blk.get(a.get()) : blk.get(b.get()));
    });
  });
  EXPECT_EQ(out->value(), 100);
  EXPECT_TRUE(audit_trace(c).clean());

  // Not linked to b: changing it moves nothing.
  write(b.get(), 201L);
  propagate(c);
  EXPECT_EQ(c.metrics_sample().readers_reexecuted, 0u);

  // Flip the branch: links are rebuilt from what the body actually read.
  write(flag.get(), false);
  propagate(c);
  EXPECT_EQ(out->value(), 201);
  EXPECT_EQ(c.metrics_sample().readers_reexecuted, 1u);
  EXPECT_TRUE(audit_trace(c).clean());

  // Now a is the unlinked one.
  write(a.get(), 101L);
  propagate(c);
  EXPECT_EQ(c.metrics_sample().readers_reexecuted, 0u);
  EXPECT_EQ(out->value(), 201);

  write(b.get(), 300L);
  propagate(c);
  EXPECT_EQ(out->value(), 300);
  EXPECT_TRUE(audit_trace(c).clean());
}

TEST(ReadBlock, RepeatGetsRecordOnce) {
  auto a = make_input<int>();
  a->write(7);
  auto out = make_input<int>();
  Computation c = run([&] {
    read_block([&](Block& blk) {
      int s = blk.get(a.get()) + blk.get(a.get());
      write(out.get(), s);
    });
  });
  EXPECT_EQ(out->value(), 14);
  auto rs = readers_of(c);
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs[0]->mods.size(), 1u);
  EXPECT_EQ(rs[0]->recorded->arity(), 1u);
}

TEST(Parfor, ArmsReadAndWriteIndependently) {
  const size_t n = 8;
  InputArray<long> in(n);
  InputArray<long> out(n);
  for (size_t i = 0; i < n; ++i) in[i]->write(static_cast<long>(i));
  Computation c = run([&] {
    parfor(0, n, [&](size_t i) {
      read(in[i], [&, i](long v) { write(out[i], v * v); });
    });
  });
  for (size_t i = 0; i < n; ++i)
    EXPECT_EQ(out[i]->value(), static_cast<long>(i * i));
  EXPECT_TRUE(audit_trace(c).clean());

  write(in[3], 10L);
  write(in[6], 20L);
  propagate(c);
  EXPECT_EQ(out[3]->value(), 100);
  EXPECT_EQ(out[6]->value(), 400);
  EXPECT_EQ(c.metrics_sample().readers_reexecuted, 2u);
  EXPECT_TRUE(audit_trace(c).clean());
}

TEST(VisitLog, TraversalStaysInsideTheAffectedClosure) {
  MiniSum s({1, 2, 3, 4, 5, 6, 7, 8});
  s.comp.visit_log().enable(true);
  write(s.in[2], 30L);
  propagate(s.comp);
  auto events = s.comp.visit_log().events();
  ASSERT_FALSE(events.empty());

  auto allowed = reexec_closure_ids(s.comp);
  for (uint64_t id : visited_ids(events))
    EXPECT_TRUE(allowed.count(id)) << "visited node " << id
                                   << " is neither re-executed nor an ancestor";
  EXPECT_TRUE(sequential_order_violations(s.comp).empty());
  EXPECT_EQ(visited_ids(events).size(),
            s.comp.metrics_sample().nodes_visited);
}

TEST(Epochs, InputBatchesAcrossPropagationsOverwriteFreely) {
  auto m = make_input<int>();
  m->write(1);
  auto out = make_input<int>();
  Computation c = run([&] {
    read(m.get(), [&](int v) { write(out.get(), v + 1); });
  });
  for (int round = 0; round < 5; ++round) {
    write(m.get(), 10 + round);
    propagate(c);
    EXPECT_EQ(out->value(), 11 + round);
  }
  EXPECT_TRUE(audit_trace(c).clean());
}

}  // namespace
