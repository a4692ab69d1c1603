// Trace-model basics: marking, the write guard, recorded-value records, and
// tree walks over hand-built node structures.

#include <gtest/gtest.h>

#include <memory>
#include <thread>
#include <tuple>
#include <vector>

#include "sac/core.hpp"

namespace {

using namespace sac;

// Hand-built three-node chain: root -> mid -> leaf.
struct Chain {
  Node root{NodeKind::Seq, 1, nullptr, -1};
  Node mid{NodeKind::Seq, 2, &root, 0};
  RNode leaf{3, &mid, 0};
  Chain() {
    root.left = &mid;
    mid.left = &leaf;
  }
};

TEST(Mark, AscendsToRoot) {
  Chain c;
  c.leaf.mark();
  EXPECT_TRUE(c.leaf.marked.load());
  EXPECT_TRUE(c.mid.marked.load());
  EXPECT_TRUE(c.root.marked.load());
}

TEST(Mark, StopsAtAnAlreadyMarkedAncestor) {
  Chain c;
  c.mid.marked.store(true);
  c.leaf.mark();
  EXPECT_TRUE(c.leaf.marked.load());
  EXPECT_FALSE(c.root.marked.load()) << "ascent must stop at a marked node";
}

TEST(Mark, ConcurrentAscentsMarkTheWholePathOnce) {
  // A star of chains into one root; every leaf marks at once.
  Node root(NodeKind::Seq, 1, nullptr, -1);
  FanNode fan(2, &root, 0);
  root.left = &fan;
  const int k = 32;
  std::vector<std::unique_ptr<RNode>> leaves;
  for (int i = 0; i < k; ++i) {
    leaves.push_back(std::make_unique<RNode>(10 + i));
    leaves.back()->parent = &fan;
    leaves.back()->slot = i;
    fan.children.push_back(leaves.back().get());
  }
  std::vector<std::thread> threads;
  for (auto& l : leaves)
    threads.emplace_back([&l] { l->mark(); });
  for (auto& t : threads) t.join();
  EXPECT_TRUE(root.marked.load());
  EXPECT_TRUE(fan.marked.load());
  for (auto& l : leaves) EXPECT_TRUE(l->marked.load());
}

TEST(WriteGuard, FirstWriteEngagesAndEqualRewriteIsSilent) {
  detail::bump_epoch();
  auto m = std::make_unique<Modifiable<int>>();
  EXPECT_FALSE(m->written());
  m->write(3);
  EXPECT_TRUE(m->written());
  EXPECT_EQ(m->value(), 3);
  m->write(3);  // same value, same epoch: a no-op
  EXPECT_EQ(m->value(), 3);
}

TEST(WriteGuard, DifferingSecondWriteInOneEpochThrows) {
  detail::bump_epoch();
  auto m = std::make_unique<Modifiable<int>>();
  m->write(3);
  EXPECT_THROW(m->write(4), WriteOnceViolation);
  // Even when the first write of the epoch was an equal no-op.
  detail::bump_epoch();
  m->write(3);
  EXPECT_THROW(m->write(5), WriteOnceViolation);
}

TEST(WriteGuard, NextEpochMayOverwrite) {
  detail::bump_epoch();
  auto m = std::make_unique<Modifiable<int>>();
  m->write(3);
  detail::bump_epoch();
  m->write(4);
  EXPECT_EQ(m->value(), 4);
}

TEST(WriteGuard, ConcurrentEqualFirstWritesAreTolerated) {
  for (int trial = 0; trial < 100; ++trial) {
    detail::bump_epoch();
    Modifiable<int> m;
    std::thread a([&] { m.write(3); });
    std::thread b([&] { m.write(3); });
    a.join();
    b.join();
    EXPECT_EQ(m.value(), 3);
  }
}

TEST(WriteGuard, UnwrittenReadThrows) {
  Modifiable<int> m;
  EXPECT_THROW(m.value(), UnwrittenRead);
}

TEST(WriteGuard, ChangedValueFlagsAndMarksReaders) {
  detail::bump_epoch();
  Chain c;
  Modifiable<int> m;
  m.write(1);
  m.readers().insert(&c.leaf, c.leaf.id);

  detail::bump_epoch();
  m.write(1);  // equal: nobody flagged
  EXPECT_FALSE(c.leaf.affected.load());
  EXPECT_FALSE(c.root.marked.load());

  detail::bump_epoch();
  m.write(2);  // changed: reader flagged, path marked
  EXPECT_TRUE(c.leaf.affected.load());
  EXPECT_TRUE(c.mid.marked.load());
  EXPECT_TRUE(c.root.marked.load());
  m.readers().remove(&c.leaf, c.leaf.id);
}

TEST(Records, TupleRecordEqualityAndCurrency) {
  detail::bump_epoch();
  Modifiable<int> a;
  Modifiable<long> b;
  a.write(1);
  b.write(2L);
  detail::TupleRecord<int, long> rec(std::tuple<int, long>{1, 2L});
  detail::TupleRecord<int, long> same(std::tuple<int, long>{1, 2L});
  detail::TupleRecord<int, long> other(std::tuple<int, long>{1, 3L});
  EXPECT_TRUE(rec.equals(same));
  EXPECT_FALSE(rec.equals(other));
  EXPECT_EQ(rec.arity(), 2u);
  EXPECT_TRUE(rec.matches_current(0, a));
  EXPECT_TRUE(rec.matches_current(1, b));
  detail::bump_epoch();
  b.write(9L);
  EXPECT_TRUE(rec.matches_current(0, a));
  EXPECT_FALSE(rec.matches_current(1, b));
  auto copy = rec.clone();
  EXPECT_TRUE(copy->equals(rec));
}

TEST(Records, VectorRecordEquality) {
  detail::VectorRecord<int> rec({1, 2, 3});
  detail::VectorRecord<int> same({1, 2, 3});
  detail::VectorRecord<int> shorter({1, 2});
  EXPECT_TRUE(rec.equals(same));
  EXPECT_FALSE(rec.equals(shorter));
  EXPECT_EQ(rec.arity(), 3u);
}

TEST(Records, AnyRecordComparesHeterogeneousSlots) {
  detail::AnyRecord a;
  a.add(1);
  a.add(std::string("x"));
  detail::AnyRecord b;
  b.add(1);
  b.add(std::string("x"));
  detail::AnyRecord c;
  c.add(1);
  c.add(std::string("y"));
  detail::AnyRecord d;
  d.add(std::string("x"));
  d.add(1);
  EXPECT_TRUE(a.equals(b));
  EXPECT_FALSE(a.equals(c));
  EXPECT_FALSE(a.equals(d)) << "slot order and type are significant";
  EXPECT_TRUE(a.clone()->equals(a));
}

TEST(Walks, CountsHeightsAndPaths) {
  Chain c;
  EXPECT_EQ(subtree_nodes(&c.root), 3u);
  EXPECT_EQ(subtree_height(&c.root), 3u);
  EXPECT_EQ(subtree_nodes(&c.mid), 2u);
  EXPECT_EQ(subtree_height(nullptr), 0u);

  auto path = node_path(&c.leaf);
  ASSERT_EQ(path.size(), 2u);
  EXPECT_EQ(path[0], 0);
  EXPECT_EQ(path[1], 0);
  EXPECT_TRUE(node_path(&c.root).empty());
}

TEST(Walks, FanChildrenAreEnumerated) {
  Node root(NodeKind::Seq, 1, nullptr, -1);
  FanNode fan(2, &root, 0);
  root.left = &fan;
  RNode a(3, &fan, 0), b(4, &fan, 1), c(5, &fan, 2);
  fan.children = {&a, &b, &c};
  EXPECT_EQ(subtree_nodes(&root), 5u);
  EXPECT_EQ(subtree_height(&root), 3u);
  auto path = node_path(&c);
  ASSERT_EQ(path.size(), 2u);
  EXPECT_EQ(path[1], 2);
}

}  // namespace
