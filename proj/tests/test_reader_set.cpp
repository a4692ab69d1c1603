// Reader-registry behavior: state transitions, duplicate/missing-member
// contracts, lazy deletion, compaction, deferred batches, and concurrent
// insertion.

#include <gtest/gtest.h>

#include <algorithm>
#include <barrier>
#include <cmath>
#include <memory>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "sac/core.hpp"
#include "sac/reader_set.hpp"

namespace {

using sac::ContractViolation;
using sac::ReaderSet;
using sac::RNode;

std::unique_ptr<RNode> reader(uint64_t id) {
  return std::make_unique<RNode>(id);
}

std::vector<const RNode*> members(const ReaderSet& s) {
  std::vector<const RNode*> out;
  s.for_each([&](RNode* r) { out.push_back(r); });
  return out;
}

TEST(ReaderSet, StartsEmptyThenInlinesThenEscalates) {
  ReaderSet s;
  EXPECT_EQ(s.state(), ReaderSet::State::Empty);
  EXPECT_EQ(s.live_count(), 0u);

  auto r1 = reader(1);
  s.insert(r1.get(), r1->id);
  EXPECT_EQ(s.state(), ReaderSet::State::Inline);
  EXPECT_EQ(s.live_count(), 1u);
  EXPECT_TRUE(s.contains(r1.get(), r1->id));

  auto r2 = reader(2);
  s.insert(r2.get(), r2->id);
  EXPECT_EQ(s.state(), ReaderSet::State::Tree);
  EXPECT_EQ(s.live_count(), 2u);
  EXPECT_TRUE(s.contains(r1.get(), r1->id));
  EXPECT_TRUE(s.contains(r2.get(), r2->id));
}

TEST(ReaderSet, DuplicateInsertIsAContractBreach) {
  ReaderSet s;
  auto r1 = reader(7);
  s.insert(r1.get(), r1->id);
  EXPECT_THROW(s.insert(r1.get(), r1->id), ContractViolation);
  auto r2 = reader(8);
  s.insert(r2.get(), r2->id);  // now a tree
  EXPECT_THROW(s.insert(r2.get(), r2->id), ContractViolation);
}

TEST(ReaderSet, RemoveOfNonMemberIsAContractBreach) {
  ReaderSet s;
  auto r1 = reader(3);
  auto r2 = reader(4);
  EXPECT_THROW(s.remove(r1.get(), r1->id), ContractViolation);
  s.insert(r1.get(), r1->id);
  EXPECT_THROW(s.remove(r2.get(), r2->id), ContractViolation);
  s.remove(r1.get(), r1->id);
  EXPECT_EQ(s.state(), ReaderSet::State::Empty);
  EXPECT_THROW(s.remove(r1.get(), r1->id), ContractViolation);
}

TEST(ReaderSet, InlineRemoveReturnsToEmptyAndReinsertWorks) {
  ReaderSet s;
  auto r1 = reader(11);
  s.insert(r1.get(), r1->id);
  s.remove(r1.get(), r1->id);
  EXPECT_EQ(s.state(), ReaderSet::State::Empty);
  s.insert(r1.get(), r1->id);
  EXPECT_TRUE(s.contains(r1.get(), r1->id));
}

TEST(ReaderSet, ReinsertAfterRemoveRevivesTheEntry) {
  ReaderSet s;
  auto a = reader(1), b = reader(2), c = reader(3);
  s.insert(a.get(), a->id);
  s.insert(b.get(), b->id);
  s.insert(c.get(), c->id);
  s.remove(b.get(), b->id);
  EXPECT_FALSE(s.contains(b.get(), b->id));
  s.insert(b.get(), b->id);  // the same reader linking back later
  EXPECT_TRUE(s.contains(b.get(), b->id));
  EXPECT_EQ(s.live_count(), 3u);
  EXPECT_THROW(s.insert(b.get(), b->id), ContractViolation);
}

TEST(ReaderSet, TreeRemoveIsLazyUntilCompacted) {
  ReaderSet s;
  std::vector<std::unique_ptr<RNode>> rs;
  for (uint64_t i = 1; i <= 8; ++i) {
    rs.push_back(reader(i));
    s.insert(rs.back().get(), i);
  }
  s.remove(rs[2].get(), rs[2]->id);
  s.remove(rs[5].get(), rs[5]->id);
  EXPECT_EQ(s.state(), ReaderSet::State::Tree);
  EXPECT_EQ(s.live_count(), 6u);
  EXPECT_FALSE(s.contains(rs[2].get(), rs[2]->id));
  // Double remove of a dead entry is only tolerated when asked for.
  EXPECT_THROW(s.remove(rs[2].get(), rs[2]->id), ContractViolation);
  s.remove(rs[2].get(), rs[2]->id, /*allow_dead=*/true);

  s.compact();
  EXPECT_EQ(s.live_count(), 6u);
  for (size_t i = 0; i < rs.size(); ++i)
    EXPECT_EQ(s.contains(rs[i].get(), rs[i]->id), i != 2 && i != 5);
}

TEST(ReaderSet, CompactCollapsesSmallSets) {
  ReaderSet s;
  auto r1 = reader(21);
  auto r2 = reader(22);
  s.insert(r1.get(), r1->id);
  s.insert(r2.get(), r2->id);
  s.remove(r1.get(), r1->id);
  s.compact();
  EXPECT_EQ(s.state(), ReaderSet::State::Inline);
  EXPECT_TRUE(s.contains(r2.get(), r2->id));
  s.remove(r2.get(), r2->id);
  EXPECT_EQ(s.state(), ReaderSet::State::Empty);
}

TEST(ReaderSet, CompactRebalances) {
  ReaderSet s;
  std::vector<std::unique_ptr<RNode>> rs;
  const size_t n = 1024;
  for (uint64_t i = 1; i <= n; ++i) {
    rs.push_back(reader(i));
    s.insert(rs.back().get(), i);
  }
  for (size_t i = 0; i < n; i += 2) s.remove(rs[i].get(), rs[i]->id);
  s.compact();
  EXPECT_EQ(s.live_count(), n / 2);
  // Midpoint rebuild: depth is the ceiling log of the survivor count.
  EXPECT_LE(s.depth(), 10u);
}

TEST(ReaderSet, ForEachVisitsLiveEntriesExactlyOnce) {
  ReaderSet s;
  std::vector<std::unique_ptr<RNode>> rs;
  std::set<const RNode*> expect;
  for (uint64_t i = 1; i <= 100; ++i) {
    rs.push_back(reader(i * 977));
    s.insert(rs.back().get(), rs.back()->id);
    if (i % 3 == 0)
      s.remove(rs.back().get(), rs.back()->id);
    else
      expect.insert(rs.back().get());
  }
  auto got = members(s);
  EXPECT_EQ(got.size(), expect.size());
  EXPECT_TRUE(std::all_of(got.begin(), got.end(), [&](const RNode* r) {
    return expect.count(r) == 1;
  }));
}

// Deferred batches: traversals in between see the pre-batch membership, and
// committing is observably identical to applying the same ops eagerly.
TEST(ReaderSet, DeferredBatchCommitMatchesEagerReplay) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::unique_ptr<RNode>> rs;
    for (uint64_t i = 1; i <= 24; ++i) rs.push_back(reader(i));

    ReaderSet deferred, eager;
    std::vector<size_t> pool;  // members before the batch
    for (size_t i = 0; i < 12; ++i) {
      deferred.insert(rs[i].get(), rs[i]->id);
      eager.insert(rs[i].get(), rs[i]->id);
      pool.push_back(i);
    }

    deferred.defer_begin();
    EXPECT_THROW(deferred.defer_begin(), ContractViolation);

    std::vector<std::pair<bool, size_t>> ops;  // (is_insert, index)
    std::set<size_t> in_set(pool.begin(), pool.end());
    for (int op = 0; op < 16; ++op) {
      if (rng() % 2 == 0) {
        // insert someone currently out
        std::vector<size_t> out;
        for (size_t i = 0; i < rs.size(); ++i)
          if (in_set.count(i) == 0) out.push_back(i);
        if (out.empty()) continue;
        size_t pick = out[rng() % out.size()];
        ops.push_back({true, pick});
        in_set.insert(pick);
      } else {
        std::vector<size_t> in(in_set.begin(), in_set.end());
        if (in.empty()) continue;
        size_t pick = in[rng() % in.size()];
        ops.push_back({false, pick});
        in_set.erase(pick);
      }
    }
    for (auto [ins, i] : ops) {
      if (ins)
        deferred.insert(rs[i].get(), rs[i]->id);
      else
        deferred.remove(rs[i].get(), rs[i]->id);
    }
    // Buffered: membership unchanged so far.
    EXPECT_EQ(deferred.live_count(), pool.size());

    deferred.defer_commit();
    EXPECT_THROW(deferred.defer_commit(), ContractViolation);
    for (auto [ins, i] : ops) {
      if (ins)
        eager.insert(rs[i].get(), rs[i]->id);
      else
        eager.remove(rs[i].get(), rs[i]->id);
    }

    auto a = members(deferred);
    auto b = members(eager);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(ReaderSet, ConcurrentDistinctInsertsAllLand) {
  const int strands = 16;
  const int per_strand = 64;
  ReaderSet s;
  std::vector<std::unique_ptr<RNode>> rs;
  for (int i = 0; i < strands * per_strand; ++i)
    rs.push_back(reader(static_cast<uint64_t>(i) + 1));

  std::barrier gate(strands);
  std::vector<std::thread> threads;
  for (int t = 0; t < strands; ++t) {
    threads.emplace_back([&, t] {
      gate.arrive_and_wait();
      for (int i = 0; i < per_strand; ++i) {
        RNode* r = rs[static_cast<size_t>(t) * per_strand + i].get();
        s.insert(r, r->id);
      }
    });
  }
  for (auto& th : threads) th.join();

  EXPECT_EQ(s.live_count(), static_cast<size_t>(strands * per_strand));
  for (auto& r : rs) EXPECT_TRUE(s.contains(r.get(), r->id));
}

TEST(ReaderSet, RandomizedKeysKeepTreesShallow) {
  // Sequential ids are the adversarial case for a plain BST; hashed keys
  // should keep depth within the randomized-BST envelope.
  const size_t n = 4096;
  ReaderSet s;
  std::vector<std::unique_ptr<RNode>> rs;
  for (uint64_t i = 1; i <= n; ++i) {
    rs.push_back(reader(i));
    s.insert(rs.back().get(), i);
  }
  const double bound = 4.0 * std::log2(static_cast<double>(n));
  EXPECT_LE(s.depth(), static_cast<size_t>(bound));
}

}  // namespace
