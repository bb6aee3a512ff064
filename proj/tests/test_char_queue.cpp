// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <random>
#include <tuple>
#include <vector>

#include "boah/char_queue.hpp"
#include "doctest.h"

using namespace boah;

TEST_CASE("ruler function") {
  CHECK(ruler(1) == 0);
  CHECK(ruler(2) == 1);
  CHECK(ruler(4) == 2);
  CHECK(ruler(6) == 1);
  CHECK(ruler(8) == 3);
  CHECK(ruler(12) == 2);
  CHECK(ruler(96) == 5);
  CHECK(ruler(1ull << 40) == 40);
  CHECK_THROWS_AS(ruler(0), std::invalid_argument);
  // Batch-size schedule 2^ruler(j) for j = 1..16.
  const std::vector<std::uint64_t> want = {1, 2, 1, 4, 1, 2, 1, 8,
                                           1, 2, 1, 4, 1, 2, 1, 16};
  for (std::uint64_t j = 1; j <= 16; ++j)
    CHECK((1ull << ruler(j)) == want[j - 1]);
}

TEST_CASE("series created with a fresh unit") {
  CHECK(unit_series(2) == std::vector<unsigned>{2});
  CHECK(unit_series(3) == std::vector<unsigned>{2});
  CHECK(unit_series(6) == std::vector<unsigned>{2, 4});
  CHECK(unit_series(8) == std::vector<unsigned>{2, 4, 8});
  CHECK(unit_series(1).empty());
}

TEST_CASE("surplus partition: worked examples") {
  {
    auto p = surplus_partition(4, 8);
    REQUIRE(p.size() == 2);
    CHECK(p[0].level == 5);
    CHECK(p[0].col == 1);
    CHECK(p[0].cover == 1);
    CHECK(p[1].level == 6);
    CHECK(p[1].col == 2);
    CHECK(p[1].cover == 2);
  }
  {
    auto p = surplus_partition(8, 16);
    REQUIRE(p.size() == 3);
    CHECK(p[0].level == 9);
    CHECK(p[1].level == 10);
    CHECK(p[2].level == 12);
    CHECK(p[2].col == 4);
    CHECK(p[2].cover == 4);
  }
  // Odd series carry a single column: no surplus.
  CHECK(surplus_partition(3, 8).empty());
  CHECK(surplus_partition(7, 8).empty());
  // Targets past the level count are dropped.
  auto p = surplus_partition(8, 9);
  REQUIRE(p.size() == 1);
  CHECK(p[0].level == 9);
}

TEST_CASE("surplus partition tiles the surplus columns exactly") {
  for (unsigned j = 2; j <= 64; j += 2) {
    auto p = surplus_partition(j, 128);
    const unsigned surplus = (1u << ruler(j)) - 1;
    std::vector<bool> covered(surplus + 1, false);
    for (const SurplusSlot& s : p) {
      CHECK(s.cover == (1u << ruler(s.level)));
      CHECK(s.col == s.level - j);
      for (unsigned c = s.col; c < s.col + s.cover; ++c) {
        REQUIRE(c >= 1);
        REQUIRE(c <= surplus);
        CHECK(!covered[c]);
        covered[c] = true;
      }
    }
    for (unsigned c = 1; c <= surplus; ++c) CHECK(covered[c]);
  }
}

TEST_CASE("queue record characters straddle the word boundary") {
  // c = 7: 18 characters occupy 126 of the 128 payload bits; index 9 spans
  // bits 63..69.
  QueueRecord r;
  for (unsigned i = 0; i < 18; ++i)
    set_queue_record_char(r, i, 7, (i * 13 + 5) % 128);
  for (unsigned i = 0; i < 18; ++i)
    CHECK(queue_record_char(r, i, 7) == (i * 13 + 5) % 128);
}

namespace {

// (run, pos) encoded into the extension/check characters so merged order can
// be verified: char0 = run, char1..3 = pos base-16 digits (cover = 2).
QueueRecord tagged_record(std::uint64_t prefix, unsigned run, std::uint64_t pos) {
  QueueRecord r;
  r.prefix = prefix;
  set_queue_record_char(r, 0, 4, run & 15);
  set_queue_record_char(r, 1, 4, pos & 15);
  set_queue_record_char(r, 2, 4, (pos >> 4) & 15);
  set_queue_record_char(r, 3, 4, (pos >> 8) & 15);
  return r;
}

struct Origin {
  std::uint64_t prefix;
  unsigned run;
  std::uint64_t pos;
};

std::vector<QueueRecord> drain(QueueRecordCursor& c) {
  std::vector<QueueRecord> out;
  QueueRecord r;
  while (c.next(r)) out.push_back(r);
  return out;
}

}  // namespace

TEST_CASE("writer/cursor round trip preserves records and order") {
  BlockStore store({512, 1 << 16, ""});
  Alphabet alpha(16);
  std::mt19937_64 rng(31);
  std::vector<std::uint64_t> prefixes(500);
  for (auto& p : prefixes) p = rng() % (1ull << 20);
  std::sort(prefixes.begin(), prefixes.end());
  QueueRunWriter w(store, alpha, 5, 2, prefixes.size());
  for (std::size_t i = 0; i < prefixes.size(); ++i)
    w.add(tagged_record(prefixes[i], 0, i));
  QueueRun run = w.finish();
  CHECK(run.entries == prefixes.size());
  CHECK(run.prefix_len == 5);
  CHECK(run.cover == 2);
  std::vector<QueueRun> runs{run};
  auto cur = merge_queue_runs(store, alpha, runs, QueueMergeMode::kBoundedHeap,
                              8, nullptr);
  auto got = drain(*cur);
  REQUIRE(got.size() == prefixes.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].prefix == prefixes[i]);
    CHECK(got[i].ord == i);
    CHECK(queue_record_char(got[i], 1, 4) == (i & 15));
    CHECK(queue_record_char(got[i], 2, 4) == ((i >> 4) & 15));
    CHECK(queue_record_char(got[i], 3, 4) == ((i >> 8) & 15));
  }
  store.free_extent(run.ext);
}

TEST_CASE("worst-case first prefix encodes and decodes") {
  BlockStore store({512, 1 << 16, ""});
  Alphabet alpha(16);
  const std::uint64_t max_prefix = (1ull << 20) - 1;  // lambda^5 - 1
  QueueRunWriter w(store, alpha, 5, 1, 2);
  QueueRecord r;
  r.prefix = max_prefix;
  set_queue_record_char(r, 0, 4, 9);
  set_queue_record_char(r, 1, 4, 12);
  w.add(r);
  w.add(r);  // zero delta after a maximal first delta
  QueueRun run = w.finish();
  CHECK(run.bits == (varint_chars(max_prefix, 4) + 2 + 1 + 2) * 4);
  std::vector<QueueRun> runs{run};
  auto cur = merge_queue_runs(store, alpha, runs, QueueMergeMode::kBoundedHeap,
                              8, nullptr);
  auto got = drain(*cur);
  REQUIRE(got.size() == 2);
  for (const QueueRecord& g : got) {
    CHECK(g.prefix == max_prefix);
    CHECK(queue_record_char(g, 0, 4) == 9);
    CHECK(queue_record_char(g, 1, 4) == 12);
  }
  store.free_extent(run.ext);
}

TEST_CASE("out-of-order prefixes are rejected") {
  BlockStore store({512, 1 << 16, ""});
  Alphabet alpha(16);
  QueueRunWriter w(store, alpha, 4, 1, 10);
  QueueRecord r;
  r.prefix = 100;
  w.add(r);
  r.prefix = 99;
  CHECK_THROWS_AS(w.add(r), CorruptionError);
}

TEST_CASE("merging runs with mismatched geometry is rejected") {
  BlockStore store({512, 1 << 16, ""});
  Alphabet alpha(16);
  auto mk = [&](unsigned p_len, unsigned cover) {
    QueueRunWriter w(store, alpha, p_len, cover, 4);
    QueueRecord r;
    w.add(r);
    return w.finish();
  };
  std::vector<QueueRun> bad_cover{mk(4, 1), mk(4, 2)};
  CHECK_THROWS_AS(merge_queue_runs(store, alpha, bad_cover,
                                   QueueMergeMode::kBoundedHeap, 8, nullptr),
                  CorruptionError);
  std::vector<QueueRun> bad_plen{mk(4, 1), mk(5, 1)};
  CHECK_THROWS_AS(merge_queue_runs(store, alpha, bad_plen,
                                   QueueMergeMode::kBoundedHeap, 8, nullptr),
                  CorruptionError);
}

TEST_CASE("merge is stable by (prefix, run age, position) in every mode") {
  BlockStore store({512, 1 << 20, ""});
  Alphabet alpha(16);
  std::mt19937_64 rng(32);
  const unsigned kRuns = 3;
  std::vector<QueueRun> runs;
  std::vector<Origin> origins;
  for (unsigned r = 0; r < kRuns; ++r) {
    const std::size_t n = 250 + 40 * r;
    std::vector<std::uint64_t> prefixes(n);
    for (auto& p : prefixes) p = rng() % 32;  // heavy collisions
    std::sort(prefixes.begin(), prefixes.end());
    QueueRunWriter w(store, alpha, 4, 2, n);
    for (std::size_t i = 0; i < n; ++i) {
      w.add(tagged_record(prefixes[i], r, i));
      origins.push_back({prefixes[i], r, i});
    }
    runs.push_back(w.finish());
  }
  std::stable_sort(origins.begin(), origins.end(),
                   [](const Origin& a, const Origin& b) {
                     return std::tie(a.prefix, a.run, a.pos) <
                            std::tie(b.prefix, b.run, b.pos);
                   });
  auto verify = [&](QueueMergeMode mode, std::size_t cap) {
    auto cur = merge_queue_runs(store, alpha, runs, mode, cap, nullptr);
    auto got = drain(*cur);
    REQUIRE(got.size() == origins.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      REQUIRE(got[i].prefix == origins[i].prefix);
      REQUIRE(queue_record_char(got[i], 0, 4) == origins[i].run);
      std::uint64_t pos = queue_record_char(got[i], 1, 4) |
                          (queue_record_char(got[i], 2, 4) << 4) |
                          (queue_record_char(got[i], 3, 4) << 8);
      REQUIRE(pos == origins[i].pos);
    }
  };
  const std::uint64_t extents_before = store.live_extents();
  verify(QueueMergeMode::kBoundedHeap, 8);   // single pass
  verify(QueueMergeMode::kBoundedHeap, 2);   // multi-pass with temporaries
  FunnelStats st;
  {
    auto cur =
        merge_queue_runs(store, alpha, runs, QueueMergeMode::kFunnel, 2, &st);
    auto got = drain(*cur);
    REQUIRE(got.size() == origins.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      REQUIRE(got[i].prefix == origins[i].prefix);
  }
  // Temporaries and materialized arrays are gone once cursors die.
  CHECK(store.live_extents() == extents_before);
  for (const QueueRun& r : runs) store.free_extent(r.ext);
}

TEST_CASE("merging no runs yields an empty stream") {
  BlockStore store({512, 1 << 16, ""});
  Alphabet alpha(16);
  auto cur = merge_queue_runs(store, alpha, {}, QueueMergeMode::kBoundedHeap, 8,
                              nullptr);
  QueueRecord r;
  CHECK(!cur->next(r));
}
