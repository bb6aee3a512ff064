// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "boah/bucketed_run.hpp"
#include "doctest.h"

using namespace boah;

namespace {

std::vector<Entry> random_sorted_entries(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Entry> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = Entry{rng(), i, 0};
  std::sort(v.begin(), v.end(), [](const Entry& a, const Entry& b) {
    return a.fingerprint < b.fingerprint;
  });
  return v;
}

BucketedRun build_from(BlockStore& store, std::vector<Entry> v) {
  VectorCursor cur(v);
  return BucketedRun::build(store, cur, v.size());
}

std::vector<Entry> drain(EntryCursor& c) {
  std::vector<Entry> out;
  Entry e;
  while (c.next(e)) out.push_back(e);
  return out;
}

bool same_entries(const std::vector<Entry>& a, const std::vector<Entry>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].fingerprint != b[i].fingerprint || a[i].payload != b[i].payload ||
        a[i].prev_run != b[i].prev_run)
      return false;
  return true;
}

}  // namespace

TEST_CASE("build: bucket geometry and occupancy match a bucketing oracle") {
  BlockStore store({512, 1 << 16, ""});
  // 85 entries at 24 bytes each over 512-byte blocks: q = ceil(2040/512) = 4.
  auto v = random_sorted_entries(85, 1);
  BucketedRun run = build_from(store, v);
  CHECK(run.entries() == 85);
  CHECK(run.buckets() == 4);
  std::vector<std::uint32_t> oracle(4, 0);
  std::uint32_t max_load = 0;
  for (const Entry& e : v) {
    std::uint64_t b = scale_to_buckets(Fingerprint{e.fingerprint}, 4);
    max_load = std::max(max_load, ++oracle[b]);
  }
  CHECK(run.slot_capacity() == max_load);
  // Every entry is found where the oracle says it lives.
  for (const Entry& e : v) {
    auto got = run.lookup(Fingerprint{e.fingerprint});
    REQUIRE(!got.empty());
    CHECK(got[0].payload == e.payload);
  }
}

TEST_CASE("build: empty input") {
  BlockStore store({512, 1 << 16, ""});
  std::vector<Entry> none;
  BucketedRun run = build_from(store, none);
  CHECK(run.entries() == 0);
  CHECK(run.buckets() == 1);
  CHECK(run.lookup(Fingerprint{12345}).empty());
  CHECK(run.lookup_prefix(0, 0).empty());
}

TEST_CASE("build: all-identical fingerprints") {
  BlockStore store({512, 1 << 16, ""});
  // Small degenerate input stays under the skew threshold: F = n.
  std::vector<Entry> small(16, Entry{42, 0, 0});
  for (std::size_t i = 0; i < small.size(); ++i) small[i].payload = i;
  BucketedRun run = build_from(store, small);
  CHECK(run.slot_capacity() == 16);
  auto got = run.lookup(Fingerprint{42});
  CHECK(got.size() == 16);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].payload == i);

  // Large forced skew overflows threshold * entries-per-block.
  std::vector<Entry> big(2048, Entry{42, 0, 0});
  VectorCursor cur(big);
  CHECK_THROWS_AS(BucketedRun::build(store, cur, big.size()), SkewError);
}

TEST_CASE("lookup: agrees with a linear-scan oracle, absent keys cheap") {
  BlockStore store({4096, 1 << 16, ""});
  auto v = random_sorted_entries(5000, 2);
  BucketedRun run = build_from(store, v);
  std::map<std::uint64_t, std::vector<std::uint64_t>> oracle;
  for (const Entry& e : v) oracle[e.fingerprint].push_back(e.payload);
  for (std::size_t i = 0; i < v.size(); i += 7) {
    auto got = run.lookup(Fingerprint{v[i].fingerprint});
    const auto& want = oracle[v[i].fingerprint];
    REQUIRE(got.size() == want.size());
    for (std::size_t j = 0; j < got.size(); ++j)
      CHECK(got[j].payload == want[j]);
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t probe = rng();
    if (oracle.count(probe)) continue;
    CHECK(run.lookup(Fingerprint{probe}).empty());
  }
}

TEST_CASE("lookup: absent fingerprint costs at most 2 block reads") {
  // The bound holds when every slot fits in one block (F * 24 <= B). Random
  // input cannot guarantee that (mean bucket load is already ~B/24), so build
  // a bucket-balanced input: exactly 170 fingerprints per bucket at n=5100,
  // B=4096 (q = ceil(5100*24/4096) = 30, 170*24 = 4080 <= 4096).
  BlockStore store({4096, 2 * 4096, ""});  // tiny cache, probes mostly cold
  constexpr std::uint64_t kBuckets = 30, kPerBucket = 170;
  std::mt19937_64 fill(4);
  std::vector<std::uint64_t> load(kBuckets, 0);
  std::set<std::uint64_t> fps;
  while (fps.size() < kBuckets * kPerBucket) {
    std::uint64_t fp = fill();
    std::uint64_t b = scale_to_buckets(Fingerprint{fp}, kBuckets);
    if (load[b] == kPerBucket || !fps.insert(fp).second) continue;
    ++load[b];
  }
  std::vector<Entry> v;
  std::uint64_t payload = 0;
  for (std::uint64_t fp : fps) v.push_back(Entry{fp, payload++, 0});
  BucketedRun run = build_from(store, v);
  REQUIRE(run.buckets() == kBuckets);
  REQUIRE(run.slot_capacity() == kPerBucket);
  REQUIRE(run.slot_capacity() * kEntryBytes <= 4096);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    IoStats before = store.stats();
    run.lookup(Fingerprint{rng()});
    IoStats d = store.stats() - before;
    CHECK(d.block_reads <= 2);
  }
}

TEST_CASE("lookup: mean block reads per probe at desk scale") {
  BlockStore store({4096, 1 << 16, ""});
  auto v = random_sorted_entries(1 << 14, 6);
  BucketedRun run = build_from(store, v);
  std::mt19937_64 rng(7);
  store.reset_stats();
  const int probes = 2000;
  for (int i = 0; i < probes; ++i) {
    if (i & 1) {
      run.lookup(Fingerprint{v[rng() % v.size()].fingerprint});
    } else {
      run.lookup(Fingerprint{rng()});
    }
  }
  double mean = double(store.stats().block_reads) / probes;
  CHECK(mean <= 2.0);
}

TEST_CASE("lookup_prefix: planted sharers come back in order") {
  BlockStore store({512, 1 << 16, ""});
  auto v = random_sorted_entries(400, 8);
  // Plant three entries sharing a 12-bit prefix.
  const std::uint64_t prefix = 0xabc;
  std::vector<Entry> planted = {{(prefix << 52) | 5, 100, 0},
                                {(prefix << 52) | 9, 101, 0},
                                {(prefix << 52) | 700, 102, 0}};
  for (const Entry& e : planted) v.push_back(e);
  std::sort(v.begin(), v.end(), [](const Entry& a, const Entry& b) {
    return a.fingerprint < b.fingerprint;
  });
  BucketedRun run = build_from(store, v);
  auto got = run.lookup_prefix(prefix, 12);
  // Brute-force oracle over the input.
  std::vector<Entry> want;
  for (const Entry& e : v)
    if ((e.fingerprint >> 52) == prefix) want.push_back(e);
  REQUIRE(got.size() == want.size());
  CHECK(got.size() >= 3);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].fingerprint == want[i].fingerprint);
    CHECK(got[i].payload == want[i].payload);
  }
}

TEST_CASE("lookup_prefix: full-width equals lookup, empty prefix scans all") {
  BlockStore store({512, 1 << 16, ""});
  auto v = random_sorted_entries(300, 9);
  BucketedRun run = build_from(store, v);
  const Entry& probe = v[123];
  auto a = run.lookup_prefix(probe.fingerprint, 64);
  auto b = run.lookup(Fingerprint{probe.fingerprint});
  CHECK(same_entries(a, b));
  auto all = run.lookup_prefix(0, 0);
  CHECK(same_entries(all, v));
}

TEST_CASE("scan returns the whole run in fingerprint order") {
  BlockStore store({512, 1 << 16, ""});
  auto v = random_sorted_entries(777, 10);
  BucketedRun run = build_from(store, v);
  auto cur = run.scan();
  CHECK(same_entries(drain(*cur), v));
}

TEST_CASE("merge: identity on one input") {
  BlockStore store({512, 1 << 16, ""});
  auto v = random_sorted_entries(100, 11);
  std::vector<std::unique_ptr<EntryCursor>> inputs;
  inputs.push_back(std::make_unique<VectorCursor>(v));
  auto merged = merge_entry_streams(store, std::move(inputs), {100}, 8);
  CHECK(same_entries(drain(*merged), v));
}

TEST_CASE("merge: single pass equals the sort oracle, ties keep input order") {
  BlockStore store({512, 8 * 512, ""});
  std::vector<std::unique_ptr<EntryCursor>> inputs;
  std::vector<std::uint64_t> sizes;
  std::vector<Entry> all;
  std::mt19937_64 rng(12);
  for (int r = 0; r < 4; ++r) {
    std::vector<Entry> v(64);
    for (auto& e : v) {
      e.fingerprint = rng() % 97;  // dense values force ties across runs
      e.payload = (std::uint64_t(r) << 32) | (rng() & 0xffffffff);
    }
    std::stable_sort(v.begin(), v.end(), [](const Entry& a, const Entry& b) {
      return a.fingerprint < b.fingerprint;
    });
    for (const Entry& e : v) all.push_back(e);
    sizes.push_back(v.size());
    inputs.push_back(std::make_unique<VectorCursor>(std::move(v)));
  }
  // Oracle: stable sort of the concatenation in input order.
  std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
    return a.fingerprint < b.fingerprint;
  });
  auto merged = merge_entry_streams(store, std::move(inputs), sizes, 16);
  CHECK(same_entries(drain(*merged), all));
}

TEST_CASE("merge: multiset preserved on random shapes") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    BlockStore store({512, 4 * 512, ""});
    std::vector<std::unique_ptr<EntryCursor>> inputs;
    std::vector<std::uint64_t> sizes;
    std::multiset<std::uint64_t> want;
    std::size_t k = 2 + rng() % 9;
    for (std::size_t r = 0; r < k; ++r) {
      auto v = random_sorted_entries(rng() % 2000, 1000 + trial * 10 + r);
      for (const Entry& e : v) want.insert(e.fingerprint);
      sizes.push_back(v.size());
      inputs.push_back(std::make_unique<VectorCursor>(std::move(v)));
    }
    auto merged =
        merge_entry_streams(store, std::move(inputs), sizes, 2 + rng() % 6);
    std::multiset<std::uint64_t> got;
    Entry e;
    std::uint64_t prev = 0;
    bool first = true;
    while (merged->next(e)) {
      if (!first) CHECK(prev <= e.fingerprint);
      prev = e.fingerprint;
      first = false;
      got.insert(e.fingerprint);
    }
    CHECK(got == want);
  }
}

TEST_CASE("merge: fan-in 64 at 8 cache frames stays near two data passes") {
  const std::size_t kB = 4096;
  BlockStore store({kB, 8 * kB, ""});
  const int runs = 64;
  const std::uint64_t per_run = 512;
  std::vector<std::unique_ptr<EntryCursor>> inputs;
  std::vector<std::uint64_t> sizes;
  std::vector<PackedRun> packed;
  std::mt19937_64 rng(14);
  for (int r = 0; r < runs; ++r) {
    auto v = random_sorted_entries(per_run, 2000 + r);
    PackedRun p(store, per_run);
    for (const Entry& e : v) p.append(e);
    p.finish();
    packed.push_back(std::move(p));
  }
  for (const PackedRun& p : packed) {
    inputs.push_back(p.cursor());
    sizes.push_back(p.entries());
  }
  store.reset_stats();
  auto merged =
      merge_entry_streams(store, std::move(inputs), sizes, 8 - 1);
  std::uint64_t total = 0;
  Entry e;
  std::uint64_t prev = 0;
  while (merged->next(e)) {
    CHECK(prev <= e.fingerprint);
    prev = e.fingerprint;
    ++total;
  }
  CHECK(total == per_run * runs);
  const std::uint64_t data_blocks =
      ceil_div(total * kEntryBytes, kB);  // 192
  CHECK(store.stats().transfers() <= std::uint64_t(2.5 * 2 * data_blocks));
  for (PackedRun& p : packed) p.destroy();
}

TEST_CASE("space bound: q * F stays within 4x of n across seeds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BlockStore store({512, 1 << 16, ""});
    const std::size_t n = 1 << 12;
    auto v = random_sorted_entries(n, 42 + seed);
    BucketedRun run = build_from(store, v);
    CHECK(run.buckets() * run.slot_capacity() <= 4 * n);
  }
}

TEST_CASE("build IO is proportional to the data size") {
  const std::size_t kB = 512;
  BlockStore store({kB, 4 * kB, ""});
  const std::size_t n = 1 << 13;
  auto v = random_sorted_entries(n, 15);
  store.reset_stats();
  BucketedRun run = build_from(store, v);
  const std::uint64_t data_blocks = ceil_div(n * kEntryBytes, kB);
  // Two passes (spill + layout) plus slot padding and metadata.
  CHECK(store.stats().transfers() <= 6 * data_blocks + 16);
  CHECK(run.entries() == n);
}
