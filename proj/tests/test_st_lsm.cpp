// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <map>
#include <random>
#include <string>
#include <vector>

#include "boah/st_lsm.hpp"
#include "doctest.h"

using namespace boah;

namespace {

std::string key_of(std::uint64_t i) { return "k" + std::to_string(i); }
std::string val_of(std::uint64_t i) { return "v" + std::to_string(i); }

}  // namespace

TEST_CASE("flush rule: B_e inserts produce one level-1 run") {
  BlockStore store({4096, 1 << 20, ""});
  StLsm t(store, 4, 1 << 16);
  const std::size_t be = t.entries_per_block();
  for (std::size_t i = 0; i + 1 < be; ++i) t.insert(key_of(i), val_of(i));
  CHECK(t.run_counts().empty());
  CHECK(t.buffered() == be - 1);
  t.insert(key_of(be - 1), val_of(be - 1));
  REQUIRE(t.run_counts().size() == 1);
  CHECK(t.run_counts()[0] == 1);
  CHECK(t.buffered() == 0);
}

TEST_CASE("merge rule: lambda * B_e inserts roll up to one level-2 run") {
  BlockStore store({4096, 1 << 20, ""});
  StLsm t(store, 4, 1 << 16);
  const std::size_t be = t.entries_per_block();
  for (std::size_t i = 0; i < 4 * be; ++i) t.insert(key_of(i), val_of(i));
  REQUIRE(t.run_counts().size() == 2);
  CHECK(t.run_counts()[0] == 0);
  CHECK(t.run_counts()[1] == 1);
  CHECK(t.levels()[1][0].entries() == 4 * be);
}

TEST_CASE("induction: lambda^2 * B_e inserts give one level-3 run") {
  BlockStore store({4096, 1 << 20, ""});
  StLsm t(store, 4, 1 << 16);
  const std::size_t be = t.entries_per_block();
  for (std::size_t i = 0; i < 16 * be; ++i) t.insert(key_of(i), val_of(i));
  REQUIRE(t.run_counts().size() == 3);
  CHECK(t.run_counts()[0] == 0);
  CHECK(t.run_counts()[1] == 0);
  CHECK(t.run_counts()[2] == 1);
  CHECK(t.levels()[2][0].entries() == 16 * be);
}

TEST_CASE("query: present, absent, and recency on duplicates") {
  BlockStore store({4096, 1 << 20, ""});
  StLsm t(store, 4, 1 << 16);
  const std::size_t n = 5 * t.entries_per_block();
  for (std::size_t i = 0; i < n; ++i) t.insert(key_of(i), val_of(i));
  for (std::size_t i = 0; i < n; i += 17) {
    auto got = t.query(key_of(i));
    REQUIRE(got.has_value());
    CHECK(*got == val_of(i));
  }
  CHECK_FALSE(t.query("never-inserted").has_value());
  // Duplicate insert: the newer value wins whether the first copy is in the
  // buffer or already flushed into runs.
  t.insert(key_of(3), "updated");
  CHECK(*t.query(key_of(3)) == "updated");
  for (std::size_t i = 0; i < 3 * t.entries_per_block(); ++i)
    t.insert(key_of(n + i), val_of(n + i));
  CHECK(*t.query(key_of(3)) == "updated");
}

TEST_CASE("capacity: n_max inserts accepted, the next rejected") {
  BlockStore store({4096, 1 << 20, ""});
  StLsm t(store, 4, 256);
  for (std::size_t i = 0; i < 256; ++i) t.insert(key_of(i), val_of(i));
  CHECK_THROWS_AS(t.insert("one-more", "x"), std::length_error);
}

TEST_CASE("oracle equivalence over mixed workloads") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    BlockStore store({4096, 1 << 20, ""});
    StLsm t(store, 4, 1 << 16, seed);
    std::map<std::string, std::string> oracle;
    std::mt19937_64 rng(seed);
    std::vector<std::string> inserted;
    for (int op = 0; op < 20000; ++op) {
      std::uint64_t r = rng();
      if (r % 100 < 50 || inserted.empty()) {
        std::string k = key_of(rng() % 4096);  // reuse keys: updates happen
        std::string v = val_of(rng());
        t.insert(k, v);
        oracle[k] = v;
        inserted.push_back(k);
      } else if (r % 100 < 75) {
        const std::string& k = inserted[rng() % inserted.size()];
        auto got = t.query(k);
        REQUIRE(got.has_value());
        CHECK(*got == oracle[k]);
      } else {
        std::string k = "absent" + std::to_string(rng());
        CHECK_FALSE(t.query(k).has_value());
      }
    }
  }
}

TEST_CASE("query IO grows with lambda at fixed N") {
  // N large enough that every lambda is mid-fill (run counts scale with
  // lambda rather than with the fill phase).
  auto mean_query_reads = [](std::uint32_t lambda) {
    BlockStore store({4096, 1 << 17, ""});
    StLsm t(store, lambda, 1 << 18, 9);
    const std::size_t n = 1 << 18;
    for (std::size_t i = 0; i < n; ++i) t.insert(key_of(i), val_of(i));
    std::mt19937_64 rng(10);
    store.reset_stats();
    const int probes = 400;
    for (int i = 0; i < probes; ++i) t.query("miss" + std::to_string(rng()));
    return double(store.stats().block_reads) / probes;
  };
  double r4 = mean_query_reads(4);
  double r16 = mean_query_reads(16);
  double r64 = mean_query_reads(64);
  CHECK(r4 < r16);
  CHECK(r16 < r64);
}
