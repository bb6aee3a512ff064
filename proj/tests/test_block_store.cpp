// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstring>
#include <random>
#include <vector>

#include "boah/block_store.hpp"
#include "doctest.h"

using namespace boah;

namespace {

std::vector<std::byte> pattern_block(std::size_t n, std::uint64_t seed) {
  std::vector<std::byte> v(n);
  std::mt19937_64 rng(seed);
  for (auto& b : v) b = std::byte(rng() & 0xff);
  return v;
}

}  // namespace

TEST_CASE("open: cache frame arithmetic") {
  BlockStore a({4096, 65536, ""});
  CHECK(a.cache_frames() == 16);
  BlockStore b({4096, 1u << 22, ""});
  CHECK(b.cache_frames() == 1024);
}

TEST_CASE("open: invalid configs rejected") {
  CHECK_THROWS_AS(BlockStore({4096, 4096, ""}), std::invalid_argument);
  CHECK_THROWS_AS(BlockStore({3000, 1 << 20, ""}), std::invalid_argument);
  CHECK_THROWS_AS(BlockStore({256, 1 << 20, ""}), std::invalid_argument);
  CHECK_THROWS_AS(BlockStore({4096, 4096 * 2 + 1, ""}), std::invalid_argument);
}

TEST_CASE("open: counters start zeroed") {
  BlockStore s({4096, 65536, ""});
  CHECK(s.stats().block_reads == 0);
  CHECK(s.stats().block_writes == 0);
  CHECK(s.stats().cache_hits == 0);
  CHECK(s.stats().bytes_moved == 0);
}

TEST_CASE("alloc: zeroed contiguous extents, invalid sizes rejected") {
  BlockStore s({512, 4096, ""});
  ExtentId e = s.alloc(1);
  std::vector<std::byte> buf(512, std::byte{0xff});
  s.read_block(e, 0, buf);
  for (std::byte b : buf) CHECK(b == std::byte{0});
  CHECK_THROWS_AS(s.alloc(0), std::invalid_argument);

  // Two allocations are disjoint: writes to one never show in the other.
  ExtentId f = s.alloc(2);
  CHECK_FALSE(e == f);
  auto ones = pattern_block(512, 7);
  s.write_block(f, 0, ones);
  s.read_block(e, 0, buf);
  for (std::byte b : buf) CHECK(b == std::byte{0});
}

TEST_CASE("read/write: warm cache hits are free") {
  BlockStore s({512, 4096, ""});
  ExtentId e = s.alloc(4);
  auto data = pattern_block(512, 1);
  s.write_block(e, 1, data);
  IoStats before = s.stats();
  std::vector<std::byte> out(512);
  s.read_block(e, 1, out);  // frame is still resident
  IoStats d = s.stats() - before;
  CHECK(d.block_reads == 0);
  CHECK(d.cache_hits == 1);
  CHECK(std::memcmp(out.data(), data.data(), 512) == 0);

  // Re-reading twice in a row: second read is a hit.
  before = s.stats();
  s.read_block(e, 2, out);
  s.read_block(e, 2, out);
  d = s.stats() - before;
  CHECK(d.block_reads == 1);
  CHECK(d.cache_hits == 1);
}

TEST_CASE("read/write: out-of-range addresses rejected") {
  BlockStore s({512, 4096, ""});
  ExtentId e = s.alloc(2);
  std::vector<std::byte> buf(512);
  CHECK_THROWS(s.read_block(e, 2, buf));
  CHECK_THROWS(s.read_block(ExtentId{99}, 0, buf));
}

TEST_CASE("sequential scan of an L-byte extent, cold cache, charges ceil(L/B) reads") {
  const std::size_t kB = 512;
  BlockStore s({kB, 4 * kB, ""});  // M far below L
  const std::uint64_t blocks = 64;
  ExtentId e = s.alloc(blocks);
  s.reset_stats();
  std::vector<std::byte> buf(kB);
  for (std::uint64_t b = 0; b < blocks; ++b) s.read_block(e, b, buf);
  CHECK(s.stats().block_reads == blocks);

  // Byte-granular scan in odd-sized chunks costs the same.
  BlockStore t({kB, 4 * kB, ""});
  const std::uint64_t l_bytes = blocks * kB - 100;
  ExtentId f = t.alloc(blocks);
  t.reset_stats();
  std::vector<std::byte> chunk(1000);
  for (std::uint64_t off = 0; off < l_bytes; off += chunk.size()) {
    std::size_t n = std::min<std::uint64_t>(chunk.size(), l_bytes - off);
    t.read_bytes(f, off, std::span(chunk.data(), n));
  }
  CHECK(t.stats().block_reads == ceil_div(l_bytes, kB));
}

TEST_CASE("LRU: resident working set charges no further reads") {
  BlockStore s({512, 8 * 512, ""});
  ExtentId e = s.alloc(8);
  std::vector<std::byte> buf(512);
  for (int b = 0; b < 8; ++b) s.read_block(e, b, buf);
  IoStats before = s.stats();
  for (int round = 0; round < 10; ++round)
    for (int b = 0; b < 8; ++b) s.read_block(e, b, buf);
  IoStats d = s.stats() - before;
  CHECK(d.block_reads == 0);
  CHECK(d.cache_hits == 80);
}

TEST_CASE("LRU: eviction order is least-recently-used") {
  BlockStore s({512, 2 * 512, ""});  // 2 frames
  ExtentId e = s.alloc(3);
  std::vector<std::byte> buf(512);
  s.read_block(e, 0, buf);  // cache: {0}
  s.read_block(e, 1, buf);  // cache: {0,1}
  s.read_block(e, 0, buf);  // touch 0; LRU victim is now 1
  s.read_block(e, 2, buf);  // evicts 1
  IoStats before = s.stats();
  s.read_block(e, 0, buf);  // still resident
  CHECK((s.stats() - before).block_reads == 0);
  before = s.stats();
  s.read_block(e, 1, buf);  // was evicted
  CHECK((s.stats() - before).block_reads == 1);
}

TEST_CASE("dirty eviction charges exactly one write") {
  BlockStore s({512, 2 * 512, ""});
  ExtentId e = s.alloc(4);
  auto data = pattern_block(512, 3);
  s.write_block(e, 0, data);  // dirty frame, no fetch (whole block)
  IoStats before = s.stats();
  std::vector<std::byte> buf(512);
  s.read_block(e, 1, buf);
  s.read_block(e, 2, buf);  // forces eviction of block 0 (dirty)
  IoStats d = s.stats() - before;
  CHECK(d.block_writes == 1);
  // Clean evictions don't write.
  before = s.stats();
  s.read_block(e, 3, buf);  // evicts a clean frame
  d = s.stats() - before;
  CHECK(d.block_writes == 0);
}

TEST_CASE("whole-block write allocates the frame without a fetch") {
  BlockStore s({512, 2 * 512, ""});
  ExtentId e = s.alloc(1);
  s.reset_stats();
  auto data = pattern_block(512, 4);
  s.write_block(e, 0, data);
  CHECK(s.stats().block_reads == 0);

  // A partial write to a never-written block zero-fills the frame for free:
  // allocation guarantees zeroed contents, so there is nothing to fetch.
  BlockStore t({512, 2 * 512, ""});
  ExtentId f = t.alloc(1);
  t.reset_stats();
  std::byte small[16] = {};
  small[0] = std::byte{0xAB};
  t.write_bytes(f, 100, small);
  CHECK(t.stats().block_reads == 0);
  // The untouched remainder of the block still reads back as zeros.
  std::vector<std::byte> back(512);
  t.read_block(f, 0, back);
  CHECK(back[99] == std::byte{0});
  CHECK(back[100] == std::byte{0xAB});
  CHECK(back[116] == std::byte{0});
}

TEST_CASE("partial write to a previously written block read-modifies-writes") {
  // Two frames; touch two other blocks to evict block 0 after its first
  // write, then a partial write to block 0 must fetch it back (one read).
  BlockStore s({512, 2 * 512, ""});
  ExtentId e = s.alloc(3);
  auto data = pattern_block(512, 9);
  s.write_block(e, 0, data);
  s.write_block(e, 1, data);
  s.write_block(e, 2, data);  // block 0 evicted (dirty -> written back)
  s.reset_stats();
  std::byte small[16] = {};
  s.write_bytes(e, 100, small);
  CHECK(s.stats().block_reads == 1);
  // The rest of block 0 keeps its original contents.
  std::vector<std::byte> back(512);
  s.read_block(e, 0, back);
  CHECK(back[99] == data[99]);
  CHECK(back[116] == data[116]);
}

TEST_CASE("stats snapshot and reset") {
  BlockStore s({512, 4096, ""});
  ExtentId e = s.alloc(1);
  std::vector<std::byte> buf(512);
  s.read_block(e, 0, buf);
  CHECK(s.stats().block_reads == 1);
  s.reset_stats();
  CHECK(s.stats().block_reads == 0);
  CHECK(s.stats().block_writes == 0);
  CHECK(s.stats().cache_hits == 0);
  CHECK(s.stats().bytes_moved == 0);
}

TEST_CASE("data round-trips bit-exactly through eviction and reload") {
  BlockStore s({512, 2 * 512, ""});
  ExtentId e = s.alloc(32);
  std::vector<std::vector<std::byte>> blocks;
  for (int b = 0; b < 32; ++b) {
    blocks.push_back(pattern_block(512, 100 + b));
    s.write_block(e, b, blocks.back());
  }
  // Every frame has been evicted several times by now.
  std::vector<std::byte> buf(512);
  for (int b = 0; b < 32; ++b) {
    s.read_block(e, b, buf);
    CHECK(std::memcmp(buf.data(), blocks[b].data(), 512) == 0);
  }
}

TEST_CASE("byte IO round-trips across block boundaries") {
  BlockStore s({512, 4 * 512, ""});
  ExtentId e = s.alloc(4);
  auto data = pattern_block(1500, 9);
  s.write_bytes(e, 300, data);
  std::vector<std::byte> out(1500);
  s.read_bytes(e, 300, out);
  CHECK(std::memcmp(out.data(), data.data(), 1500) == 0);
}

TEST_CASE("file-backed store persists across close and reopen") {
  const char* path = "/tmp/boah_test_store.bin";
  std::remove(path);
  std::vector<std::byte> data = pattern_block(512, 77);
  {
    BlockStore s({512, 2 * 512, path});
    CHECK(s.file_backed());
    ExtentId e = s.alloc(8);
    CHECK(e.value == 0);
    for (int b = 0; b < 8; ++b) {
      auto blk = pattern_block(512, 200 + b);
      s.write_block(e, b, blk);
    }
    s.write_block(e, 0, data);
    s.flush();
  }
  {
    BlockStore s({512, 2 * 512, path});
    CHECK(s.extent_count() == 1);
    CHECK(s.extent_blocks(ExtentId{0}) == 8);
    std::vector<std::byte> out(512);
    s.read_block(ExtentId{0}, 0, out);
    CHECK(std::memcmp(out.data(), data.data(), 512) == 0);
    std::vector<std::byte> b7(512);
    s.read_block(ExtentId{0}, 7, b7);
    auto expect = pattern_block(512, 207);
    CHECK(std::memcmp(b7.data(), expect.data(), 512) == 0);
  }
  std::remove(path);
}

TEST_CASE("free_extent drops cached frames without write-back") {
  BlockStore s({512, 8 * 512, ""});
  ExtentId e = s.alloc(4);
  auto data = pattern_block(512, 5);
  for (int b = 0; b < 4; ++b) s.write_block(e, b, data);
  IoStats before = s.stats();
  s.free_extent(e);
  IoStats d = s.stats() - before;
  CHECK(d.block_writes == 0);
  std::vector<std::byte> buf(512);
  CHECK_THROWS(s.read_block(e, 0, buf));
}

TEST_CASE("access trace is independent of cache size") {
  auto run = [](std::size_t cache_bytes) {
    BlockStore s({512, cache_bytes, ""});
    ExtentId e = s.alloc(16);
    AccessTrace tr;
    s.set_trace(&tr);
    std::mt19937_64 rng(11);
    std::vector<std::byte> buf(64);
    for (int i = 0; i < 500; ++i) {
      std::uint64_t off = rng() % (16 * 512 - 64);
      if (rng() & 1) {
        s.write_bytes(e, off, buf);
      } else {
        s.read_bytes(e, off, buf);
      }
    }
    return tr;
  };
  AccessTrace small = run(2 * 512);
  AccessTrace large = run(64 * 512);
  CHECK(small.accesses == large.accesses);
  CHECK(small.digest == large.digest);
}
