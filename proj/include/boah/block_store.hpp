// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Simulated external memory. Storage is an array of fixed-size blocks grouped
// into extents; in front of it sits an LRU cache of cache_bytes/block_bytes
// frames. Every transfer of one block between cache and backing is counted:
// a miss charges one read, a dirty eviction charges one write, a hit is free.
// The backing is either anonymous memory or a file.
//
// File layout: block 0 is a header (magic "BOAH1", version, block size and
// the extent table as little-endian u64 block counts); extent data follows
// as raw blocks in allocation order.
#ifndef BOAH_BLOCK_STORE_HPP
#define BOAH_BLOCK_STORE_HPP

#include <cstdint>
#include <list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "boah/common.hpp"

namespace boah {

struct StoreConfig {
  std::size_t block_bytes = 4096;  // power of two, >= 512
  std::size_t cache_bytes = 1 << 20;  // multiple of block_bytes, >= 2 blocks
  std::string path;  // empty: volatile backing
};

struct IoStats {
  std::uint64_t block_reads = 0;
  std::uint64_t block_writes = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t bytes_moved = 0;

  std::uint64_t transfers() const { return block_reads + block_writes; }
  IoStats operator-(const IoStats& o) const {
    return {block_reads - o.block_reads, block_writes - o.block_writes,
            cache_hits - o.cache_hits, bytes_moved - o.bytes_moved};
  }
  IoStats operator+(const IoStats& o) const {
    return {block_reads + o.block_reads, block_writes + o.block_writes,
            cache_hits + o.cache_hits, bytes_moved + o.bytes_moved};
  }
};

struct ExtentId {
  std::uint32_t value = 0;
  friend bool operator==(ExtentId a, ExtentId b) { return a.value == b.value; }
};

// Order-sensitive digest over the sequence of byte-level accesses. Used to
// compare access patterns across store configurations.
struct AccessTrace {
  std::uint64_t digest = 14695981039346656037ULL;
  std::uint64_t accesses = 0;

  void note(std::uint64_t op, std::uint64_t extent, std::uint64_t offset,
            std::uint64_t len) {
    std::uint64_t vals[4] = {op, extent, offset, len};
    for (std::uint64_t v : vals) {
      for (int i = 0; i < 8; ++i) {
        digest ^= (v >> (8 * i)) & 0xff;
        digest *= 1099511628211ULL;
      }
    }
    ++accesses;
  }
};

class BlockStore {
 public:
  explicit BlockStore(StoreConfig cfg);
  ~BlockStore();
  BlockStore(const BlockStore&) = delete;
  BlockStore& operator=(const BlockStore&) = delete;

  // Allocates n_blocks zeroed blocks. Addresses are stable until free_extent.
  ExtentId alloc(std::uint64_t n_blocks);
  // Drops the extent. Cached frames are discarded without write-back.
  void free_extent(ExtentId id);

  void read_block(ExtentId id, std::uint64_t block, std::span<std::byte> out);
  void write_block(ExtentId id, std::uint64_t block,
                   std::span<const std::byte> in);

  // Byte-granular IO on top of blocks. Whole-block writes allocate the frame
  // without a fetch. Partial-block writes read-modify-write, charging the
  // fetch on a miss -- except when the block has never been written since
  // allocation, in which case the frame materializes as zeros for free
  // (allocation guarantees zeroed contents, so there is nothing to fetch).
  // File-backed stores always fetch on a partial-write miss.
  void read_bytes(ExtentId id, std::uint64_t offset, std::span<std::byte> out);
  void write_bytes(ExtentId id, std::uint64_t offset,
                   std::span<const std::byte> in);

  // Writes back all dirty frames (counted); file mode also persists the
  // extent table.
  void flush();

  const IoStats& stats() const { return stats_; }
  void reset_stats() { stats_ = IoStats{}; }

  std::size_t block_bytes() const { return cfg_.block_bytes; }
  std::size_t cache_frames() const { return n_frames_; }
  std::uint64_t extent_blocks(ExtentId id) const;
  std::uint64_t extent_bytes(ExtentId id) const {
    return extent_blocks(id) * cfg_.block_bytes;
  }
  std::size_t extent_count() const { return extents_.size(); }
  // Extents allocated and not yet freed (extent ids are never reused, so
  // extent_count() only grows; this is the live subset).
  std::size_t live_extents() const;
  bool file_backed() const { return fd_ >= 0; }

  void set_trace(AccessTrace* trace) { trace_ = trace; }

 private:
  struct Extent {
    std::uint64_t start = 0;
    std::uint64_t blocks = 0;
    bool freed = false;
  };
  struct Frame {
    std::unique_ptr<std::byte[]> data;
    std::uint64_t gkey = 0;
    bool dirty = false;
  };

  const Extent& checked_extent(ExtentId id) const;
  std::uint64_t gkey_of(ExtentId id, std::uint64_t block) const;
  // Returns the frame for gkey; on a miss either fetches the backing block
  // (fetch=true) or leaves the frame content undefined for full overwrite.
  Frame& frame_for(std::uint64_t gkey, bool fetch);
  // frame_for for a read-modify-write: on a miss, fetches (and charges) only
  // if the backing block holds data; otherwise zero-fills the frame for free.
  Frame& frame_for_rmw(std::uint64_t gkey);
  void evict_one();
  void backing_read(std::uint64_t gkey, std::byte* out);
  void backing_write(std::uint64_t gkey, const std::byte* in);
  void load_file_header();
  void write_file_header();
  std::uint64_t header_capacity() const {
    return (cfg_.block_bytes - 24) / 8;
  }

  StoreConfig cfg_;
  std::size_t n_frames_ = 0;
  IoStats stats_;
  std::vector<Extent> extents_;
  std::uint64_t next_start_ = 0;

  std::vector<Frame> frames_;
  std::vector<std::size_t> free_frames_;
  std::list<std::uint64_t> lru_;  // front = most recent
  struct FrameRef {
    std::size_t idx;
    std::list<std::uint64_t>::iterator pos;
  };
  std::unordered_map<std::uint64_t, FrameRef> cached_;

  std::unordered_map<std::uint64_t, std::unique_ptr<std::byte[]>> mem_;
  int fd_ = -1;
  AccessTrace* trace_ = nullptr;
};

}  // namespace boah

#endif  // BOAH_BLOCK_STORE_HPP
