// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Sorted immutable run in interpolation layout. The key range is cut into q
// uniform buckets (q = ceil(n * 24 / B), so a bucket holds about one block);
// every bucket gets a fixed slot of F entries, F being the fullest bucket's
// count, so a membership probe is one address computation plus O(1) block
// reads.
//
// Extent layout (little endian, version 1):
//   block 0            header: magic "BRUN", version, n, q, F
//   blocks 1..         occupancy: q x u32 entry counts
//   slot region        q slots, each ceil(F*24/B) blocks, block aligned;
//                      occupied prefix holds the bucket's entries in
//                      fingerprint order, the tail is zero padding
#ifndef BOAH_BUCKETED_RUN_HPP
#define BOAH_BUCKETED_RUN_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "boah/block_store.hpp"
#include "boah/entry.hpp"

namespace boah {

// Input skew beyond threshold * entries-per-block in one bucket: uniform
// fingerprints essentially never do this, so treat it as bad input.
class SkewError : public std::runtime_error {
 public:
  explicit SkewError(const std::string& what) : std::runtime_error(what) {}
};

// Sequential packed entry array in a store extent; used for merge temporaries
// and the first build pass.
class PackedRun {
 public:
  PackedRun() = default;
  PackedRun(BlockStore& store, std::uint64_t capacity);
  void append(const Entry& e);
  void finish();  // flushes the tail
  std::uint64_t entries() const { return n_; }
  std::unique_ptr<EntryCursor> cursor() const;
  void destroy();

 private:
  friend class PackedRunCursor;
  BlockStore* store_ = nullptr;
  ExtentId ext_;
  std::uint64_t n_ = 0;
  std::vector<Entry> buf_;
  std::uint64_t flushed_ = 0;
};

class BucketedRun {
 public:
  static constexpr double kSkewThreshold = 8.0;

  BucketedRun() = default;
  BucketedRun(BucketedRun&&) = default;
  BucketedRun& operator=(BucketedRun&&) = default;

  // Drains `cursor` (exactly n_entries, fingerprint-ordered) through a
  // two-pass build: pass one spills to a temporary packed extent while
  // counting buckets, pass two lays out the final extent.
  static BucketedRun build(BlockStore& store, EntryCursor& cursor,
                           std::uint64_t n_entries);

  std::uint64_t entries() const { return n_; }
  std::uint64_t buckets() const { return q_; }
  std::uint32_t slot_capacity() const { return f_; }
  ExtentId extent() const { return ext_; }
  std::uint64_t extent_blocks_used() const;

  // All entries with this exact fingerprint, oldest first.
  std::vector<Entry> lookup(Fingerprint f) const;

  // All entries whose fingerprint starts with the given high bits, in
  // fingerprint order (ties oldest first).
  std::vector<Entry> lookup_prefix(std::uint64_t prefix,
                                   unsigned prefix_bits) const;

  std::unique_ptr<EntryCursor> scan() const;
  void destroy();

 private:
  friend class RunScanCursor;
  std::uint64_t bucket_of(std::uint64_t fp) const;
  std::uint64_t slot_offset(std::uint64_t b) const;
  std::vector<Entry> read_bucket(std::uint64_t b) const;

  BlockStore* store_ = nullptr;
  ExtentId ext_;
  std::uint64_t n_ = 0;
  std::uint64_t q_ = 0;
  std::uint32_t f_ = 0;
  std::uint64_t slot_region_block_ = 0;  // first slot block index
  std::uint64_t slot_stride_blocks_ = 0;
  std::vector<std::uint32_t> occupancy_;
};

// Merges sorted inputs (oldest first) into one sorted stream; equal
// fingerprints keep input order. At most fan_in_cap sources are open at once;
// wider inputs are reduced through temporary packed runs whose IO is charged
// to the store. `sizes` are per-input entry counts.
std::unique_ptr<EntryCursor> merge_entry_streams(
    BlockStore& store, std::vector<std::unique_ptr<EntryCursor>> inputs,
    std::vector<std::uint64_t> sizes, std::size_t fan_in_cap);

}  // namespace boah

#endif  // BOAH_BUCKETED_RUN_HPP
