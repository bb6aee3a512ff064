// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Succinct per-node routing filter: one (prefix, sketch) record per
// fingerprint stored under the node, ordered by (prefix, arrival). Records
// are bit-packed with delta-encoded prefixes; a direct-address pivot table
// over a shortened prefix gives O(1)-IO point lookups.
//
// Extent layout (little endian, version 1):
//   block 0        header: magic "BFLT", version, count, list bit length,
//                  prefix length, pivot length, lambda, capacity
//   pivot region   (lambda^pivot_len + 1) fixed u32 bit offsets into the
//                  list; empty buckets carry the next nonempty bucket's
//                  offset (never scan backward), the final entry is the
//                  total bit length
//   list region    block-aligned; per entry: prefix as delta varint in c-bit
//                  characters (c-1 payload bits, top bit continues), except
//                  the first entry of each pivot bucket which stores the
//                  full prefix raw (p_len * c bits); then the sketch as
//                  three raw c-bit characters (child, check, next)
//
// The pivot length is sized from the content: the largest value keeping the
// expected bucket at or above pivot_target entries (and never above p_len),
// so the table stays a vanishing fraction of the list while buckets stay
// O(log N) entries.
#ifndef BOAH_REFINED_FILTER_HPP
#define BOAH_REFINED_FILTER_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "boah/block_store.hpp"
#include "boah/fingerprint.hpp"

namespace boah {

// Per-fingerprint routing record: which child subtree holds it, the check
// character of the node's height, and the character following the node's
// prefix (used to kill false positives during descent).
struct Sketch {
  std::uint32_t child = 0;
  std::uint32_t check = 0;
  std::uint32_t next = 0;
  friend bool operator==(const Sketch&, const Sketch&) = default;
};

struct FilterEntry {
  std::uint64_t prefix = 0;
  Sketch sketch;
};

class FilterEntryCursor {
 public:
  virtual ~FilterEntryCursor() = default;
  virtual bool next(FilterEntry& out) = 0;
};

class RefinedFilter {
 public:
  RefinedFilter() = default;
  // Starts empty. capacity bounds the entry count; pivot_target is the
  // desired expected entries per pivot bucket (about log_lambda N).
  RefinedFilter(BlockStore& store, const Alphabet& alpha, unsigned p_len,
                std::uint64_t capacity, std::uint64_t pivot_target);
  RefinedFilter(RefinedFilter&&) = default;
  RefinedFilter& operator=(RefinedFilter&&) = default;

  // Merges the batch (sorted by prefix, arrival-ordered within equal
  // prefixes, n_new entries) with the existing records: the old list is
  // decoded sequentially, the new extent written sequentially, old entries
  // first on equal prefixes. Throws CorruptionError past capacity.
  void insert_batch(FilterEntryCursor& batch, std::uint64_t n_new);

  // Sketches of all records with exactly this p_len-character prefix, in
  // arrival order.
  std::vector<Sketch> lookup(std::uint64_t prefix);

  // Streaming decode of every record in list order.
  std::unique_ptr<FilterEntryCursor> scan() const;

  std::uint64_t count() const { return count_; }
  std::uint64_t capacity() const { return capacity_; }
  unsigned prefix_len() const { return p_len_; }
  unsigned pivot_len() const { return pivot_len_; }
  std::uint64_t list_bits() const { return list_bits_; }
  ExtentId extent() const { return ext_; }
  // Cumulative c-bit characters written while encoding prefixes (raw +
  // varint), across all rebuilds; measures encoding density.
  std::uint64_t prefix_chars_written() const { return prefix_chars_; }

  void destroy();

 private:
  friend class FilterScanCursor;
  unsigned pick_pivot_len(std::uint64_t count) const;
  std::uint64_t pivot_of(std::uint64_t prefix, unsigned pivot_len) const {
    return prefix >> ((p_len_ - pivot_len) * char_bits_);
  }
  std::uint64_t pivot_buckets(unsigned pivot_len) const;
  std::uint64_t list_start_bytes(unsigned pivot_len) const;

  BlockStore* store_ = nullptr;
  std::uint32_t lambda_ = 0;
  unsigned char_bits_ = 0;
  unsigned p_len_ = 0;
  std::uint64_t capacity_ = 0;
  std::uint64_t pivot_target_ = 1;

  ExtentId ext_;
  bool has_extent_ = false;
  std::uint64_t count_ = 0;
  unsigned pivot_len_ = 0;
  std::uint64_t list_bits_ = 0;
  std::uint64_t prefix_chars_ = 0;
};

}  // namespace boah

#endif  // BOAH_REFINED_FILTER_HPP
