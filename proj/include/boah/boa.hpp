// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Bundle-of-arrays hash table: the size-tiered structure of StLsm plus one
// routing filter per level and previous-run chaining, so a query touches one
// expected run per level instead of all of them.
//
// The filter of a level with runs of n entries is a packed array of
// 2^ceil(log2(lambda * n)) slots indexed by the top bits of the fingerprint,
// giving a slot-to-entries ratio (beta) in [lambda, 2*lambda). Slot values
// are ceil(log2(lambda + 1)) bits: 0 = no run of this level contains the
// prefix, r >= 1 = the newest such run. Every entry's prev_run field points
// at the next older run containing its prefix, or at its own run index as
// the chain terminator, so the filter slot plus the chain enumerate exactly
// the runs containing a prefix, newest first.
#ifndef BOAH_BOA_HPP
#define BOAH_BOA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "boah/block_store.hpp"
#include "boah/bucketed_run.hpp"
#include "boah/fingerprint.hpp"
#include "boah/kv_log.hpp"

namespace boah {

class RoutingFilter {
 public:
  RoutingFilter() = default;
  // Sized up from min_slots to the next power of two so the slot index is a
  // fingerprint bit prefix.
  RoutingFilter(BlockStore& store, std::uint32_t lambda,
                std::uint64_t min_slots);
  RoutingFilter(RoutingFilter&&) = default;
  RoutingFilter& operator=(RoutingFilter&&) = default;

  std::uint64_t slots() const { return slots_; }
  unsigned prefix_bits() const { return prefix_bits_; }
  std::uint64_t slot_of(std::uint64_t fingerprint) const {
    return fingerprint >> (64 - prefix_bits_);
  }
  std::uint64_t prefix_of_slot(std::uint64_t slot) const {
    return slot << (64 - prefix_bits_);
  }

  std::uint32_t load(std::uint64_t slot);
  void store(std::uint64_t slot, std::uint32_t run);
  // Back to all-empty; reallocates the extent so no block IO is charged.
  void reset();
  void destroy();

 private:
  BlockStore* store_ = nullptr;
  ExtentId ext_;
  std::uint64_t slots_ = 0;
  unsigned prefix_bits_ = 0;
  unsigned slot_bits_ = 0;
  std::uint64_t slots_per_block_ = 0;
  std::uint64_t blocks_ = 0;
};

struct BoaQueryStats {
  std::uint64_t queries = 0;
  std::uint64_t filter_probes = 0;   // slot loads
  std::uint64_t runs_probed = 0;     // lookup_prefix calls (chain visits)
  std::uint64_t level_visits = 0;    // levels examined
};

class BoaTable {
 public:
  // lambda must be a power of two >= 2 (slot fields are log2(lambda)+1 bits).
  BoaTable(BlockStore& store, std::uint32_t lambda, std::uint64_t n_max,
           std::uint64_t seed = 0);

  void insert(std::string_view key, std::string_view value);
  std::optional<std::string> query(std::string_view key);

  std::uint64_t size() const { return size_; }
  std::size_t entries_per_block() const { return be_; }
  std::uint32_t lambda() const { return lambda_; }
  std::vector<std::size_t> run_counts() const;
  const std::vector<std::vector<BucketedRun>>& levels() const {
    return levels_;
  }
  RoutingFilter& filter(std::size_t level_index) {
    return filters_.at(level_index);
  }
  Fingerprint fingerprint_of(std::string_view key) const {
    return hash_.fingerprint(key);
  }
  const BoaQueryStats& query_stats() const { return qstats_; }
  void reset_query_stats() { qstats_ = BoaQueryStats{}; }
  void destroy();

 private:
  void flush_buffer();
  // Builds a run from the cursor, stamps prev_run fields and the target
  // level's filter, and appends it to that level.
  void arrive_at_level(std::size_t idx, EntryCursor& cur, std::uint64_t n);

  BlockStore* store_;
  std::uint32_t lambda_;
  std::uint64_t n_max_;
  HashFamily hash_;
  KvLog log_;
  std::size_t be_;
  std::uint64_t size_ = 0;
  std::vector<Entry> buffer_;
  std::vector<std::vector<BucketedRun>> levels_;
  std::vector<RoutingFilter> filters_;
  BoaQueryStats qstats_;
};

}  // namespace boah

#endif  // BOAH_BOA_HPP
