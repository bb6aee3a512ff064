// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Size-tiered log-structured hash table over bucketed runs; the comparison
// baseline. Inserts buffer one block of entries in memory and flush as a
// level-1 run; when a level accumulates lambda runs they merge into one run
// on the next level, so level L holds runs of exactly B_e * lambda^(L-1)
// entries. Queries probe the buffer, then every run of every level newest to
// oldest, verifying full keys through the key-value log; the first verified
// match wins (last write wins).
#ifndef BOAH_ST_LSM_HPP
#define BOAH_ST_LSM_HPP

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

class StLsm {
 public:
  // lambda >= 2 is the growth factor; n_max bounds the total insert count
  // (hash independence degree is sized from it).
  StLsm(BlockStore& store, std::uint32_t lambda, std::uint64_t n_max,
        std::uint64_t seed = 0);

  void insert(std::string_view key, std::string_view value);
  std::optional<std::string> query(std::string_view key);

  std::uint64_t size() const { return size_; }
  std::size_t entries_per_block() const { return be_; }
  std::uint32_t lambda() const { return lambda_; }
  std::size_t buffered() const { return buffer_.size(); }
  // Runs per level, index 0 = level 1 (newest data).
  std::vector<std::size_t> run_counts() const;
  const std::vector<std::vector<BucketedRun>>& levels() const {
    return levels_;
  }
  void destroy();

 private:
  void flush_buffer();

  BlockStore* store_;
  std::uint32_t lambda_;
  std::uint64_t n_max_;
  HashFamily hash_;
  KvLog log_;
  std::size_t be_;
  std::uint64_t size_ = 0;
  std::vector<Entry> buffer_;
  // levels_[i] = level i+1; runs ordered oldest to newest.
  std::vector<std::vector<BucketedRun>> levels_;
};

}  // namespace boah

#endif  // BOAH_ST_LSM_HPP
