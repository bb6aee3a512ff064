// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Append-only key-value log. Entries in runs carry only fingerprints; the full
// key and value bytes live here, addressed by the byte offset returned from
// append(). Queries verify candidate fingerprint matches against these bytes.
//
// Records are packed [u32 klen][u32 vlen][key][value] and never straddle a
// block: a record that does not fit in the current block's remainder starts at
// the next block and the gap stays zero. The current tail block is buffered in
// memory and written as one whole-block store write when it fills, so a
// sequential insert workload is charged about one block write per block of
// record bytes.
#ifndef BOAH_KV_LOG_HPP
#define BOAH_KV_LOG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "boah/block_store.hpp"

namespace boah {

class KvLog {
 public:
  explicit KvLog(BlockStore& store, std::uint64_t segment_blocks = 256);

  std::uint64_t append(std::string_view key, std::string_view value);

  // Returns the value if the record's key equals `key`.
  std::optional<std::string> value_if_key(std::uint64_t handle,
                                          std::string_view key) const;

  std::uint64_t bytes_used() const { return used_; }
  void destroy();

 private:
  void read_at(std::uint64_t off, std::span<std::byte> out) const;

  BlockStore* store_;
  std::uint64_t seg_blocks_;
  std::vector<ExtentId> segs_;
  std::uint64_t used_ = 0;        // high-water byte offset, padding included
  std::uint64_t tail_block_ = 0;  // global block index the tail buffer covers
  std::size_t tail_fill_ = 0;
  std::vector<std::byte> tail_;
};

}  // namespace boah

#endif  // BOAH_KV_LOG_HPP
