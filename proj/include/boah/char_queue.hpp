// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Character queues: per-level stores of the sketch characters future level
// merges will need, organized in series on the ruler schedule. Series
// sigma_j holds, for every fingerprint below the owning level, a batch of
// 2^ruler(j) extension characters (those following the level-j prefix) and
// the matching check characters, keyed by the level-j prefix. When level j-1
// merges into level j, sigma_j's runs are merged; the first column feeds the
// level-j filter batch and the remaining columns are re-batched into the
// deeper series of level j's queue.
//
// A queue run is a bit-packed extent: per record a delta-encoded prefix
// (varint in c-bit characters, first record delta from zero) followed by
// `cover` raw extension characters and `cover` raw check characters. Records
// are ordered by (prefix, age); runs within a series are oldest first, so a
// stable merge keyed by (prefix, run rank, position) reproduces log order.
#ifndef BOAH_CHAR_QUEUE_HPP
#define BOAH_CHAR_QUEUE_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "boah/block_store.hpp"
#include "boah/charcode.hpp"
#include "boah/fingerprint.hpp"
#include "boah/funnel.hpp"

namespace boah {

// Fixed 32-byte record used while merging queue runs. ord packs
// (run rank << 40 | position) so lexicographic (prefix, ord) order equals
// (prefix, age) order. chars holds 2*cover c-bit characters: extension
// characters first, then check characters.
struct QueueRecord {
  std::uint64_t prefix = 0;
  std::uint64_t ord = 0;
  std::uint64_t chars[2] = {0, 0};
};
static_assert(sizeof(QueueRecord) == 32);
static_assert(std::is_trivially_copyable_v<QueueRecord>);

inline std::uint32_t queue_record_char(const QueueRecord& r, unsigned idx,
                                       unsigned char_bits) {
  const unsigned b = idx * char_bits;
  const unsigned w = b >> 6;
  const unsigned off = b & 63;
  std::uint64_t v = r.chars[w] >> off;
  if (off + char_bits > 64) v |= r.chars[w + 1] << (64 - off);
  return static_cast<std::uint32_t>(v & ((1ULL << char_bits) - 1));
}

inline void set_queue_record_char(QueueRecord& r, unsigned idx,
                                  unsigned char_bits, std::uint32_t ch) {
  const unsigned b = idx * char_bits;
  const unsigned w = b >> 6;
  const unsigned off = b & 63;
  r.chars[w] |= static_cast<std::uint64_t>(ch) << off;
  if (off + char_bits > 64)
    r.chars[w + 1] |= static_cast<std::uint64_t>(ch) >> (64 - off);
}

// Metadata for one stored run of a series (the extent holds the bits).
struct QueueRun {
  ExtentId ext{};
  std::uint64_t blocks = 0;
  std::uint64_t entries = 0;
  std::uint64_t bits = 0;    // encoded bit length
  unsigned prefix_len = 0;   // characters per prefix
  unsigned cover = 0;        // sketch columns (ext+check pairs) per record
};

// Writes one run; the extent is sized for the worst-case encoding up front
// and filled through whole-block appends.
class QueueRunWriter {
 public:
  QueueRunWriter(BlockStore& store, const Alphabet& alpha, unsigned prefix_len,
                 unsigned cover, std::uint64_t max_entries);

  // Records must arrive in nondecreasing prefix order.
  void add(const QueueRecord& rec);
  QueueRun finish();

 private:
  BlockStore* store_;
  unsigned char_bits_;
  unsigned prefix_len_;
  unsigned cover_;
  std::uint64_t max_entries_;
  QueueRun run_;
  BitWriter bits_;
  BlockAppender app_;
  std::uint64_t prev_prefix_ = 0;
  std::uint64_t count_ = 0;
  unsigned pending_ = 0;
};

// Pull stream of queue records in (prefix, age) order.
class QueueRecordCursor {
 public:
  virtual ~QueueRecordCursor() = default;
  virtual bool next(QueueRecord& out) = 0;
};

// Largest k with 2^k dividing n. Throws std::invalid_argument on n = 0.
unsigned ruler(std::uint64_t n);

// Series created when a fresh unit enters level 1: every power of two in
// [2, s_max] (level i holds sigma_j exactly while i is within
// [j - 2^ruler(j), j - 1], and i = 1 selects the powers of two).
std::vector<unsigned> unit_series(unsigned s_max);

// One target series receiving surplus columns when sigma_j is consumed.
struct SurplusSlot {
  unsigned level = 0;  // series index m in the target level's queue
  unsigned col = 0;    // first source column (m - j)
  unsigned cover = 0;  // columns taken: 2^ruler(m)
};

// Ruler partition of the surplus columns [1, 2^ruler(j) - 1] of a consumed
// series sigma_j; block starts satisfy m - j = 2^ruler(m) exactly, so the
// slots tile the surplus. Slots with level > s_max are omitted (their
// columns are never consumed).
std::vector<SurplusSlot> surplus_partition(unsigned j, unsigned s_max);

enum class QueueMergeMode {
  kBoundedHeap,  // tournament merge, fan-in capped, multi-pass
  kFunnel,       // cache-oblivious K-funnel over materialized records
};

// Merges the runs of one series into a single (prefix, age)-ordered stream.
// All runs must share prefix_len and cover and be listed oldest first. The
// caller keeps ownership of the input runs; temporaries created for capped
// or funnel merging are freed when the cursor is destroyed. funnel_stats
// may be null.
std::unique_ptr<QueueRecordCursor> merge_queue_runs(
    BlockStore& store, const Alphabet& alpha, const std::vector<QueueRun>& runs,
    QueueMergeMode mode, std::size_t fan_in_cap, FunnelStats* funnel_stats);

}  // namespace boah

#endif  // BOAH_CHAR_QUEUE_HPP
