// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Bundle-of-trees hash table. Key/value bytes go to a side log; the table
// proper stores (fingerprint, payload) records in an append-only fingerprint
// log cut into fixed units, one routing tree per level routing fingerprints
// to units, and per-level character queues scheduling the sketch characters
// future merges need (see char_queue.hpp).
//
// Geometry: B_e = block_bytes/16 records per block; a unit holds
// E_b = B_e * s records (s blocks) under the bounded-fan-in strategy and
// B_e records (one block) under the funnel strategy, where
// s = ceil(log_lambda(n_max / B_e)) is the level count. A height-h node's
// filter keys on PL(h) = h + 1 + ceil(log_lambda E_b) characters, keeping
// filter slots per entry at or above lambda. Levels fill oldest-deepest:
// when a level's root reaches degree lambda it merges into the next level —
// the root becomes a child of the target root, the target filter absorbs
// one batch from the consumed series, and the queues shift down.
//
// The constructor enforces the character budget: the deepest prefix plus
// extension character index (T) and the deepest check character (D) must
// together fit the 64/c characters of a fingerprint.
#ifndef BOAH_BOT_HPP
#define BOAH_BOT_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "boah/block_store.hpp"
#include "boah/char_queue.hpp"
#include "boah/fingerprint.hpp"
#include "boah/kv_log.hpp"
#include "boah/routing_tree.hpp"

namespace boah {

enum class MergeStrategy {
  kBoundedFanIn,  // heap merges capped by cache frames
  kFunnel,        // cache-oblivious funnel merges, one-block units
};

struct BotConfig {
  std::uint32_t lambda = 16;
  std::uint64_t n_max = 1ULL << 20;
  std::uint64_t seed = 0;
  MergeStrategy strategy = MergeStrategy::kBoundedFanIn;
};

// One (fingerprint, payload) record of the fingerprint log.
struct BotLogRecord {
  std::uint64_t fingerprint = 0;
  std::uint64_t payload = 0;
};

// Append-only record log addressed by whole units.
class FingerprintLog {
 public:
  FingerprintLog(BlockStore& store, std::uint64_t unit_records,
                 std::uint64_t units_per_segment = 64);

  std::uint64_t append_unit(const std::vector<BotLogRecord>& recs);
  void read_unit(std::uint64_t unit, std::vector<BotLogRecord>& out) const;
  std::uint64_t units() const { return units_; }
  std::uint64_t unit_records() const { return unit_records_; }
  void destroy();

 private:
  BlockStore* store_;
  std::uint64_t unit_records_;
  std::uint64_t unit_bytes_;
  std::uint64_t units_per_segment_;
  std::uint64_t units_ = 0;
  std::vector<ExtentId> segs_;
};

struct BotQueryStats {
  std::uint64_t queries = 0;
  std::uint64_t nodes_accessed = 0;  // filters probed across descents
  std::uint64_t level_visits = 0;    // nonempty levels descended
  std::uint64_t leaf_refs = 0;       // surviving unit references
  std::uint64_t units_scanned = 0;   // units actually read
};

// Per-level tallies of the characters consumed by merges into that level;
// the ruler schedule makes chars/fingerprints exactly 2^ruler(level).
struct LevelMergeStats {
  std::uint64_t merges = 0;
  std::uint64_t fingerprints = 0;
  std::uint64_t sketch_chars = 0;
  bool uniform_cover = true;  // every consumed run had cover 2^ruler(level)
};

class BotTable {
 public:
  BotTable(BlockStore& store, const BotConfig& config);

  void insert(std::string_view key, std::string_view value);
  std::optional<std::string> query(std::string_view key);

  // Synthetic-workload path: payload is caller-defined, no key/value bytes
  // are stored, queries go through query_fingerprint.
  void insert_hashed(Fingerprint f, std::uint64_t payload);
  std::optional<std::uint64_t> query_fingerprint(Fingerprint f);

  Fingerprint fingerprint(std::string_view key) const {
    return hash_.fingerprint(key);
  }

  std::uint64_t size() const { return size_; }
  unsigned levels() const { return s_; }
  std::uint64_t unit_records() const { return unit_records_; }
  unsigned prefix_len(unsigned height) const { return p_len_[height]; }
  // Root degree per level (0 when empty), index 1..levels().
  std::vector<unsigned> level_degrees() const;

  const BotQueryStats& query_stats() const { return query_stats_; }
  void reset_query_stats() { query_stats_ = BotQueryStats{}; }
  // Index j in [1, levels()]; [0] unused.
  const std::vector<LevelMergeStats>& schedule_stats() const {
    return schedule_stats_;
  }
  const FunnelStats& funnel_stats() const { return funnel_stats_; }
  // Store transfers for character-queue maintenance: run creation at unit
  // arrival plus level merges (series merging, surplus re-batching, and the
  // merged stream's filter batch emission, which shares the same pass).
  const IoStats& queue_io() const { return queue_io_; }

  // Structural audit: non-root internal degrees equal lambda, heights
  // descend by one, filter counts match subtree capacity, unit ids are in
  // range. Throws CorruptionError on violation.
  void audit_tree() const;

  void destroy();

 private:
  struct Level {
    bool live = false;
    std::uint64_t root = 0;  // arena node id when live
    // Series runs by index j, oldest first.
    std::unordered_map<unsigned, std::vector<QueueRun>> queue;
  };

  void add_unit();
  void merge_level(unsigned i);
  std::uint64_t ensure_root(unsigned level);
  // Calls fn(payload) for each record matching f, newest first, until fn
  // returns true; returns whether fn stopped the walk.
  template <class Fn>
  bool for_each_candidate(Fingerprint f, Fn&& fn);

  BlockStore* store_;
  BotConfig cfg_;
  Alphabet alpha_;
  HashFamily hash_;
  KvLog kv_;
  unsigned s_ = 0;
  std::uint64_t be_ = 0;            // records per block
  std::uint64_t unit_records_ = 0;  // E_b
  std::uint64_t pivot_target_ = 1;
  std::vector<unsigned> p_len_;  // by height, [0] unused
  ExtentId header_;

  std::unique_ptr<FingerprintLog> log_;
  RoutingTreeArena arena_;
  std::vector<Level> levels_;  // [0] unused
  std::vector<BotLogRecord> buffer_;
  std::uint64_t size_ = 0;

  BotQueryStats query_stats_;
  std::vector<LevelMergeStats> schedule_stats_;
  FunnelStats funnel_stats_;
  IoStats queue_io_;
};

}  // namespace boah

#endif  // BOAH_BOT_HPP
