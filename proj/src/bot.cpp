// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/bot.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <string>

namespace boah {

namespace {

constexpr std::uint64_t kHeaderMagic = 0x31544f42;  // "BOT1"

unsigned log_lambda_ceil(std::uint64_t v, std::uint32_t lambda) {
  unsigned n = 0;
  std::uint64_t cap = 1;
  while (cap < v) {
    cap *= lambda;
    ++n;
  }
  return n;
}

std::uint64_t pow_u64(std::uint64_t base, unsigned exp) {
  std::uint64_t v = 1;
  while (exp--) v *= base;
  return v;
}

// Sorts positions [0, n) of a unit stably by a prefix of the fingerprint.
std::vector<std::uint32_t> order_by_prefix(const std::vector<BotLogRecord>& recs,
                                           const Alphabet& alpha,
                                           unsigned p_len) {
  std::vector<std::uint32_t> idx(recs.size());
  for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    return alpha.prefix(Fingerprint{recs[a].fingerprint}, p_len) <
           alpha.prefix(Fingerprint{recs[b].fingerprint}, p_len);
  });
  return idx;
}

class VectorFilterCursor final : public FilterEntryCursor {
 public:
  explicit VectorFilterCursor(std::vector<FilterEntry> v) : v_(std::move(v)) {}
  bool next(FilterEntry& out) override {
    if (i_ >= v_.size()) return false;
    out = v_[i_++];
    return true;
  }

 private:
  std::vector<FilterEntry> v_;
  std::size_t i_ = 0;
};

// Routes the surplus columns of a consumed series into per-target writers.
// Flushed one equal-prefix group at a time: each target's copy of the group
// is stably re-sorted by the extension characters that extend the prefix to
// the target's length, preserving log order within the longer prefix.
class SurplusRouter {
 public:
  SurplusRouter(BlockStore& store, const Alphabet& alpha,
                const std::vector<SurplusSlot>& slots, unsigned src_prefix_len,
                std::uint64_t total_entries)
      : alpha_(&alpha), slots_(slots) {
    writers_.reserve(slots_.size());
    for (const SurplusSlot& s : slots_)
      writers_.push_back(std::make_unique<QueueRunWriter>(
          store, alpha, src_prefix_len + s.col, s.cover, total_entries));
  }

  void flush_group(const std::vector<QueueRecord>& group, unsigned src_cover) {
    if (group.empty()) return;
    const unsigned c = alpha_->char_bits();
    std::vector<std::uint32_t> idx(group.size());
    for (std::size_t si = 0; si < slots_.size(); ++si) {
      const SurplusSlot& slot = slots_[si];
      for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
      auto ext_key = [&](std::uint32_t i) {
        std::uint64_t k = 0;
        for (unsigned t = 0; t < slot.col; ++t)
          k = (k << c) | queue_record_char(group[i], t, c);
        return k;
      };
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::uint32_t a, std::uint32_t b) {
                         return ext_key(a) < ext_key(b);
                       });
      for (std::uint32_t i : idx) {
        const QueueRecord& src = group[i];
        QueueRecord nr{};
        nr.prefix = (src.prefix << (slot.col * c)) | ext_key(i);
        for (unsigned t = 0; t < slot.cover; ++t) {
          set_queue_record_char(nr, t, c,
                                queue_record_char(src, slot.col + t, c));
          set_queue_record_char(
              nr, slot.cover + t, c,
              queue_record_char(src, src_cover + slot.col + t, c));
        }
        writers_[si]->add(nr);
      }
    }
  }

  std::vector<std::pair<unsigned, QueueRun>> finish() {
    std::vector<std::pair<unsigned, QueueRun>> out;
    for (std::size_t si = 0; si < slots_.size(); ++si)
      out.emplace_back(slots_[si].level, writers_[si]->finish());
    return out;
  }

 private:
  const Alphabet* alpha_;
  std::vector<SurplusSlot> slots_;
  std::vector<std::unique_ptr<QueueRunWriter>> writers_;
};

// Adapts the merged series stream into the target root's filter batch while
// teeing equal-prefix groups to the surplus router. The filter entry takes
// the first check column and the first extension character; the router
// consumes the rest.
class MergeFilterCursor final : public FilterEntryCursor {
 public:
  MergeFilterCursor(QueueRecordCursor& src, SurplusRouter* router,
                    std::uint32_t child, unsigned cover, unsigned char_bits)
      : src_(&src),
        router_(router),
        child_(child),
        cover_(cover),
        char_bits_(char_bits) {}

  bool next(FilterEntry& out) override {
    QueueRecord rec;
    if (!src_->next(rec)) {
      if (router_ != nullptr) {
        router_->flush_group(group_, cover_);
        group_.clear();
      }
      return false;
    }
    if (router_ != nullptr) {
      if (!group_.empty() && group_.front().prefix != rec.prefix) {
        router_->flush_group(group_, cover_);
        group_.clear();
      }
      group_.push_back(rec);
    }
    out.prefix = rec.prefix;
    out.sketch.child = child_;
    out.sketch.check = queue_record_char(rec, cover_, char_bits_);
    out.sketch.next = queue_record_char(rec, 0, char_bits_);
    ++count_;
    return true;
  }

  std::uint64_t count() const { return count_; }

 private:
  QueueRecordCursor* src_;
  SurplusRouter* router_;
  std::uint32_t child_;
  unsigned cover_;
  unsigned char_bits_;
  std::vector<QueueRecord> group_;
  std::uint64_t count_ = 0;
};

}  // namespace

FingerprintLog::FingerprintLog(BlockStore& store, std::uint64_t unit_records,
                               std::uint64_t units_per_segment)
    : store_(&store),
      unit_records_(unit_records),
      unit_bytes_(unit_records * 16),
      units_per_segment_(units_per_segment) {
  if (unit_bytes_ % store.block_bytes() != 0)
    throw std::invalid_argument("log unit is not whole blocks");
}

std::uint64_t FingerprintLog::append_unit(
    const std::vector<BotLogRecord>& recs) {
  if (recs.size() != unit_records_)
    throw std::invalid_argument("log unit record count mismatch");
  const std::uint64_t seg = units_ / units_per_segment_;
  const std::uint64_t slot = units_ % units_per_segment_;
  if (seg == segs_.size())
    segs_.push_back(store_->alloc(units_per_segment_ * unit_bytes_ /
                                  store_->block_bytes()));
  std::vector<std::byte> raw(unit_bytes_);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    store_le64(raw.data() + 16 * i, recs[i].fingerprint);
    store_le64(raw.data() + 16 * i + 8, recs[i].payload);
  }
  store_->write_bytes(segs_[seg], slot * unit_bytes_, raw);
  return units_++;
}

void FingerprintLog::read_unit(std::uint64_t unit,
                               std::vector<BotLogRecord>& out) const {
  if (unit >= units_) throw std::out_of_range("log unit out of range");
  const std::uint64_t seg = unit / units_per_segment_;
  const std::uint64_t slot = unit % units_per_segment_;
  std::vector<std::byte> raw(unit_bytes_);
  store_->read_bytes(segs_[seg], slot * unit_bytes_, raw);
  out.resize(unit_records_);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].fingerprint = load_le64(raw.data() + 16 * i);
    out[i].payload = load_le64(raw.data() + 16 * i + 8);
  }
}

void FingerprintLog::destroy() {
  for (ExtentId e : segs_) store_->free_extent(e);
  segs_.clear();
  units_ = 0;
}

BotTable::BotTable(BlockStore& store, const BotConfig& config)
    : store_(&store),
      cfg_(config),
      alpha_(config.lambda),
      hash_(default_hash_degree(config.n_max), config.seed),
      kv_(store) {
  if (alpha_.char_bits() < 2)
    throw std::invalid_argument("lambda must be at least 4");
  if (cfg_.n_max == 0) throw std::invalid_argument("n_max must be positive");
  be_ = store.block_bytes() / 16;
  s_ = std::max(1u, log_lambda_ceil(ceil_div(cfg_.n_max, be_), cfg_.lambda));
  unit_records_ =
      cfg_.strategy == MergeStrategy::kFunnel ? be_ : be_ * s_;
  pivot_target_ = std::max<std::uint64_t>(
      1, log_lambda_ceil(cfg_.n_max, cfg_.lambda));

  const unsigned log_eb = log_lambda_ceil(unit_records_, cfg_.lambda);
  p_len_.assign(s_ + 1, 0);
  for (unsigned h = 1; h <= s_; ++h) p_len_[h] = h + 1 + log_eb;

  // Character budget: prefixes and extension characters consume the top of
  // the fingerprint, check characters the bottom; both regions must fit.
  unsigned t_chars = p_len_[1] + 1;
  unsigned d_chars = 1;
  for (unsigned j = 2; j <= s_; ++j) {
    const unsigned cover = 1u << ruler(j);
    t_chars = std::max(t_chars, p_len_[j] + cover);
    d_chars = std::max(d_chars, j + cover - 1);
  }
  if (t_chars + d_chars > alpha_.max_chars())
    throw std::invalid_argument(
        "character budget violated: prefix+extension depth T=" +
        std::to_string(t_chars) + " plus check depth D=" +
        std::to_string(d_chars) + " exceeds 64/log2(lambda)=" +
        std::to_string(alpha_.max_chars()) + " characters (lambda=" +
        std::to_string(cfg_.lambda) + ", n_max=" + std::to_string(cfg_.n_max) +
        ", block=" + std::to_string(store.block_bytes()) +
        "); reduce n_max or lambda");

  log_ = std::make_unique<FingerprintLog>(store, unit_records_);
  levels_.assign(s_ + 1, Level{});
  schedule_stats_.assign(s_ + 1, LevelMergeStats{});
  buffer_.reserve(unit_records_);

  // Parameter header block: magic, lambda, n_max, seed, strategy, block and
  // cache bytes, so a store image is self-describing.
  header_ = store.alloc(1);
  std::vector<std::byte> hdr(store.block_bytes(), std::byte{0});
  store_le64(hdr.data(), kHeaderMagic);
  store_le64(hdr.data() + 8, cfg_.lambda);
  store_le64(hdr.data() + 16, cfg_.n_max);
  store_le64(hdr.data() + 24, cfg_.seed);
  store_le64(hdr.data() + 32,
             cfg_.strategy == MergeStrategy::kFunnel ? 1 : 0);
  store_le64(hdr.data() + 40, store.block_bytes());
  store_le64(hdr.data() + 48, store.cache_frames() * store.block_bytes());
  store.write_bytes(header_, 0, hdr);
}

std::uint64_t BotTable::ensure_root(unsigned level) {
  Level& lv = levels_[level];
  if (!lv.live) {
    RefinedFilter filter(*store_, alpha_, p_len_[level],
                         pow_u64(cfg_.lambda, level) * unit_records_,
                         pivot_target_);
    lv.root = arena_.new_node(level, std::move(filter));
    lv.live = true;
  }
  return lv.root;
}

void BotTable::insert(std::string_view key, std::string_view value) {
  const std::uint64_t handle = kv_.append(key, value);
  insert_hashed(hash_.fingerprint(key), handle);
}

void BotTable::insert_hashed(Fingerprint f, std::uint64_t payload) {
  if (size_ >= cfg_.n_max) throw std::length_error("table capacity exceeded");
  buffer_.push_back(BotLogRecord{f.value, payload});
  ++size_;
  if (buffer_.size() == unit_records_) add_unit();
}

void BotTable::add_unit() {
  const std::uint64_t unit = log_->append_unit(buffer_);
  const std::uint64_t root_id = ensure_root(1);
  RoutingNode& root = arena_.node(root_id);
  const std::uint32_t child = static_cast<std::uint32_t>(root.children.size());
  root.children.push_back(unit);

  // Level-1 filter batch, ordered by (PL(1)-prefix, arrival).
  {
    std::vector<std::uint32_t> idx = order_by_prefix(buffer_, alpha_, p_len_[1]);
    std::vector<FilterEntry> batch(buffer_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Fingerprint fp{buffer_[idx[i]].fingerprint};
      batch[i].prefix = alpha_.prefix(fp, p_len_[1]);
      batch[i].sketch.child = child;
      batch[i].sketch.check = alpha_.check_char(fp, 1);
      batch[i].sketch.next = alpha_.next_char(fp, p_len_[1]);
    }
    VectorFilterCursor cur(std::move(batch));
    root.filter.insert_batch(cur, buffer_.size());
  }
  schedule_stats_[1].merges += 1;
  schedule_stats_[1].fingerprints += buffer_.size();
  schedule_stats_[1].sketch_chars += buffer_.size();

  // Fresh queue runs for the unit, one per scheduled series.
  const IoStats before = store_->stats();
  for (unsigned j : unit_series(s_)) {
    const unsigned cover = 1u << ruler(j);
    std::vector<std::uint32_t> idx = order_by_prefix(buffer_, alpha_, p_len_[j]);
    QueueRunWriter w(*store_, alpha_, p_len_[j], cover, buffer_.size());
    for (std::uint32_t i : idx) {
      const Fingerprint f{buffer_[i].fingerprint};
      QueueRecord rec{};
      rec.prefix = alpha_.prefix(f, p_len_[j]);
      for (unsigned t = 0; t < cover; ++t) {
        set_queue_record_char(rec, t, alpha_.char_bits(),
                              alpha_.next_char(f, p_len_[j] + t));
        set_queue_record_char(rec, cover + t, alpha_.char_bits(),
                              alpha_.check_char(f, j + t));
      }
      w.add(rec);
    }
    levels_[1].queue[j].push_back(w.finish());
  }
  queue_io_ = queue_io_ + (store_->stats() - before);

  buffer_.clear();
  if (arena_.node(root_id).children.size() == cfg_.lambda && s_ > 1)
    merge_level(1);
}

void BotTable::merge_level(unsigned i) {
  if (i >= s_) throw CorruptionError("merge beyond deepest level");
  Level& src = levels_[i];
  RoutingNode& src_root = arena_.node(src.root);
  if (src_root.children.size() != cfg_.lambda)
    throw CorruptionError("merge of a level that is not full");
  const unsigned j = i + 1;
  const unsigned cover = 1u << ruler(j);

  // (a) merge the consumed series' runs into one ordered stream.
  auto it = src.queue.find(j);
  if (it == src.queue.end() || it->second.empty())
    throw CorruptionError("consumed series missing from queue");
  std::vector<QueueRun> consumed = std::move(it->second);
  src.queue.erase(it);
  std::uint64_t total = 0;
  for (const QueueRun& r : consumed) {
    if (r.prefix_len != p_len_[j] || r.cover != cover) {
      schedule_stats_[j].uniform_cover = false;
      throw CorruptionError("queue series geometry mismatch");
    }
    total += r.entries;
  }

  const std::uint64_t target_id = ensure_root(j);
  const std::uint32_t child = static_cast<std::uint32_t>(
      arena_.node(target_id).children.size());
  if (child >= cfg_.lambda)
    throw CorruptionError("target level already full");

  const IoStats before = store_->stats();
  const std::size_t cap =
      std::max<std::size_t>(2, store_->cache_frames() > 1
                                   ? store_->cache_frames() - 1
                                   : 2);
  auto stream = merge_queue_runs(
      *store_, alpha_, consumed,
      cfg_.strategy == MergeStrategy::kFunnel ? QueueMergeMode::kFunnel
                                              : QueueMergeMode::kBoundedHeap,
      cap, &funnel_stats_);

  // (b) + (c): feed the target filter and re-batch surplus columns.
  std::vector<SurplusSlot> slots = surplus_partition(j, s_);
  std::unique_ptr<SurplusRouter> router;
  if (!slots.empty())
    router = std::make_unique<SurplusRouter>(*store_, alpha_, slots, p_len_[j],
                                             total);
  MergeFilterCursor batch(*stream, router.get(), child, cover,
                          alpha_.char_bits());
  arena_.node(target_id).filter.insert_batch(batch, total);
  if (batch.count() != total)
    throw CorruptionError("merged series shorter than declared");
  stream.reset();  // frees merge temporaries before the consumed runs
  for (const QueueRun& r : consumed) store_->free_extent(r.ext);
  if (router) {
    for (auto& [level, run] : router->finish())
      levels_[j].queue[level].push_back(run);
  }

  // (d) transfer the remaining series run-wise, oldest kept first.
  for (auto& [sj, runs] : src.queue) {
    auto& dst = levels_[j].queue[sj];
    dst.insert(dst.end(), runs.begin(), runs.end());
  }
  src.queue.clear();
  queue_io_ = queue_io_ + (store_->stats() - before);

  schedule_stats_[j].merges += 1;
  schedule_stats_[j].fingerprints += total;
  schedule_stats_[j].sketch_chars += total * cover;

  // (e) the source root becomes the new child without moving subtrees.
  arena_.node(target_id).children.push_back(src.root);
  src.live = false;
  src.root = 0;

  if (arena_.node(target_id).children.size() == cfg_.lambda && j < s_)
    merge_level(j);
}

template <class Fn>
bool BotTable::for_each_candidate(Fingerprint f, Fn&& fn) {
  for (auto it = buffer_.rbegin(); it != buffer_.rend(); ++it)
    if (it->fingerprint == f.value && fn(it->payload)) return true;

  std::vector<BotLogRecord> unit;
  for (unsigned lvl = 1; lvl <= s_; ++lvl) {
    if (!levels_[lvl].live) continue;
    ++query_stats_.level_visits;
    DescentStats ds;
    std::vector<LeafRef> refs =
        descend(arena_, levels_[lvl].root, f, alpha_, p_len_, &ds);
    query_stats_.nodes_accessed += ds.nodes_accessed;
    query_stats_.leaf_refs += ds.leaf_refs;
    for (const LeafRef& ref : refs) {
      log_->read_unit(ref.unit, unit);
      ++query_stats_.units_scanned;
      for (auto it = unit.rbegin(); it != unit.rend(); ++it)
        if (it->fingerprint == f.value && fn(it->payload)) return true;
    }
  }
  return false;
}

std::optional<std::string> BotTable::query(std::string_view key) {
  ++query_stats_.queries;
  const Fingerprint f = hash_.fingerprint(key);
  std::optional<std::string> result;
  for_each_candidate(f, [&](std::uint64_t payload) {
    std::optional<std::string> v = kv_.value_if_key(payload, key);
    if (!v) return false;
    result = std::move(v);
    return true;
  });
  return result;
}

std::optional<std::uint64_t> BotTable::query_fingerprint(Fingerprint f) {
  ++query_stats_.queries;
  std::optional<std::uint64_t> result;
  for_each_candidate(f, [&](std::uint64_t payload) {
    result = payload;
    return true;
  });
  return result;
}

std::vector<unsigned> BotTable::level_degrees() const {
  std::vector<unsigned> out(s_ + 1, 0);
  for (unsigned lvl = 1; lvl <= s_; ++lvl)
    if (levels_[lvl].live)
      out[lvl] =
          static_cast<unsigned>(arena_.node(levels_[lvl].root).children.size());
  return out;
}

void BotTable::audit_tree() const {
  for (unsigned lvl = 1; lvl <= s_; ++lvl) {
    if (!levels_[lvl].live) continue;
    // Walk the level tree; only the per-level root may be under-full.
    struct Item {
      std::uint64_t id;
      bool is_root;
    };
    std::vector<Item> stack{{levels_[lvl].root, true}};
    while (!stack.empty()) {
      Item cur = stack.back();
      stack.pop_back();
      const RoutingNode& node = arena_.node(cur.id);
      if (cur.is_root && node.height != lvl)
        throw CorruptionError("level root height mismatch");
      if (node.children.empty() || node.children.size() > cfg_.lambda)
        throw CorruptionError("node degree out of range");
      if (!cur.is_root && node.children.size() != cfg_.lambda)
        throw CorruptionError("internal node not full");
      const std::uint64_t subtree_units =
          pow_u64(cfg_.lambda, node.height - 1) * node.children.size();
      if (node.filter.count() != subtree_units * unit_records_)
        throw CorruptionError("filter count does not match subtree");
      for (std::uint64_t ch : node.children) {
        if (node.height == 1) {
          if (ch >= log_->units())
            throw CorruptionError("unit reference out of range");
        } else {
          if (ch >= arena_.size())
            throw CorruptionError("child node out of range");
          if (arena_.node(ch).height != node.height - 1)
            throw CorruptionError("child height mismatch");
          stack.push_back({ch, false});
        }
      }
    }
  }
}

void BotTable::destroy() {
  for (unsigned lvl = 1; lvl <= s_; ++lvl) {
    for (auto& [j, runs] : levels_[lvl].queue)
      for (const QueueRun& r : runs) store_->free_extent(r.ext);
    levels_[lvl].queue.clear();
    levels_[lvl].live = false;
  }
  for (std::uint64_t id = 0; id < arena_.size(); ++id)
    arena_.node(id).filter.destroy();
  if (log_) log_->destroy();
  kv_.destroy();
  store_->free_extent(header_);
  buffer_.clear();
  size_ = 0;
}

}  // namespace boah
