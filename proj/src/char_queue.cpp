// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/char_queue.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <utility>

namespace boah {

namespace {

constexpr std::uint64_t kFlushEvery = 1024;  // records between byte drains

// Worst-case encoded bits per record: a full-width prefix varint plus the
// raw character columns.
std::uint64_t worst_bits_per_record(unsigned prefix_len, unsigned cover,
                                    unsigned char_bits) {
  const unsigned payload = char_bits - 1;
  const unsigned varint_max =
      std::max<unsigned>(1, ceil_div(prefix_len * char_bits, payload));
  return static_cast<std::uint64_t>(varint_max + 2ULL * cover) * char_bits;
}

QueueRun alloc_run(BlockStore& store, const Alphabet& alpha,
                   unsigned prefix_len, unsigned cover,
                   std::uint64_t max_entries) {
  if (alpha.char_bits() < 2)
    throw std::invalid_argument("alphabet too small for varint prefixes");
  if (2ULL * cover * alpha.char_bits() > 128)
    throw std::invalid_argument("sketch columns exceed record capacity");
  const std::uint64_t worst_bits =
      std::max<std::uint64_t>(max_entries, 1) *
      worst_bits_per_record(prefix_len, cover, alpha.char_bits());
  QueueRun run;
  run.blocks =
      std::max<std::uint64_t>(1, ceil_div(ceil_div(worst_bits, 8),
                                          store.block_bytes()));
  run.ext = store.alloc(run.blocks);
  run.prefix_len = prefix_len;
  run.cover = cover;
  return run;
}

}  // namespace

QueueRunWriter::QueueRunWriter(BlockStore& store, const Alphabet& alpha,
                               unsigned prefix_len, unsigned cover,
                               std::uint64_t max_entries)
    : store_(&store),
      char_bits_(alpha.char_bits()),
      prefix_len_(prefix_len),
      cover_(cover),
      max_entries_(max_entries),
      run_(alloc_run(store, alpha, prefix_len, cover, max_entries)),
      app_(store, run_.ext, 0) {}

void QueueRunWriter::add(const QueueRecord& rec) {
  if (count_ >= max_entries_)
    throw CorruptionError("queue run writer over declared capacity");
  if (rec.prefix < prev_prefix_)
    throw CorruptionError("queue run records out of order");
  bits_.put_varint(rec.prefix - prev_prefix_, char_bits_);
  for (unsigned t = 0; t < 2 * cover_; ++t)
    bits_.put_bits(queue_record_char(rec, t, char_bits_), char_bits_);
  prev_prefix_ = rec.prefix;
  ++count_;
  if (++pending_ >= kFlushEvery) {
    app_.append(bits_.take_full_bytes());
    pending_ = 0;
  }
}

QueueRun QueueRunWriter::finish() {
  run_.bits = bits_.bit_length();
  app_.append(bits_.take());
  app_.finish();
  run_.entries = count_;
  return run_;
}

unsigned ruler(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("ruler of zero");
  unsigned k = 0;
  while ((n & 1) == 0) {
    n >>= 1;
    ++k;
  }
  return k;
}

std::vector<unsigned> unit_series(unsigned s_max) {
  std::vector<unsigned> out;
  for (unsigned j = 2; j <= s_max; j *= 2) out.push_back(j);
  return out;
}

std::vector<SurplusSlot> surplus_partition(unsigned j, unsigned s_max) {
  std::vector<SurplusSlot> out;
  const unsigned cover = 1u << ruler(j);
  for (unsigned m = j + 1; m <= j + cover - 1;) {
    const unsigned cm = 1u << ruler(m);
    if (m <= s_max) out.push_back(SurplusSlot{m, m - j, cm});
    m += cm;
  }
  return out;
}

namespace {

// Sequential decoder of one run; yields records tagged with the run's rank.
class RunCursor final : public QueueRecordCursor {
 public:
  RunCursor(BlockStore& store, const QueueRun& run, std::uint64_t rank,
            unsigned char_bits)
      : run_(run),
        rank_(rank),
        char_bits_(char_bits),
        bits_(store, run.ext, 0, ceil_div(run.bits, 8)) {}

  bool next(QueueRecord& out) override {
    if (i_ >= run_.entries) return false;
    prev_ += bits_.get_varint(char_bits_);
    out = QueueRecord{};
    out.prefix = prev_;
    out.ord = (rank_ << 40) | i_;
    for (unsigned t = 0; t < 2 * run_.cover; ++t)
      set_queue_record_char(
          out, t, char_bits_,
          static_cast<std::uint32_t>(bits_.get_bits(char_bits_)));
    ++i_;
    return true;
  }

 private:
  QueueRun run_;
  std::uint64_t rank_;
  unsigned char_bits_;
  StoreBitReader bits_;
  std::uint64_t prev_ = 0;
  std::uint64_t i_ = 0;
};

// Tournament merge over child cursors; (prefix, ord) is a strict total
// order because ord embeds the rank and position.
class HeapCursor final : public QueueRecordCursor {
 public:
  explicit HeapCursor(std::vector<std::unique_ptr<QueueRecordCursor>> srcs)
      : srcs_(std::move(srcs)) {
    for (std::size_t i = 0; i < srcs_.size(); ++i) {
      QueueRecord r;
      if (srcs_[i]->next(r)) heap_.push(Item{r, i});
    }
  }

  bool next(QueueRecord& out) override {
    if (heap_.empty()) return false;
    Item top = heap_.top();
    heap_.pop();
    out = top.rec;
    QueueRecord r;
    if (srcs_[top.src]->next(r)) heap_.push(Item{r, top.src});
    return true;
  }

 private:
  struct Item {
    QueueRecord rec;
    std::size_t src;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      if (a.rec.prefix != b.rec.prefix) return a.rec.prefix > b.rec.prefix;
      return a.rec.ord > b.rec.ord;
    }
  };

  std::vector<std::unique_ptr<QueueRecordCursor>> srcs_;
  std::priority_queue<Item, std::vector<Item>, Later> heap_;
};

// Owns extents that must be freed once the merged stream is consumed.
class OwningCursor final : public QueueRecordCursor {
 public:
  OwningCursor(BlockStore& store, std::unique_ptr<QueueRecordCursor> inner,
               std::vector<QueueRun> temp_runs)
      : store_(&store), inner_(std::move(inner)), temps_(std::move(temp_runs)) {}

  ~OwningCursor() override {
    inner_.reset();
    for (const QueueRun& r : temps_) store_->free_extent(r.ext);
  }

  bool next(QueueRecord& out) override { return inner_->next(out); }

 private:
  BlockStore* store_;
  std::unique_ptr<QueueRecordCursor> inner_;
  std::vector<QueueRun> temps_;
};

class EmptyCursor final : public QueueRecordCursor {
 public:
  bool next(QueueRecord&) override { return false; }
};

// Streams a merged packed array, freeing it on destruction.
class ArrayCursor final : public QueueRecordCursor {
 public:
  explicit ArrayCursor(PackedArray<QueueRecord> a) : a_(a) {}
  ~ArrayCursor() override { a_.destroy(); }

  bool next(QueueRecord& out) override {
    if (i_ >= a_.count) return false;
    a_.read(i_, out);
    ++i_;
    return true;
  }

 private:
  PackedArray<QueueRecord> a_;
  std::uint64_t i_ = 0;
};

struct QueueRecordLess {
  bool operator()(const QueueRecord& a, const QueueRecord& b) const {
    if (a.prefix != b.prefix) return a.prefix < b.prefix;
    return a.ord < b.ord;
  }
};

std::unique_ptr<QueueRecordCursor> make_heap_cursor(
    BlockStore& store, const Alphabet& alpha, const std::vector<QueueRun>& runs,
    std::size_t base_rank, std::size_t fan_in_cap,
    std::vector<QueueRun>& temps) {
  if (runs.size() <= fan_in_cap) {
    std::vector<std::unique_ptr<QueueRecordCursor>> srcs;
    srcs.reserve(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i)
      srcs.push_back(std::make_unique<RunCursor>(store, runs[i], base_rank + i,
                                                 alpha.char_bits()));
    return std::make_unique<HeapCursor>(std::move(srcs));
  }
  // Reduce consecutive groups into temporary runs; group order preserves
  // global (prefix, age) order because ranks stay consecutive.
  std::vector<QueueRun> reduced;
  for (std::size_t i = 0; i < runs.size();) {
    std::vector<QueueRun> group;
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < fan_in_cap && i < runs.size(); ++k, ++i) {
      group.push_back(runs[i]);
      total += runs[i].entries;
    }
    if (group.size() == 1) {
      reduced.push_back(group[0]);
      continue;
    }
    auto merged = make_heap_cursor(store, alpha, group, 0, fan_in_cap, temps);
    QueueRunWriter w(store, alpha, group[0].prefix_len, group[0].cover, total);
    QueueRecord rec;
    while (merged->next(rec)) w.add(rec);
    QueueRun out = w.finish();
    temps.push_back(out);
    reduced.push_back(out);
  }
  return make_heap_cursor(store, alpha, reduced, 0, fan_in_cap, temps);
}

}  // namespace

std::unique_ptr<QueueRecordCursor> merge_queue_runs(
    BlockStore& store, const Alphabet& alpha, const std::vector<QueueRun>& runs,
    QueueMergeMode mode, std::size_t fan_in_cap, FunnelStats* funnel_stats) {
  if (runs.empty()) return std::make_unique<EmptyCursor>();
  for (const QueueRun& r : runs)
    if (r.prefix_len != runs[0].prefix_len || r.cover != runs[0].cover)
      throw CorruptionError("queue series runs disagree on geometry");
  if (runs.size() == 1)
    return std::make_unique<RunCursor>(store, runs[0], 0, alpha.char_bits());

  if (mode == QueueMergeMode::kFunnel) {
    std::vector<PackedArray<QueueRecord>> arrays;
    arrays.reserve(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
      PackedArray<QueueRecord> a =
          PackedArray<QueueRecord>::alloc(store, runs[i].entries);
      RunCursor rc(store, runs[i], i, alpha.char_bits());
      QueueRecord rec;
      while (rc.next(rec)) a.push(rec);
      arrays.push_back(a);
    }
    PackedArray<QueueRecord> merged = partial_funnelsort<QueueRecord>(
        store, std::move(arrays), QueueRecordLess{}, funnel_stats);
    return std::make_unique<ArrayCursor>(merged);
  }

  const std::size_t cap = std::max<std::size_t>(2, fan_in_cap);
  std::vector<QueueRun> temps;
  auto inner = make_heap_cursor(store, alpha, runs, 0, cap, temps);
  return std::make_unique<OwningCursor>(store, std::move(inner),
                                        std::move(temps));
}

}  // namespace boah
