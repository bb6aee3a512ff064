// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/bucketed_run.hpp"

#include <algorithm>
#include <cstring>
#include <optional>
#include <queue>

#include "boah/fingerprint.hpp"

namespace boah {

namespace {

constexpr std::uint32_t kRunMagic = 0x4e555242;  // "BRUN"
constexpr std::uint32_t kRunVersion = 1;
// 4096 entries = 96 KiB, a whole number of blocks for every supported block
// size, so sequential spills never read-modify-write a seam block.
constexpr std::size_t kIoChunkEntries = 4096;

void entries_to_bytes(const Entry* in, std::size_t n, std::byte* out) {
  std::memcpy(out, in, n * kEntryBytes);
}

void bytes_to_entries(const std::byte* in, std::size_t n, Entry* out) {
  std::memcpy(out, in, n * kEntryBytes);
}

}  // namespace

PackedRun::PackedRun(BlockStore& store, std::uint64_t capacity)
    : store_(&store) {
  std::uint64_t blocks = std::max<std::uint64_t>(
      1, ceil_div(capacity * kEntryBytes, store.block_bytes()));
  ext_ = store.alloc(blocks);
}

void PackedRun::append(const Entry& e) {
  buf_.push_back(e);
  ++n_;
  if (buf_.size() >= kIoChunkEntries) finish();
}

void PackedRun::finish() {
  if (buf_.empty()) return;
  std::vector<std::byte> bytes(buf_.size() * kEntryBytes);
  entries_to_bytes(buf_.data(), buf_.size(), bytes.data());
  store_->write_bytes(ext_, flushed_ * kEntryBytes, bytes);
  flushed_ += buf_.size();
  buf_.clear();
}

void PackedRun::destroy() {
  if (store_) store_->free_extent(ext_);
  store_ = nullptr;
}

class PackedRunCursor final : public EntryCursor {
 public:
  PackedRunCursor(BlockStore& store, ExtentId ext, std::uint64_t n)
      : store_(&store), ext_(ext), n_(n) {}

  bool next(Entry& out) override {
    if (i_ >= n_) return false;
    if (i_ - buf_base_ >= buf_.size()) refill();
    out = buf_[i_ - buf_base_];
    ++i_;
    return true;
  }

 private:
  void refill() {
    buf_base_ = i_;
    std::size_t n = std::min<std::uint64_t>(kIoChunkEntries, n_ - i_);
    std::vector<std::byte> bytes(n * kEntryBytes);
    store_->read_bytes(ext_, i_ * kEntryBytes, bytes);
    buf_.resize(n);
    bytes_to_entries(bytes.data(), n, buf_.data());
  }

  BlockStore* store_;
  ExtentId ext_;
  std::uint64_t n_;
  std::uint64_t i_ = 0;
  std::uint64_t buf_base_ = 0;
  std::vector<Entry> buf_;
};

std::unique_ptr<EntryCursor> PackedRun::cursor() const {
  return std::make_unique<PackedRunCursor>(*store_, ext_, n_);
}

BucketedRun BucketedRun::build(BlockStore& store, EntryCursor& cursor,
                               std::uint64_t n_entries) {
  const std::uint64_t bb = store.block_bytes();
  BucketedRun run;
  run.store_ = &store;
  run.n_ = n_entries;
  run.q_ = std::max<std::uint64_t>(1, ceil_div(n_entries * kEntryBytes, bb));
  run.occupancy_.assign(run.q_, 0);

  // Pass one: spill to a packed temporary while counting bucket loads.
  PackedRun temp(store, std::max<std::uint64_t>(n_entries, 1));
  {
    Entry e;
    std::uint64_t last_fp = 0;
    for (std::uint64_t got = 0; got < n_entries; ++got) {
      if (!cursor.next(e)) throw CorruptionError("build cursor ended early");
      if (got > 0 && e.fingerprint < last_fp)
        throw CorruptionError("build cursor out of order");
      last_fp = e.fingerprint;
      ++run.occupancy_[run.bucket_of(e.fingerprint)];
      temp.append(e);
    }
    temp.finish();
  }

  run.f_ = 0;
  for (std::uint32_t c : run.occupancy_) run.f_ = std::max(run.f_, c);
  if (run.f_ > kSkewThreshold * ceil_div(bb, kEntryBytes)) {
    temp.destroy();
    throw SkewError("bucket load " + std::to_string(run.f_) +
                    " exceeds the skew threshold for block size " +
                    std::to_string(bb));
  }

  run.slot_stride_blocks_ = std::max<std::uint64_t>(
      1, ceil_div(std::uint64_t(run.f_) * kEntryBytes, bb));
  std::uint64_t occ_blocks = ceil_div(run.q_ * 4, bb);
  run.slot_region_block_ = 1 + occ_blocks;
  run.ext_ =
      store.alloc(run.slot_region_block_ + run.q_ * run.slot_stride_blocks_);

  // Header and occupancy.
  {
    std::vector<std::byte> hdr(bb, std::byte{0});
    store_le32(hdr.data(), kRunMagic);
    store_le32(hdr.data() + 4, kRunVersion);
    store_le64(hdr.data() + 8, run.n_);
    store_le64(hdr.data() + 16, run.q_);
    store_le32(hdr.data() + 24, run.f_);
    store.write_block(run.ext_, 0, hdr);
    std::vector<std::byte> occ(run.q_ * 4);
    for (std::uint64_t b = 0; b < run.q_; ++b)
      store_le32(occ.data() + 4 * b, run.occupancy_[b]);
    store.write_bytes(run.ext_, bb, occ);
  }

  // Pass two: stream the temporary into the fixed slots.
  {
    auto in = temp.cursor();
    std::vector<Entry> bucket;
    std::vector<std::byte> bytes;
    Entry e;
    for (std::uint64_t b = 0; b < run.q_; ++b) {
      if (run.occupancy_[b] == 0) continue;
      bucket.clear();
      for (std::uint32_t i = 0; i < run.occupancy_[b]; ++i) {
        if (!in->next(e)) throw CorruptionError("temporary run ended early");
        bucket.push_back(e);
      }
      bytes.resize(bucket.size() * kEntryBytes);
      entries_to_bytes(bucket.data(), bucket.size(), bytes.data());
      store.write_bytes(run.ext_, run.slot_offset(b), bytes);
    }
  }
  temp.destroy();
  return run;
}

std::uint64_t BucketedRun::bucket_of(std::uint64_t fp) const {
  return scale_to_buckets(Fingerprint{fp}, q_);
}

std::uint64_t BucketedRun::slot_offset(std::uint64_t b) const {
  return (slot_region_block_ + b * slot_stride_blocks_) * store_->block_bytes();
}

std::uint64_t BucketedRun::extent_blocks_used() const {
  return slot_region_block_ + q_ * slot_stride_blocks_;
}

std::vector<Entry> BucketedRun::read_bucket(std::uint64_t b) const {
  std::uint32_t cnt = occupancy_[b];
  std::vector<Entry> out(cnt);
  if (cnt == 0) return out;
  std::vector<std::byte> bytes(std::size_t(cnt) * kEntryBytes);
  store_->read_bytes(ext_, slot_offset(b), bytes);
  bytes_to_entries(bytes.data(), cnt, out.data());
  return out;
}

std::vector<Entry> BucketedRun::lookup(Fingerprint f) const {
  if (n_ == 0) return {};
  std::vector<Entry> bucket = read_bucket(bucket_of(f.value));
  auto lo = std::lower_bound(
      bucket.begin(), bucket.end(), f.value,
      [](const Entry& e, std::uint64_t v) { return e.fingerprint < v; });
  std::vector<Entry> out;
  for (auto it = lo; it != bucket.end() && it->fingerprint == f.value; ++it)
    out.push_back(*it);
  return out;
}

std::vector<Entry> BucketedRun::lookup_prefix(std::uint64_t prefix,
                                              unsigned prefix_bits) const {
  if (prefix_bits > 64) throw std::out_of_range("prefix bits");
  if (n_ == 0) return {};
  std::uint64_t lo = prefix_bits == 0 ? 0 : prefix << (64 - prefix_bits);
  std::uint64_t span =
      prefix_bits == 0
          ? ~std::uint64_t{0}
          : (prefix_bits == 64 ? 0
                               : (std::uint64_t{1} << (64 - prefix_bits)) - 1);
  std::uint64_t hi = lo + span;
  std::vector<Entry> out;
  for (std::uint64_t b = bucket_of(lo); b <= bucket_of(hi); ++b) {
    for (const Entry& e : read_bucket(b))
      if (e.fingerprint >= lo && e.fingerprint <= hi) out.push_back(e);
  }
  return out;
}

class RunScanCursor final : public EntryCursor {
 public:
  explicit RunScanCursor(const BucketedRun& run) : run_(&run) {}

  bool next(Entry& out) override {
    while (i_ >= buf_.size()) {
      if (b_ >= run_->buckets()) return false;
      buf_ = run_->read_bucket(b_);
      ++b_;
      i_ = 0;
    }
    out = buf_[i_++];
    return true;
  }

 private:
  const BucketedRun* run_;
  std::uint64_t b_ = 0;
  std::size_t i_ = 0;
  std::vector<Entry> buf_;
};

std::unique_ptr<EntryCursor> BucketedRun::scan() const {
  return std::make_unique<RunScanCursor>(*this);
}

void BucketedRun::destroy() {
  if (store_) store_->free_extent(ext_);
  store_ = nullptr;
  n_ = 0;
  occupancy_.clear();
}

namespace {

struct HeapItem {
  Entry entry;
  std::size_t rank;
  EntryCursor* src;
};

struct HeapCmp {
  bool operator()(const HeapItem& a, const HeapItem& b) const {
    if (a.entry.fingerprint != b.entry.fingerprint)
      return a.entry.fingerprint > b.entry.fingerprint;
    return a.rank > b.rank;
  }
};

class HeapMergeCursor final : public EntryCursor {
 public:
  HeapMergeCursor(std::vector<std::unique_ptr<EntryCursor>> inputs,
                  std::vector<PackedRun> temps)
      : inputs_(std::move(inputs)), temps_(std::move(temps)) {
    for (std::size_t i = 0; i < inputs_.size(); ++i) {
      Entry e;
      if (inputs_[i]->next(e)) heap_.push(HeapItem{e, i, inputs_[i].get()});
    }
  }

  ~HeapMergeCursor() override {
    for (PackedRun& t : temps_) t.destroy();
  }

  bool next(Entry& out) override {
    if (heap_.empty()) return false;
    HeapItem top = heap_.top();
    heap_.pop();
    out = top.entry;
    Entry e;
    if (top.src->next(e)) heap_.push(HeapItem{e, top.rank, top.src});
    return true;
  }

 private:
  std::vector<std::unique_ptr<EntryCursor>> inputs_;
  std::vector<PackedRun> temps_;
  std::priority_queue<HeapItem, std::vector<HeapItem>, HeapCmp> heap_;
};

struct PendingInput {
  std::unique_ptr<EntryCursor> cursor;
  std::uint64_t size = 0;
  // Temporary backing this input; freed once the input has been consumed.
  std::optional<PackedRun> owned;
};

// Merges a consecutive group into one temporary, freeing any temporaries the
// group inputs owned. Consecutive ranges keep equal-fingerprint order global.
PendingInput materialize_group(BlockStore& store,
                               std::vector<PendingInput> group) {
  std::uint64_t total = 0;
  for (const PendingInput& p : group) total += p.size;
  std::vector<std::unique_ptr<EntryCursor>> cursors;
  cursors.reserve(group.size());
  for (PendingInput& p : group) cursors.push_back(std::move(p.cursor));
  HeapMergeCursor m(std::move(cursors), {});
  PackedRun out(store, std::max<std::uint64_t>(total, 1));
  Entry e;
  while (m.next(e)) out.append(e);
  out.finish();
  for (PendingInput& p : group)
    if (p.owned) p.owned->destroy();
  PendingInput result;
  result.cursor = out.cursor();
  result.size = total;
  result.owned = std::move(out);
  return result;
}

}  // namespace

std::unique_ptr<EntryCursor> merge_entry_streams(
    BlockStore& store, std::vector<std::unique_ptr<EntryCursor>> inputs,
    std::vector<std::uint64_t> sizes, std::size_t fan_in_cap) {
  if (inputs.size() != sizes.size())
    throw std::invalid_argument("merge inputs/sizes mismatch");
  fan_in_cap = std::max<std::size_t>(2, fan_in_cap);
  std::vector<PendingInput> pending;
  pending.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i)
    pending.push_back(PendingInput{std::move(inputs[i]), sizes[i], {}});

  while (pending.size() > fan_in_cap) {
    if (pending.size() > 2 * fan_in_cap - 1) {
      // Full reduction level: consecutive groups of fan_in_cap each.
      std::vector<PendingInput> next;
      std::size_t i = 0;
      while (i < pending.size()) {
        std::size_t take = std::min(fan_in_cap, pending.size() - i);
        if (take == 1) {
          next.push_back(std::move(pending[i]));
          ++i;
          continue;
        }
        std::vector<PendingInput> group;
        group.reserve(take);
        for (std::size_t k = 0; k < take; ++k)
          group.push_back(std::move(pending[i + k]));
        next.push_back(materialize_group(store, std::move(group)));
        i += take;
      }
      pending = std::move(next);
    } else {
      // Partial step: fold the tail so exactly fan_in_cap sources remain.
      std::size_t take = pending.size() - fan_in_cap + 1;
      std::size_t first = pending.size() - take;
      std::vector<PendingInput> group;
      group.reserve(take);
      for (std::size_t k = 0; k < take; ++k)
        group.push_back(std::move(pending[first + k]));
      pending.resize(first);
      pending.push_back(materialize_group(store, std::move(group)));
    }
  }

  std::vector<std::unique_ptr<EntryCursor>> final_inputs;
  std::vector<PackedRun> final_temps;
  final_inputs.reserve(pending.size());
  for (PendingInput& p : pending) {
    final_inputs.push_back(std::move(p.cursor));
    if (p.owned) final_temps.push_back(std::move(*p.owned));
  }
  return std::make_unique<HeapMergeCursor>(std::move(final_inputs),
                                           std::move(final_temps));
}

}  // namespace boah
