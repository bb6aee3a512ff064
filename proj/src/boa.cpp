// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/boa.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include "boah/common.hpp"

namespace boah {

RoutingFilter::RoutingFilter(BlockStore& store, std::uint32_t lambda,
                             std::uint64_t min_slots)
    : store_(&store) {
  if (lambda < 2 || !is_pow2(lambda)) {
    throw std::invalid_argument("lambda must be a power of two >= 2");
  }
  if (min_slots == 0) throw std::invalid_argument("min_slots == 0");
  slots_ = std::bit_ceil(min_slots);
  prefix_bits_ = static_cast<unsigned>(std::countr_zero(slots_));
  if (prefix_bits_ == 0 || prefix_bits_ > 63) {
    throw std::invalid_argument("filter slot count out of range");
  }
  slot_bits_ = std::bit_width(lambda);  // ceil(log2(lambda + 1))
  slots_per_block_ = store.block_bytes() * 8 / slot_bits_;
  blocks_ = ceil_div(slots_, slots_per_block_);
  ext_ = store.alloc(blocks_);
}

std::uint32_t RoutingFilter::load(std::uint64_t slot) {
  const std::uint64_t block = slot / slots_per_block_;
  const std::uint64_t bit = (slot % slots_per_block_) * slot_bits_;
  const std::uint64_t byte = bit / 8;
  const std::size_t len = (bit % 8 + slot_bits_ + 7) / 8;
  std::byte buf[8] = {};
  store_->read_bytes(ext_, block * store_->block_bytes() + byte,
                     {buf, len});
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < len; ++i) {
    word |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<std::uint32_t>((word >> (bit % 8)) &
                                    ((1u << slot_bits_) - 1));
}

void RoutingFilter::store(std::uint64_t slot, std::uint32_t run) {
  const std::uint64_t block = slot / slots_per_block_;
  const std::uint64_t bit = (slot % slots_per_block_) * slot_bits_;
  const std::uint64_t byte = bit / 8;
  const std::size_t len = (bit % 8 + slot_bits_ + 7) / 8;
  std::byte buf[8] = {};
  const std::uint64_t off = block * store_->block_bytes() + byte;
  store_->read_bytes(ext_, off, {buf, len});
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < len; ++i) {
    word |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  const std::uint64_t mask = ((1ull << slot_bits_) - 1) << (bit % 8);
  word = (word & ~mask) |
         (static_cast<std::uint64_t>(run) << (bit % 8));
  for (std::size_t i = 0; i < len; ++i) {
    buf[i] = static_cast<std::byte>((word >> (8 * i)) & 0xff);
  }
  store_->write_bytes(ext_, off, {buf, len});
}

void RoutingFilter::reset() {
  store_->free_extent(ext_);
  ext_ = store_->alloc(blocks_);
}

void RoutingFilter::destroy() {
  if (store_ != nullptr) store_->free_extent(ext_);
  store_ = nullptr;
}

namespace {

// Wraps a merge (or flush) stream headed for run `run` of the level owning
// `filter`: rewrites each entry's prev_run to the previous newest run of its
// prefix (own index when none) and repoints the filter slot. The old slot
// value is read once per equal-prefix group; later entries of the group reuse
// it, since the slot already holds the new run index by then.
class FilterStampCursor final : public EntryCursor {
 public:
  FilterStampCursor(EntryCursor& inner, RoutingFilter& filter,
                    std::uint32_t run)
      : inner_(&inner), filter_(&filter), run_(run) {}

  bool next(Entry& out) override {
    if (!inner_->next(out)) return false;
    const std::uint64_t slot = filter_->slot_of(out.fingerprint);
    if (!have_group_ || slot != group_slot_) {
      const std::uint32_t old = filter_->load(slot);
      group_prev_ = old != 0 ? old : run_;
      filter_->store(slot, run_);
      group_slot_ = slot;
      have_group_ = true;
    }
    out.prev_run = group_prev_;
    return true;
  }

 private:
  EntryCursor* inner_;
  RoutingFilter* filter_;
  std::uint32_t run_;
  bool have_group_ = false;
  std::uint64_t group_slot_ = 0;
  std::uint32_t group_prev_ = 0;
};

}  // namespace

BoaTable::BoaTable(BlockStore& store, std::uint32_t lambda,
                   std::uint64_t n_max, std::uint64_t seed)
    : store_(&store),
      lambda_(lambda),
      n_max_(n_max),
      hash_(default_hash_degree(n_max), seed),
      log_(store),
      be_(store.block_bytes() / kEntryBytes) {
  if (lambda < 2 || !is_pow2(lambda)) {
    throw std::invalid_argument("lambda must be a power of two >= 2");
  }
  if (n_max == 0) throw std::invalid_argument("n_max == 0");
  buffer_.reserve(be_);
}

void BoaTable::insert(std::string_view key, std::string_view value) {
  if (size_ >= n_max_) throw std::length_error("table capacity exceeded");
  const std::uint64_t handle = log_.append(key, value);
  buffer_.push_back(Entry{hash_.fingerprint(key).value, handle, 0});
  ++size_;
  if (buffer_.size() >= be_) flush_buffer();
}

void BoaTable::arrive_at_level(std::size_t idx, EntryCursor& cur,
                               std::uint64_t n) {
  while (levels_.size() <= idx) {
    levels_.emplace_back();
    // Runs on level idx+1 hold be_ * lambda^idx entries; slots >= lambda
    // times that.
    std::uint64_t run_entries = be_;
    for (std::size_t i = 0; i < levels_.size() - 1; ++i) {
      run_entries *= lambda_;
    }
    filters_.emplace_back(*store_, lambda_, run_entries * lambda_);
  }
  const auto run = static_cast<std::uint32_t>(levels_[idx].size() + 1);
  FilterStampCursor stamped(cur, filters_[idx], run);
  levels_[idx].push_back(BucketedRun::build(*store_, stamped, n));
}

void BoaTable::flush_buffer() {
  std::stable_sort(buffer_.begin(), buffer_.end(),
                   [](const Entry& a, const Entry& b) {
                     return a.fingerprint < b.fingerprint;
                   });
  VectorCursor cur(std::move(buffer_));
  buffer_.clear();
  buffer_.reserve(be_);
  arrive_at_level(0, cur, be_);

  const std::size_t cap =
      std::max<std::size_t>(2, store_->cache_frames() - 1);
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (levels_[i].size() < lambda_) continue;
    std::vector<std::unique_ptr<EntryCursor>> inputs;
    std::vector<std::uint64_t> sizes;
    std::uint64_t total = 0;
    for (BucketedRun& run : levels_[i]) {
      inputs.push_back(run.scan());
      sizes.push_back(run.entries());
      total += run.entries();
    }
    auto merged = merge_entry_streams(*store_, std::move(inputs),
                                      std::move(sizes), cap);
    arrive_at_level(i + 1, *merged, total);
    for (BucketedRun& run : levels_[i]) run.destroy();
    levels_[i].clear();
    // The level is empty now, so its filter must read all-empty again.
    filters_[i].reset();
  }
}

std::optional<std::string> BoaTable::query(std::string_view key) {
  const Fingerprint f = hash_.fingerprint(key);
  ++qstats_.queries;
  for (auto it = buffer_.rbegin(); it != buffer_.rend(); ++it) {
    if (it->fingerprint != f.value) continue;
    if (auto v = log_.value_if_key(it->payload, key)) return v;
  }
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    ++qstats_.level_visits;
    RoutingFilter& filter = filters_[i];
    const std::uint64_t slot = filter.slot_of(f.value);
    ++qstats_.filter_probes;
    std::uint32_t run = filter.load(slot);
    if (run == 0) continue;
    // Follow the chain newest to oldest until a run points at itself.
    while (true) {
      if (run > levels_[i].size()) {
        throw CorruptionError("filter points past level run count");
      }
      const BucketedRun& r = levels_[i][run - 1];
      ++qstats_.runs_probed;
      const std::vector<Entry> group =
          r.lookup_prefix(slot, filter.prefix_bits());
      if (group.empty()) {
        throw CorruptionError("chained run lacks the routed prefix");
      }
      for (auto m = group.rbegin(); m != group.rend(); ++m) {
        if (m->fingerprint != f.value) continue;
        if (auto v = log_.value_if_key(m->payload, key)) return v;
      }
      const auto prev = static_cast<std::uint32_t>(group.front().prev_run);
      if (prev == run) break;
      run = prev;
    }
  }
  return std::nullopt;
}

std::vector<std::size_t> BoaTable::run_counts() const {
  std::vector<std::size_t> out;
  out.reserve(levels_.size());
  for (const auto& level : levels_) out.push_back(level.size());
  return out;
}

void BoaTable::destroy() {
  for (auto& level : levels_) {
    for (BucketedRun& run : level) run.destroy();
  }
  levels_.clear();
  for (RoutingFilter& f : filters_) f.destroy();
  filters_.clear();
  buffer_.clear();
  log_.destroy();
  size_ = 0;
}

}  // namespace boah
