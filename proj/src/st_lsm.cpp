// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/st_lsm.hpp"

#include <algorithm>
#include <stdexcept>

namespace boah {

StLsm::StLsm(BlockStore& store, std::uint32_t lambda, std::uint64_t n_max,
             std::uint64_t seed)
    : store_(&store),
      lambda_(lambda),
      n_max_(n_max),
      hash_(default_hash_degree(n_max), seed),
      log_(store),
      be_(store.block_bytes() / kEntryBytes) {
  if (lambda < 2) throw std::invalid_argument("growth factor < 2");
  if (n_max == 0) throw std::invalid_argument("n_max == 0");
  buffer_.reserve(be_);
}

void StLsm::insert(std::string_view key, std::string_view value) {
  if (size_ >= n_max_) throw std::length_error("table capacity exceeded");
  const std::uint64_t handle = log_.append(key, value);
  buffer_.push_back(Entry{hash_.fingerprint(key).value, handle, 0});
  ++size_;
  if (buffer_.size() >= be_) flush_buffer();
}

void StLsm::flush_buffer() {
  // Stable sort keeps arrival order among equal fingerprints, so runs store
  // duplicate fingerprints oldest first everywhere.
  std::stable_sort(buffer_.begin(), buffer_.end(),
                   [](const Entry& a, const Entry& b) {
                     return a.fingerprint < b.fingerprint;
                   });
  VectorCursor cur(std::move(buffer_));
  buffer_.clear();
  buffer_.reserve(be_);
  if (levels_.empty()) levels_.emplace_back();
  levels_[0].push_back(BucketedRun::build(*store_, cur, be_));

  // Cascade: a level holding lambda runs merges them all into the next one.
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
    if (levels_.size() <= i + 1) levels_.emplace_back();
    levels_[i + 1].push_back(BucketedRun::build(*store_, *merged, total));
    for (BucketedRun& run : levels_[i]) run.destroy();
    levels_[i].clear();
  }
}

std::optional<std::string> StLsm::query(std::string_view key) {
  const Fingerprint f = hash_.fingerprint(key);
  for (auto it = buffer_.rbegin(); it != buffer_.rend(); ++it) {
    if (it->fingerprint != f.value) continue;
    if (auto v = log_.value_if_key(it->payload, key)) return v;
  }
  for (const auto& level : levels_) {
    for (auto run = level.rbegin(); run != level.rend(); ++run) {
      const std::vector<Entry> matches = run->lookup(f);
      for (auto m = matches.rbegin(); m != matches.rend(); ++m) {
        if (auto v = log_.value_if_key(m->payload, key)) return v;
      }
    }
  }
  return std::nullopt;
}

std::vector<std::size_t> StLsm::run_counts() const {
  std::vector<std::size_t> out;
  out.reserve(levels_.size());
  for (const auto& level : levels_) out.push_back(level.size());
  return out;
}

void StLsm::destroy() {
  for (auto& level : levels_) {
    for (BucketedRun& run : level) run.destroy();
  }
  levels_.clear();
  buffer_.clear();
  log_.destroy();
  size_ = 0;
}

}  // namespace boah
