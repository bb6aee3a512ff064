// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/kv_log.hpp"

#include <cstring>
#include <stdexcept>

#include "boah/common.hpp"

namespace boah {

KvLog::KvLog(BlockStore& store, std::uint64_t segment_blocks)
    : store_(&store),
      seg_blocks_(segment_blocks),
      tail_(store.block_bytes()) {
  if (segment_blocks == 0) throw std::invalid_argument("segment_blocks == 0");
}

std::uint64_t KvLog::append(std::string_view key, std::string_view value) {
  const std::uint64_t bs = store_->block_bytes();
  const std::uint64_t rec = 8 + key.size() + value.size();
  if (rec > bs) {
    throw std::invalid_argument("record larger than one block");
  }
  if (tail_fill_ + rec > bs) {
    // Flush the full (zero-padded) tail block and start a fresh one. The
    // write covers the whole block, so no fetch of old contents is charged.
    const std::uint64_t seg = tail_block_ / seg_blocks_;
    while (segs_.size() <= seg) segs_.push_back(store_->alloc(seg_blocks_));
    store_->write_block(segs_[seg], tail_block_ % seg_blocks_, tail_);
    ++tail_block_;
    tail_fill_ = 0;
    std::memset(tail_.data(), 0, tail_.size());
  }
  const std::uint64_t handle = tail_block_ * bs + tail_fill_;
  std::byte* p = tail_.data() + tail_fill_;
  store_le32(p, static_cast<std::uint32_t>(key.size()));
  store_le32(p + 4, static_cast<std::uint32_t>(value.size()));
  std::memcpy(p + 8, key.data(), key.size());
  std::memcpy(p + 8 + key.size(), value.data(), value.size());
  tail_fill_ += rec;
  used_ = handle + rec;
  return handle;
}

void KvLog::read_at(std::uint64_t off, std::span<std::byte> out) const {
  const std::uint64_t bs = store_->block_bytes();
  const std::uint64_t tail_base = tail_block_ * bs;
  std::uint64_t pos = off;
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos >= tail_base) {
      // Unflushed bytes live in the RAM tail buffer.
      const std::size_t in_tail = static_cast<std::size_t>(pos - tail_base);
      const std::size_t n = out.size() - done;
      if (in_tail + n > tail_.size()) {
        throw CorruptionError("kv log read past tail");
      }
      std::memcpy(out.data() + done, tail_.data() + in_tail, n);
      return;
    }
    const std::uint64_t seg = pos / (seg_blocks_ * bs);
    const std::uint64_t in_seg = pos % (seg_blocks_ * bs);
    const std::uint64_t seg_left = seg_blocks_ * bs - in_seg;
    const std::uint64_t flushed_left = tail_base - pos;
    std::size_t n = out.size() - done;
    n = static_cast<std::size_t>(
        std::min<std::uint64_t>(n, std::min(seg_left, flushed_left)));
    store_->read_bytes(segs_.at(seg), in_seg, {out.data() + done, n});
    done += n;
    pos += n;
  }
}

std::optional<std::string> KvLog::value_if_key(std::uint64_t handle,
                                               std::string_view key) const {
  if (handle + 8 > used_) throw std::out_of_range("kv handle out of range");
  std::byte hdr[8];
  read_at(handle, hdr);
  const std::uint32_t klen = load_le32(hdr);
  const std::uint32_t vlen = load_le32(hdr + 4);
  if (handle + 8 + klen + vlen > used_) {
    throw CorruptionError("kv record extends past log end");
  }
  if (klen != key.size()) return std::nullopt;
  std::vector<std::byte> body(klen + vlen);
  read_at(handle + 8, body);
  if (std::memcmp(body.data(), key.data(), klen) != 0) return std::nullopt;
  return std::string(reinterpret_cast<const char*>(body.data()) + klen, vlen);
}

void KvLog::destroy() {
  for (ExtentId id : segs_) store_->free_extent(id);
  segs_.clear();
  used_ = 0;
  tail_block_ = 0;
  tail_fill_ = 0;
  std::memset(tail_.data(), 0, tail_.size());
}

}  // namespace boah
