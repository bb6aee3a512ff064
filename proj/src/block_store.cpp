// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/block_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace boah {

namespace {
constexpr char kMagic[8] = {'B', 'O', 'A', 'H', '1', 0, 0, 0};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kFreedBit = 1ULL << 63;
}  // namespace

BlockStore::BlockStore(StoreConfig cfg) : cfg_(std::move(cfg)) {
  if (!is_pow2(cfg_.block_bytes) || cfg_.block_bytes < 512)
    throw std::invalid_argument("block_bytes must be a power of two >= 512");
  if (cfg_.cache_bytes < 2 * cfg_.block_bytes ||
      cfg_.cache_bytes % cfg_.block_bytes != 0)
    throw std::invalid_argument(
        "cache_bytes must be a multiple of block_bytes and >= 2 blocks");
  n_frames_ = cfg_.cache_bytes / cfg_.block_bytes;
  frames_.resize(n_frames_);
  free_frames_.reserve(n_frames_);
  for (std::size_t i = n_frames_; i-- > 0;) free_frames_.push_back(i);
  cached_.reserve(n_frames_ * 2);

  if (!cfg_.path.empty()) {
    fd_ = ::open(cfg_.path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0)
      throw StoreError("cannot open backing file " + cfg_.path + ": " +
                       std::strerror(errno));
    off_t size = ::lseek(fd_, 0, SEEK_END);
    if (size > 0) load_file_header();
  }
}

BlockStore::~BlockStore() {
  if (fd_ >= 0) {
    try {
      flush();
    } catch (...) {
    }
    ::close(fd_);
  }
}

ExtentId BlockStore::alloc(std::uint64_t n_blocks) {
  if (n_blocks == 0) throw std::invalid_argument("alloc of zero blocks");
  if (fd_ >= 0 && extents_.size() >= header_capacity())
    throw StoreError("extent table full");
  ExtentId id{static_cast<std::uint32_t>(extents_.size())};
  extents_.push_back(Extent{next_start_, n_blocks, false});
  next_start_ += n_blocks;
  return id;
}

void BlockStore::free_extent(ExtentId id) {
  const Extent& e = checked_extent(id);
  for (std::uint64_t b = 0; b < e.blocks; ++b) {
    std::uint64_t gkey = e.start + b;
    auto it = cached_.find(gkey);
    if (it != cached_.end()) {
      free_frames_.push_back(it->second.idx);
      lru_.erase(it->second.pos);
      cached_.erase(it);
    }
    mem_.erase(gkey);
  }
  extents_[id.value].freed = true;
}

const BlockStore::Extent& BlockStore::checked_extent(ExtentId id) const {
  if (id.value >= extents_.size())
    throw StoreError("unknown extent " + std::to_string(id.value));
  const Extent& e = extents_[id.value];
  if (e.freed) throw StoreError("extent " + std::to_string(id.value) + " freed");
  return e;
}

std::uint64_t BlockStore::gkey_of(ExtentId id, std::uint64_t block) const {
  const Extent& e = checked_extent(id);
  if (block >= e.blocks)
    throw StoreError("block " + std::to_string(block) + " out of range");
  return e.start + block;
}

std::uint64_t BlockStore::extent_blocks(ExtentId id) const {
  return checked_extent(id).blocks;
}

std::size_t BlockStore::live_extents() const {
  std::size_t n = 0;
  for (const Extent& e : extents_)
    if (!e.freed) ++n;
  return n;
}

void BlockStore::evict_one() {
  std::uint64_t victim = lru_.back();
  lru_.pop_back();
  auto it = cached_.find(victim);
  Frame& f = frames_[it->second.idx];
  if (f.dirty) {
    backing_write(victim, f.data.get());
    ++stats_.block_writes;
    stats_.bytes_moved += cfg_.block_bytes;
    f.dirty = false;
  }
  free_frames_.push_back(it->second.idx);
  cached_.erase(it);
}

BlockStore::Frame& BlockStore::frame_for(std::uint64_t gkey, bool fetch) {
  auto it = cached_.find(gkey);
  if (it != cached_.end()) {
    ++stats_.cache_hits;
    lru_.splice(lru_.begin(), lru_, it->second.pos);
    it->second.pos = lru_.begin();
    return frames_[it->second.idx];
  }
  if (free_frames_.empty()) evict_one();
  std::size_t idx = free_frames_.back();
  free_frames_.pop_back();
  Frame& f = frames_[idx];
  if (!f.data) f.data = std::make_unique<std::byte[]>(cfg_.block_bytes);
  f.gkey = gkey;
  f.dirty = false;
  if (fetch) {
    backing_read(gkey, f.data.get());
    ++stats_.block_reads;
    stats_.bytes_moved += cfg_.block_bytes;
  }
  lru_.push_front(gkey);
  cached_.emplace(gkey, FrameRef{idx, lru_.begin()});
  return f;
}

BlockStore::Frame& BlockStore::frame_for_rmw(std::uint64_t gkey) {
  if (cached_.count(gkey) == 0 && fd_ < 0 && mem_.count(gkey) == 0) {
    // Miss on a block never written since allocation: its logical contents
    // are all zeros, so materialize the frame without a charged fetch.
    Frame& f = frame_for(gkey, false);
    std::memset(f.data.get(), 0, cfg_.block_bytes);
    return f;
  }
  return frame_for(gkey, true);
}

void BlockStore::backing_read(std::uint64_t gkey, std::byte* out) {
  if (fd_ >= 0) {
    off_t off = static_cast<off_t>((gkey + 1) * cfg_.block_bytes);
    ssize_t n = ::pread(fd_, out, cfg_.block_bytes, off);
    if (n < 0) throw StoreError(std::string("pread: ") + std::strerror(errno));
    if (static_cast<std::size_t>(n) < cfg_.block_bytes)
      std::memset(out + n, 0, cfg_.block_bytes - n);
    return;
  }
  auto it = mem_.find(gkey);
  if (it == mem_.end())
    std::memset(out, 0, cfg_.block_bytes);
  else
    std::memcpy(out, it->second.get(), cfg_.block_bytes);
}

void BlockStore::backing_write(std::uint64_t gkey, const std::byte* in) {
  if (fd_ >= 0) {
    off_t off = static_cast<off_t>((gkey + 1) * cfg_.block_bytes);
    ssize_t n = ::pwrite(fd_, in, cfg_.block_bytes, off);
    if (n < 0 || static_cast<std::size_t>(n) != cfg_.block_bytes)
      throw StoreError(std::string("pwrite: ") + std::strerror(errno));
    return;
  }
  auto& page = mem_[gkey];
  if (!page) page = std::make_unique<std::byte[]>(cfg_.block_bytes);
  std::memcpy(page.get(), in, cfg_.block_bytes);
}

void BlockStore::read_block(ExtentId id, std::uint64_t block,
                            std::span<std::byte> out) {
  if (out.size() != cfg_.block_bytes)
    throw std::invalid_argument("read_block span size != block size");
  if (trace_) trace_->note(0, id.value, block * cfg_.block_bytes, out.size());
  Frame& f = frame_for(gkey_of(id, block), true);
  std::memcpy(out.data(), f.data.get(), cfg_.block_bytes);
}

void BlockStore::write_block(ExtentId id, std::uint64_t block,
                             std::span<const std::byte> in) {
  if (in.size() != cfg_.block_bytes)
    throw std::invalid_argument("write_block span size != block size");
  if (trace_) trace_->note(1, id.value, block * cfg_.block_bytes, in.size());
  Frame& f = frame_for(gkey_of(id, block), false);
  std::memcpy(f.data.get(), in.data(), cfg_.block_bytes);
  f.dirty = true;
}

void BlockStore::read_bytes(ExtentId id, std::uint64_t offset,
                            std::span<std::byte> out) {
  if (out.empty()) return;
  if (trace_) trace_->note(2, id.value, offset, out.size());
  const std::uint64_t bb = cfg_.block_bytes;
  if (offset + out.size() > extent_bytes(id))
    throw StoreError("read_bytes out of extent range");
  std::size_t done = 0;
  while (done < out.size()) {
    std::uint64_t block = (offset + done) / bb;
    std::uint64_t inner = (offset + done) % bb;
    std::size_t n = std::min<std::uint64_t>(bb - inner, out.size() - done);
    Frame& f = frame_for(gkey_of(id, block), true);
    std::memcpy(out.data() + done, f.data.get() + inner, n);
    done += n;
  }
}

void BlockStore::write_bytes(ExtentId id, std::uint64_t offset,
                             std::span<const std::byte> in) {
  if (in.empty()) return;
  if (trace_) trace_->note(3, id.value, offset, in.size());
  const std::uint64_t bb = cfg_.block_bytes;
  if (offset + in.size() > extent_bytes(id))
    throw StoreError("write_bytes out of extent range");
  std::size_t done = 0;
  while (done < in.size()) {
    std::uint64_t block = (offset + done) / bb;
    std::uint64_t inner = (offset + done) % bb;
    std::size_t n = std::min<std::uint64_t>(bb - inner, in.size() - done);
    bool whole = (inner == 0 && n == bb);
    std::uint64_t gkey = gkey_of(id, block);
    Frame& f = whole ? frame_for(gkey, false) : frame_for_rmw(gkey);
    std::memcpy(f.data.get() + inner, in.data() + done, n);
    f.dirty = true;
    done += n;
  }
}

void BlockStore::flush() {
  for (std::uint64_t gkey : lru_) {
    Frame& f = frames_[cached_[gkey].idx];
    if (f.dirty) {
      backing_write(gkey, f.data.get());
      ++stats_.block_writes;
      stats_.bytes_moved += cfg_.block_bytes;
      f.dirty = false;
    }
  }
  if (fd_ >= 0) write_file_header();
}

void BlockStore::write_file_header() {
  std::vector<std::byte> hdr(cfg_.block_bytes, std::byte{0});
  std::memcpy(hdr.data(), kMagic, 8);
  store_le32(hdr.data() + 8, kVersion);
  store_le64(hdr.data() + 12, cfg_.block_bytes);
  store_le32(hdr.data() + 20, static_cast<std::uint32_t>(extents_.size()));
  for (std::size_t i = 0; i < extents_.size(); ++i) {
    std::uint64_t v = extents_[i].blocks | (extents_[i].freed ? kFreedBit : 0);
    store_le64(hdr.data() + 24 + 8 * i, v);
  }
  ssize_t n = ::pwrite(fd_, hdr.data(), hdr.size(), 0);
  if (n < 0 || static_cast<std::size_t>(n) != hdr.size())
    throw StoreError("cannot write store header");
}

void BlockStore::load_file_header() {
  std::vector<std::byte> hdr(cfg_.block_bytes);
  ssize_t n = ::pread(fd_, hdr.data(), hdr.size(), 0);
  if (n < 0 || static_cast<std::size_t>(n) != hdr.size())
    throw StoreError("cannot read store header");
  if (std::memcmp(hdr.data(), kMagic, 8) != 0)
    throw StoreError("bad store magic");
  if (load_le32(hdr.data() + 8) != kVersion)
    throw StoreError("unsupported store version");
  if (load_le64(hdr.data() + 12) != cfg_.block_bytes)
    throw StoreError("store block size mismatch");
  std::uint32_t count = load_le32(hdr.data() + 20);
  if (count > header_capacity()) throw StoreError("corrupt extent table");
  extents_.clear();
  next_start_ = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint64_t v = load_le64(hdr.data() + 24 + 8 * i);
    Extent e{next_start_, v & ~kFreedBit, (v & kFreedBit) != 0};
    extents_.push_back(e);
    next_start_ += e.blocks;
  }
}

}  // namespace boah
