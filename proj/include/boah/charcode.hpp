// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Bit-packed streams of c-bit characters. Stream bit i lives at
// byte[i / 8] bit (i % 8), least significant bit first. A varint value is a
// sequence of c-bit characters, each carrying c-1 payload bits (low bits
// first) plus a continuation flag in the character's top bit.
#ifndef BOAH_CHARCODE_HPP
#define BOAH_CHARCODE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "boah/block_store.hpp"
#include "boah/common.hpp"

namespace boah {

class BitWriter {
 public:
  void put_bits(std::uint64_t value, unsigned n) {
    acc_ |= (n >= 64 ? value : (value & ((1ULL << n) - 1))) << acc_bits_;
    if (acc_bits_ + n >= 64) {
      unsigned take = 64 - acc_bits_;
      flush_word();
      if (n > take) acc_ = value >> take;
      acc_bits_ = n - take;
    } else {
      acc_bits_ += n;
    }
    bit_len_ += n;
  }

  void put_varint(std::uint64_t v, unsigned char_bits) {
    const unsigned payload = char_bits - 1;
    const std::uint64_t mask = (1ULL << payload) - 1;
    for (;;) {
      std::uint64_t chunk = v & mask;
      v >>= payload;
      put_bits(chunk | (v ? (1ULL << payload) : 0), char_bits);
      if (!v) break;
    }
  }

  std::uint64_t bit_length() const { return bit_len_; }

  // Removes and returns the whole bytes accumulated so far, leaving any
  // partial byte pending; bit_length() keeps counting. Lets long streams be
  // flushed piecewise instead of held entirely in memory.
  std::vector<std::byte> take_full_bytes() {
    while (acc_bits_ >= 8) {
      buf_.push_back(std::byte(acc_ & 0xff));
      acc_ >>= 8;
      acc_bits_ -= 8;
    }
    std::vector<std::byte> out = std::move(buf_);
    buf_.clear();
    return out;
  }

  // Zero-padded to whole bytes.
  std::vector<std::byte> take() {
    while (acc_bits_ > 0) {
      buf_.push_back(std::byte(acc_ & 0xff));
      acc_ >>= 8;
      acc_bits_ = acc_bits_ >= 8 ? acc_bits_ - 8 : 0;
    }
    std::vector<std::byte> out = std::move(buf_);
    buf_.clear();
    acc_ = 0;
    acc_bits_ = 0;
    bit_len_ = 0;
    return out;
  }

 private:
  void flush_word() {
    for (int i = 0; i < 8; ++i) buf_.push_back(std::byte((acc_ >> (8 * i)) & 0xff));
    acc_ = 0;
    acc_bits_ = 0;
  }

  std::vector<std::byte> buf_;
  std::uint64_t acc_ = 0;
  unsigned acc_bits_ = 0;
  std::uint64_t bit_len_ = 0;
};

inline unsigned varint_chars(std::uint64_t v, unsigned char_bits) {
  const unsigned payload = char_bits - 1;
  unsigned n = 1;
  while (v >> payload) {
    v >>= payload;
    ++n;
  }
  return n;
}

class BitReader {
 public:
  BitReader(std::span<const std::byte> bytes, std::uint64_t bit_len)
      : bytes_(bytes), bit_len_(bit_len) {}

  std::uint64_t get_bits(unsigned n) {
    std::uint64_t v = 0;
    for (unsigned got = 0; got < n;) {
      if (pos_ >= bit_len_) throw CorruptionError("bit stream underflow");
      unsigned byte = static_cast<unsigned>(pos_ >> 3);
      unsigned off = static_cast<unsigned>(pos_ & 7);
      unsigned take = std::min<unsigned>(8 - off, n - got);
      std::uint64_t bits =
          (static_cast<std::uint64_t>(bytes_[byte]) >> off) & ((1u << take) - 1);
      v |= bits << got;
      got += take;
      pos_ += take;
    }
    return v;
  }

  std::uint64_t get_varint(unsigned char_bits) {
    const unsigned payload = char_bits - 1;
    std::uint64_t v = 0;
    unsigned shift = 0;
    for (;;) {
      std::uint64_t ch = get_bits(char_bits);
      v |= (ch & ((1ULL << payload) - 1)) << shift;
      if (!(ch >> payload)) break;
      shift += payload;
    }
    return v;
  }

  std::uint64_t bit_pos() const { return pos_; }
  bool exhausted() const { return pos_ >= bit_len_; }

 private:
  std::span<const std::byte> bytes_;
  std::uint64_t bit_len_;
  std::uint64_t pos_ = 0;
};

// Sequential bit reader over a byte range of a store extent; refills an
// internal chunk via read_bytes so large streams are not held in memory.
class StoreBitReader {
 public:
  StoreBitReader(BlockStore& store, ExtentId ext, std::uint64_t byte_offset,
                 std::uint64_t byte_len)
      : store_(&store), ext_(ext), base_(byte_offset), len_(byte_len) {
    chunk_.resize(store.block_bytes());
  }

  std::uint64_t get_bits(unsigned n) {
    std::uint64_t v = 0;
    for (unsigned got = 0; got < n;) {
      if (avail_ == 0) refill();
      unsigned off = static_cast<unsigned>(bit_pos_ & 7);
      unsigned take = std::min<unsigned>(8 - off, n - got);
      std::uint64_t bits =
          (static_cast<std::uint64_t>(chunk_[chunk_byte()]) >> off) &
          ((1u << take) - 1);
      v |= bits << got;
      got += take;
      bit_pos_ += take;
      avail_ -= take;
    }
    return v;
  }

  std::uint64_t get_varint(unsigned char_bits) {
    const unsigned payload = char_bits - 1;
    std::uint64_t v = 0;
    unsigned shift = 0;
    for (;;) {
      std::uint64_t ch = get_bits(char_bits);
      v |= (ch & ((1ULL << payload) - 1)) << shift;
      if (!(ch >> payload)) break;
      shift += payload;
    }
    return v;
  }

  std::uint64_t bit_pos() const { return bit_pos_; }

 private:
  std::size_t chunk_byte() const {
    return static_cast<std::size_t>((bit_pos_ >> 3) - chunk_base_);
  }

  void refill() {
    std::uint64_t byte = bit_pos_ >> 3;
    if (byte >= len_) throw CorruptionError("bit stream underflow");
    chunk_base_ = byte;
    std::uint64_t n = std::min<std::uint64_t>(chunk_.size(), len_ - byte);
    store_->read_bytes(ext_, base_ + byte, std::span(chunk_.data(), n));
    avail_ = n * 8 - (bit_pos_ & 7);
  }

  BlockStore* store_;
  ExtentId ext_;
  std::uint64_t base_;
  std::uint64_t len_;
  std::vector<std::byte> chunk_;
  std::uint64_t chunk_base_ = 0;
  std::uint64_t bit_pos_ = 0;
  std::uint64_t avail_ = 0;
};

// Appends a byte stream to a store extent starting at a block-aligned
// offset, issuing only whole-block writes (so no read-modify-write fetch is
// charged); the final partial block is zero-padded by finish().
class BlockAppender {
 public:
  BlockAppender(BlockStore& store, ExtentId ext, std::uint64_t start_byte)
      : store_(&store), ext_(ext), base_(start_byte) {
    if (start_byte % store.block_bytes() != 0)
      throw std::invalid_argument("appender start not block aligned");
    carry_.reserve(store.block_bytes());
  }

  void append(std::span<const std::byte> in) {
    const std::size_t bb = store_->block_bytes();
    std::size_t done = 0;
    while (done < in.size()) {
      std::size_t n = std::min(in.size() - done, bb - carry_.size());
      carry_.insert(carry_.end(), in.begin() + done, in.begin() + done + n);
      done += n;
      if (carry_.size() == bb) {
        store_->write_bytes(ext_, base_ + flushed_, carry_);
        flushed_ += bb;
        carry_.clear();
      }
    }
    total_ += in.size();
  }

  // Returns the number of bytes appended (excluding padding).
  std::uint64_t finish() {
    if (!carry_.empty()) {
      carry_.resize(store_->block_bytes(), std::byte{0});
      store_->write_bytes(ext_, base_ + flushed_, carry_);
      flushed_ += carry_.size();
      carry_.clear();
    }
    return total_;
  }

  std::uint64_t bytes_appended() const { return total_; }

 private:
  BlockStore* store_;
  ExtentId ext_;
  std::uint64_t base_;
  std::uint64_t flushed_ = 0;
  std::uint64_t total_ = 0;
  std::vector<std::byte> carry_;
};

}  // namespace boah

#endif  // BOAH_CHARCODE_HPP
