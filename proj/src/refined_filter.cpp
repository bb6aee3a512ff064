// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/refined_filter.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "boah/charcode.hpp"
#include "boah/common.hpp"

namespace boah {

namespace {
constexpr std::uint32_t kFilterMagic = 0x544c4642;  // "BFLT"
constexpr std::uint32_t kFilterVersion = 1;

// Header field offsets within block 0.
constexpr std::size_t kOffMagic = 0;
constexpr std::size_t kOffVersion = 4;
constexpr std::size_t kOffCount = 8;
constexpr std::size_t kOffListBits = 16;
constexpr std::size_t kOffPrefixLen = 24;
constexpr std::size_t kOffPivotLen = 28;
constexpr std::size_t kOffLambda = 32;
constexpr std::size_t kOffCapacity = 40;
constexpr std::size_t kHeaderBytes = 48;

// Streams the pivot offset array of an existing filter so a full scan can
// tell which list entries begin a pivot bucket without loading the table.
class PivotStream {
 public:
  PivotStream(BlockStore& store, ExtentId ext, std::uint64_t first_byte,
              std::uint64_t n_offsets)
      : store_(&store), ext_(ext), base_(first_byte), n_(n_offsets) {}

  bool next(std::uint32_t& out) {
    if (i_ >= n_) return false;
    if (i_ == chunk_base_ + chunk_.size() || chunk_.empty()) refill();
    out = chunk_[i_ - chunk_base_];
    ++i_;
    return true;
  }

 private:
  void refill() {
    chunk_base_ = i_;
    const std::uint64_t want = std::min<std::uint64_t>(n_ - i_, 1024);
    std::vector<std::byte> raw(want * 4);
    store_->read_bytes(ext_, base_ + i_ * 4, raw);
    chunk_.resize(want);
    for (std::uint64_t k = 0; k < want; ++k)
      chunk_[k] = load_le32(raw.data() + 4 * k);
  }

  BlockStore* store_;
  ExtentId ext_;
  std::uint64_t base_;
  std::uint64_t n_;
  std::uint64_t i_ = 0;
  std::uint64_t chunk_base_ = 0;
  std::vector<std::uint32_t> chunk_;
};

}  // namespace

// Streaming decode of a filter's full list in order, reconstructing absolute
// prefixes across pivot-bucket boundaries.
class FilterScanCursor final : public FilterEntryCursor {
 public:
  explicit FilterScanCursor(const RefinedFilter& f)
      : f_(&f),
        pivots_(*f.store_, f.ext_, f.store_->block_bytes(),
                f.pivot_buckets(f.pivot_len_) + 1),
        bits_(*f.store_, f.ext_, f.list_start_bytes(f.pivot_len_),
              ceil_div(f.list_bits_, 8)) {
    pivots_.next(next_boundary_);  // offset[0], always 0
    have_boundary_ = true;
  }

  bool next(FilterEntry& out) override {
    if (i_ >= f_->count_) return false;
    const std::uint64_t pos = bits_.bit_pos();
    bool bucket_first = false;
    while (have_boundary_ && next_boundary_ <= pos) {
      if (next_boundary_ == pos) bucket_first = true;
      std::uint32_t b;
      if (pivots_.next(b)) {
        next_boundary_ = b;
      } else {
        have_boundary_ = false;
      }
    }
    const unsigned c = f_->char_bits_;
    if (bucket_first || i_ == 0) {
      prev_ = bits_.get_bits(f_->p_len_ * c);
    } else {
      prev_ += bits_.get_varint(c);
    }
    out.prefix = prev_;
    out.sketch.child = static_cast<std::uint32_t>(bits_.get_bits(c));
    out.sketch.check = static_cast<std::uint32_t>(bits_.get_bits(c));
    out.sketch.next = static_cast<std::uint32_t>(bits_.get_bits(c));
    ++i_;
    return true;
  }

 private:
  const RefinedFilter* f_;
  PivotStream pivots_;
  StoreBitReader bits_;
  std::uint64_t i_ = 0;
  std::uint64_t prev_ = 0;
  std::uint32_t next_boundary_ = 0;
  bool have_boundary_ = false;
};

RefinedFilter::RefinedFilter(BlockStore& store, const Alphabet& alpha,
                             unsigned p_len, std::uint64_t capacity,
                             std::uint64_t pivot_target)
    : store_(&store),
      lambda_(alpha.lambda()),
      char_bits_(alpha.char_bits()),
      p_len_(p_len),
      capacity_(capacity),
      pivot_target_(std::max<std::uint64_t>(1, pivot_target)) {
  if (p_len == 0 || p_len > alpha.max_chars())
    throw std::invalid_argument("filter prefix length out of range");
  if (capacity == 0) throw std::invalid_argument("filter capacity == 0");
}

unsigned RefinedFilter::pick_pivot_len(std::uint64_t count) const {
  unsigned pl = 0;
  std::uint64_t buckets = 1;
  while (pl < p_len_ && buckets <= count / (pivot_target_ * lambda_)) {
    buckets *= lambda_;
    ++pl;
  }
  return pl;
}

std::uint64_t RefinedFilter::pivot_buckets(unsigned pivot_len) const {
  std::uint64_t b = 1;
  for (unsigned i = 0; i < pivot_len; ++i) b *= lambda_;
  return b;
}

std::uint64_t RefinedFilter::list_start_bytes(unsigned pivot_len) const {
  const std::uint64_t bb = store_->block_bytes();
  const std::uint64_t pivot_bytes = (pivot_buckets(pivot_len) + 1) * 4;
  return bb + ceil_div(pivot_bytes, bb) * bb;
}

void RefinedFilter::insert_batch(FilterEntryCursor& batch,
                                 std::uint64_t n_new) {
  if (store_ == nullptr) throw std::logic_error("filter not initialized");
  const std::uint64_t new_count = count_ + n_new;
  if (new_count > capacity_) {
    throw CorruptionError("filter over capacity: " + std::to_string(count_) +
                          " + " + std::to_string(n_new) + " > " +
                          std::to_string(capacity_));
  }
  if (n_new == 0) return;
  const unsigned c = char_bits_;
  const unsigned new_pivot_len = pick_pivot_len(new_count);
  const std::uint64_t buckets = pivot_buckets(new_pivot_len);
  const std::uint64_t bb = store_->block_bytes();

  // Worst-case list size: every entry a raw bucket-first or a maximal
  // varint, plus the three sketch characters.
  const unsigned worst_prefix_chars = std::max<unsigned>(
      p_len_, static_cast<unsigned>(ceil_div(p_len_ * c, c - 1)) + 1);
  const std::uint64_t worst_list_bits =
      new_count * (worst_prefix_chars + 3) * c + 64;
  if (worst_list_bits >= (std::uint64_t{1} << 32))
    throw CorruptionError("filter list exceeds 32-bit offset space");
  const std::uint64_t list_start = list_start_bytes(new_pivot_len);
  const std::uint64_t total_blocks =
      list_start / bb + ceil_div(worst_list_bits, 8 * bb);
  ExtentId out = store_->alloc(total_blocks);

  std::unique_ptr<FilterEntryCursor> old_cur;
  if (count_ > 0) old_cur = scan();

  BitWriter bits;
  BlockAppender list_out(*store_, out, list_start);
  std::vector<std::uint32_t> offsets(buckets + 1, 0);

  FilterEntry from_old, from_new;
  bool have_old = old_cur && old_cur->next(from_old);
  bool have_new = batch.next(from_new);
  std::uint64_t written = 0;
  std::uint64_t prev_prefix = 0;
  std::uint64_t cur_bucket = 0;  // offsets below this index are final
  std::uint64_t batch_taken = have_new ? 1 : 0;

  while (have_old || have_new) {
    // Old entries win ties so arrival order is preserved.
    const bool take_old = have_old && (!have_new || from_old.prefix <= from_new.prefix);
    const FilterEntry e = take_old ? from_old : from_new;
    if (take_old) {
      have_old = old_cur->next(from_old);
    } else {
      have_new = batch.next(from_new);
      if (have_new) ++batch_taken;
    }
    if (written > 0 && e.prefix < prev_prefix)
      throw CorruptionError("filter batch out of order");

    const std::uint64_t pv = pivot_of(e.prefix, new_pivot_len);
    const std::uint64_t pos = bits.bit_length();
    bool bucket_first = written == 0;
    if (written == 0 || pv > cur_bucket) {
      for (std::uint64_t x = written == 0 ? 0 : cur_bucket + 1; x <= pv; ++x)
        offsets[x] = static_cast<std::uint32_t>(pos);
      cur_bucket = pv;
      bucket_first = true;
    }
    if (bucket_first) {
      bits.put_bits(e.prefix, p_len_ * c);
      prefix_chars_ += p_len_;
    } else {
      const std::uint64_t delta = e.prefix - prev_prefix;
      bits.put_varint(delta, c);
      prefix_chars_ += varint_chars(delta, c);
    }
    bits.put_bits(e.sketch.child, c);
    bits.put_bits(e.sketch.check, c);
    bits.put_bits(e.sketch.next, c);
    prev_prefix = e.prefix;
    ++written;
    if ((written & 1023) == 0) {
      auto chunk = bits.take_full_bytes();
      list_out.append(chunk);
    }
  }
  if (written != new_count)
    throw CorruptionError("filter batch size mismatch: got " +
                          std::to_string(written - count_) + ", declared " +
                          std::to_string(n_new));
  (void)batch_taken;

  const std::uint64_t total_bits = bits.bit_length();
  if (total_bits > worst_list_bits)
    throw CorruptionError("filter list overflow");
  for (std::uint64_t x = written == 0 ? 0 : cur_bucket + 1; x <= buckets; ++x)
    offsets[x] = static_cast<std::uint32_t>(total_bits);
  {
    auto tail = bits.take();
    list_out.append(tail);
    list_out.finish();
  }

  // Pivot region, then the header.
  {
    BlockAppender pivot_out(*store_, out, bb);
    std::vector<std::byte> raw(offsets.size() * 4);
    for (std::size_t i = 0; i < offsets.size(); ++i)
      store_le32(raw.data() + 4 * i, offsets[i]);
    pivot_out.append(raw);
    pivot_out.finish();
  }
  {
    std::vector<std::byte> hdr(bb, std::byte{0});
    store_le32(hdr.data() + kOffMagic, kFilterMagic);
    store_le32(hdr.data() + kOffVersion, kFilterVersion);
    store_le64(hdr.data() + kOffCount, new_count);
    store_le64(hdr.data() + kOffListBits, total_bits);
    store_le32(hdr.data() + kOffPrefixLen, p_len_);
    store_le32(hdr.data() + kOffPivotLen, new_pivot_len);
    store_le32(hdr.data() + kOffLambda, lambda_);
    store_le64(hdr.data() + kOffCapacity, capacity_);
    static_assert(kHeaderBytes <= 512);
    store_->write_block(out, 0, hdr);
  }

  if (has_extent_) store_->free_extent(ext_);
  ext_ = out;
  has_extent_ = true;
  count_ = new_count;
  pivot_len_ = new_pivot_len;
  list_bits_ = total_bits;
}

std::vector<Sketch> RefinedFilter::lookup(std::uint64_t prefix) {
  if (count_ == 0) return {};
  const std::uint64_t pv = pivot_of(prefix, pivot_len_);
  std::byte raw[8];
  store_->read_bytes(ext_, store_->block_bytes() + pv * 4, raw);
  const std::uint32_t lo = load_le32(raw);
  const std::uint32_t hi = load_le32(raw + 4);
  if (lo == hi) return {};

  const unsigned c = char_bits_;
  const std::uint64_t start_byte = lo / 8;
  const std::uint64_t end_byte = ceil_div(hi, 8);
  StoreBitReader bits(*store_, ext_, list_start_bytes(pivot_len_) + start_byte,
                      end_byte - start_byte);
  if (lo % 8 != 0) bits.get_bits(lo % 8);
  const std::uint64_t limit = hi - (start_byte * 8);

  std::vector<Sketch> out;
  std::uint64_t cur = 0;
  bool first = true;
  while (bits.bit_pos() < limit) {
    if (first) {
      cur = bits.get_bits(p_len_ * c);
      first = false;
    } else {
      cur += bits.get_varint(c);
    }
    Sketch sk;
    sk.child = static_cast<std::uint32_t>(bits.get_bits(c));
    sk.check = static_cast<std::uint32_t>(bits.get_bits(c));
    sk.next = static_cast<std::uint32_t>(bits.get_bits(c));
    if (cur == prefix) {
      out.push_back(sk);
    } else if (cur > prefix) {
      break;
    }
  }
  return out;
}

std::unique_ptr<FilterEntryCursor> RefinedFilter::scan() const {
  return std::make_unique<FilterScanCursor>(*this);
}

void RefinedFilter::destroy() {
  if (store_ != nullptr && has_extent_) store_->free_extent(ext_);
  has_extent_ = false;
  count_ = 0;
  list_bits_ = 0;
}

}  // namespace boah
