// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#ifndef BOAH_ENTRY_HPP
#define BOAH_ENTRY_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "boah/fingerprint.hpp"

namespace boah {

// Fixed 24-byte record stored in sorted runs. payload is an opaque 8-byte
// value handle (tables point it at a key-value log record so full keys can be
// verified). prev_run chains same-prefix entries across runs of a level; 0
// means unset.
struct Entry {
  std::uint64_t fingerprint = 0;
  std::uint64_t payload = 0;
  std::uint64_t prev_run = 0;
};
static_assert(sizeof(Entry) == 24);

constexpr std::size_t kEntryBytes = sizeof(Entry);

// Pull cursor over a sorted entry sequence.
class EntryCursor {
 public:
  virtual ~EntryCursor() = default;
  virtual bool next(Entry& out) = 0;
};

class VectorCursor final : public EntryCursor {
 public:
  explicit VectorCursor(std::vector<Entry> v) : v_(std::move(v)) {}
  bool next(Entry& out) override {
    if (i_ >= v_.size()) return false;
    out = v_[i_++];
    return true;
  }

 private:
  std::vector<Entry> v_;
  std::size_t i_ = 0;
};

}  // namespace boah

#endif  // BOAH_ENTRY_HPP
