// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Keys are mapped to 64-bit fingerprints by a seeded k-wise independent hash
// family: two independent polynomials of degree k-1 evaluated over
// GF(2^61 - 1), each contributing 32 bits. A fingerprint is then read as a
// string of c-bit characters (lambda = 2^c), most significant first:
//
//   |<- prefix(f, h): h characters ->| ... |<- check chars, from the end ->|
//
// prefix/next_char index characters from the top of the word; check_char(i)
// is the i-th c-bit group counted from the least significant bit, so prefix
// and check regions are disjoint as long as their total width fits W = 64.
#ifndef BOAH_FINGERPRINT_HPP
#define BOAH_FINGERPRINT_HPP

#include <cstdint>
#include <string_view>
#include <vector>

#include "boah/common.hpp"

namespace boah {

struct Fingerprint {
  std::uint64_t value = 0;
  friend auto operator<=>(const Fingerprint&, const Fingerprint&) = default;
};

class HashFamily {
 public:
  // degree = k of k-wise independence (>= 2); all randomness derives from
  // seed, so equal (degree, seed) pairs give identical families.
  HashFamily(unsigned degree, std::uint64_t seed);

  Fingerprint fingerprint(std::string_view key) const;
  unsigned degree() const { return degree_; }

 private:
  std::uint64_t eval(const std::vector<std::uint64_t>& coeff,
                     std::uint64_t x) const;
  unsigned degree_;
  std::vector<std::uint64_t> coeff_hi_;
  std::vector<std::uint64_t> coeff_lo_;
};

class Alphabet {
 public:
  static constexpr unsigned kWordBits = 64;

  explicit Alphabet(std::uint32_t lambda);

  std::uint32_t lambda() const { return lambda_; }
  unsigned char_bits() const { return char_bits_; }
  // Number of whole characters in a fingerprint.
  unsigned max_chars() const { return kWordBits / char_bits_; }

  // First `len` characters as an integer (0 <= len <= max_chars()).
  std::uint64_t prefix(Fingerprint f, unsigned len) const {
    if (len > max_chars()) throw std::out_of_range("prefix length");
    if (len == 0) return 0;
    return f.value >> (kWordBits - len * char_bits_);
  }

  // Character index h from the top; equals the character that extends
  // prefix(f, h) to prefix(f, h + 1).
  std::uint32_t next_char(Fingerprint f, unsigned h) const {
    if (h >= max_chars()) throw std::out_of_range("character index");
    return static_cast<std::uint32_t>(
        (f.value >> (kWordBits - (h + 1) * char_bits_)) & (lambda_ - 1));
  }

  // i-th character from the least significant end, i >= 1.
  std::uint32_t check_char(Fingerprint f, unsigned i) const {
    if (i == 0 || i > max_chars()) throw std::out_of_range("check index");
    return static_cast<std::uint32_t>((f.value >> ((i - 1) * char_bits_)) &
                                      (lambda_ - 1));
  }

 private:
  std::uint32_t lambda_;
  unsigned char_bits_;
};

// Per-bucket assignment used by interpolation layouts: fingerprint f of a
// 2^64 universe lands in bucket floor(f * q / 2^64).
inline std::uint64_t scale_to_buckets(Fingerprint f, std::uint64_t q) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(f.value) * q) >> 64);
}

// Default independence degree for a table expecting up to n_max keys.
unsigned default_hash_degree(std::uint64_t n_max);

}  // namespace boah

#endif  // BOAH_FINGERPRINT_HPP
