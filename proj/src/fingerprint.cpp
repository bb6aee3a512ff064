// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/fingerprint.hpp"

#include <bit>

namespace boah {

namespace {

constexpr std::uint64_t kPrime = (1ULL << 61) - 1;

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b) {
  unsigned __int128 z = static_cast<unsigned __int128>(a) * b;
  std::uint64_t lo = static_cast<std::uint64_t>(z) & kPrime;
  std::uint64_t hi = static_cast<std::uint64_t>(z >> 61);
  std::uint64_t s = lo + hi;
  if (s >= kPrime) s -= kPrime;
  return s;
}

std::uint64_t splitmix(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Rejection sampling keeps coefficient draws platform-independent.
std::uint64_t draw_mod_p(std::uint64_t& state, std::uint64_t lo) {
  for (;;) {
    std::uint64_t v = splitmix(state) & kPrime;  // 61 bits
    if (v < kPrime && v >= lo) return v;
  }
}

// Seed-independent compression of a byte string into the field. Collisions
// here (~2^-64 per pair) are handled downstream by full-key verification.
std::uint64_t compress_key(std::string_view key) {
  std::uint64_t h = 0x243f6a8885a308d3ULL ^ (0x9e3779b97f4a7c15ULL * key.size());
  std::size_t i = 0;
  while (i + 8 <= key.size()) {
    std::uint64_t chunk;
    std::memcpy(&chunk, key.data() + i, 8);
    h = splitmix(h ^= chunk);
    i += 8;
  }
  if (i < key.size()) {
    std::uint64_t chunk = 0;
    std::memcpy(&chunk, key.data() + i, key.size() - i);
    h = splitmix(h ^= chunk);
  }
  return h % kPrime;
}

}  // namespace

HashFamily::HashFamily(unsigned degree, std::uint64_t seed) : degree_(degree) {
  if (degree_ < 2) throw std::invalid_argument("hash degree must be >= 2");
  std::uint64_t state = seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL;
  coeff_hi_.resize(degree_);
  coeff_lo_.resize(degree_);
  for (unsigned i = 0; i < degree_; ++i)
    coeff_hi_[i] = draw_mod_p(state, i + 1 == degree_ ? 1 : 0);
  for (unsigned i = 0; i < degree_; ++i)
    coeff_lo_[i] = draw_mod_p(state, i + 1 == degree_ ? 1 : 0);
}

std::uint64_t HashFamily::eval(const std::vector<std::uint64_t>& coeff,
                               std::uint64_t x) const {
  std::uint64_t acc = 0;
  for (std::size_t i = coeff.size(); i-- > 0;) {
    acc = mulmod(acc, x);
    acc += coeff[i];
    if (acc >= kPrime) acc -= kPrime;
  }
  return acc;
}

Fingerprint HashFamily::fingerprint(std::string_view key) const {
  std::uint64_t x = compress_key(key);
  std::uint64_t hi = eval(coeff_hi_, x) & 0xffffffffULL;
  std::uint64_t lo = eval(coeff_lo_, x) & 0xffffffffULL;
  return Fingerprint{(hi << 32) | lo};
}

Alphabet::Alphabet(std::uint32_t lambda) : lambda_(lambda) {
  if (!is_pow2(lambda) || lambda < 4 || lambda > 65536)
    throw std::invalid_argument("lambda must be a power of two in [4, 2^16]");
  char_bits_ = static_cast<unsigned>(std::countr_zero(lambda_));
}

unsigned default_hash_degree(std::uint64_t n_max) {
  unsigned bits = 1;
  while ((1ULL << bits) < n_max && bits < 63) ++bits;
  return bits < 2 ? 2 : bits;
}

}  // namespace boah
