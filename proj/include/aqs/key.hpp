#pragma once

// Shared secret keys. Each party pair holds a pre-distributed random bit
// string; segments of it serve both as one-time-pad material (consumed via a
// cursor, never reused) and, for Alice's key, as the source of the per-qubit
// basis choices for the signing record.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "aqs/bits.hpp"
#include "aqs/random.hpp"

namespace aqs {

struct SecretKey {
  std::uint64_t key_id = 0;
  BitString bits;
  std::size_t cursor = 0;  // next unconsumed pad bit

  std::size_t unconsumed() const { return bits.size() - cursor; }
};

inline SecretKey generate_key(std::size_t length, RandomSource& rng) {
  if (length == 0) throw std::invalid_argument("generate_key: length must be positive");
  SecretKey key;
  key.key_id = rng.next_u64();
  key.bits.reserve(length);
  for (std::size_t i = 0; i < length; ++i) key.bits.push_back(static_cast<std::uint8_t>(rng.bit()));
  return key;
}

enum class BasisTag { Rectilinear, Diagonal };

inline const char* to_string(BasisTag t) {
  return t == BasisTag::Rectilinear ? "rectilinear" : "diagonal";
}

using BasisSequence = std::vector<BasisTag>;

// Per-qubit basis choices for the signing record, read from the first n key
// bits (0 = rectilinear, 1 = diagonal). Reading does not consume pad: the
// sequence is a pure function of the key, so signer and arbitrator derive the
// same bases independently.
inline BasisSequence derive_bases(const SecretKey& key, std::size_t n) {
  if (key.bits.size() < n) throw std::invalid_argument("derive_bases: key shorter than requested sequence");
  BasisSequence out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(key.bits[i] ? BasisTag::Diagonal : BasisTag::Rectilinear);
  return out;
}

}  // namespace aqs
