#pragma once

// Bit-level plumbing shared by the classical side of the protocol: growable
// bit strings, a checked sequential reader, hex rendering, and a small digest.
// Bits are stored one per byte (values 0/1) and serialized MSB-first.

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aqs {

using BitString = std::vector<std::uint8_t>;

// Thrown when an encoded structure cannot be read back (truncated stream,
// out-of-range field, junk after the last field). Decoders at module
// boundaries catch this and report "malformed" instead of propagating.
struct CodecError : std::runtime_error {
  explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

inline void append_bit(BitString& out, int bit) {
  out.push_back(bit ? 1u : 0u);
}

// Appends the low `bit_count` bits of `value`, most significant first.
inline void append_uint(BitString& out, std::uint64_t value, int bit_count) {
  if (bit_count < 0 || bit_count > 64) throw std::invalid_argument("append_uint: bit_count out of range");
  for (int i = bit_count - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((value >> i) & 1u));
}

// IEEE-754 bit pattern of `value`, most significant bit first.
inline void append_f64(BitString& out, double value) {
  append_uint(out, std::bit_cast<std::uint64_t>(value), 64);
}

inline void append_bits(BitString& out, const BitString& more) {
  out.insert(out.end(), more.begin(), more.end());
}

// Sequential bit reader over a BitString. Every read is bounds-checked and
// throws CodecError on overrun; callers check leftover() at the end to reject
// trailing junk.
class BitReader {
 public:
  explicit BitReader(const BitString& bits) : bits_(bits) {}

  bool read_bit() {
    if (pos_ >= bits_.size()) throw CodecError("bit stream truncated");
    return bits_[pos_++] != 0;
  }

  std::uint64_t read_uint(int bit_count) {
    if (bit_count < 0 || bit_count > 64) throw CodecError("read_uint: bit_count out of range");
    std::uint64_t v = 0;
    for (int i = 0; i < bit_count; ++i) v = (v << 1) | (read_bit() ? 1u : 0u);
    return v;
  }

  double read_f64() { return std::bit_cast<double>(read_uint(64)); }

  std::size_t leftover() const { return bits_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  const BitString& bits_;
  std::size_t pos_ = 0;
};

inline BitString xor_bits(const BitString& a, const BitString& b) {
  if (a.size() != b.size()) throw std::invalid_argument("xor_bits: length mismatch");
  BitString out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

// Lowercase hex of the bits packed MSB-first into bytes (last byte zero-padded).
inline std::string to_hex(const BitString& bits) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve((bits.size() + 7) / 8 * 2);
  for (std::size_t i = 0; i < bits.size(); i += 8) {
    unsigned byte = 0;
    for (std::size_t j = 0; j < 8; ++j) {
      byte <<= 1;
      if (i + j < bits.size()) byte |= bits[i + j];
    }
    out.push_back(digits[byte >> 4]);
    out.push_back(digits[byte & 0xf]);
  }
  return out;
}

// FNV-1a over the packed bytes. Used as a transcript-binding fingerprint
// (collision resistance is not a goal of the simulator; tamper evidence over
// random flips is).
inline std::uint64_t digest64(const BitString& bits) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < bits.size(); i += 8) {
    unsigned byte = 0;
    for (std::size_t j = 0; j < 8; ++j) {
      byte <<= 1;
      if (i + j < bits.size()) byte |= bits[i + j];
    }
    h ^= byte;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace aqs
