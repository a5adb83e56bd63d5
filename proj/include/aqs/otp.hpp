#pragma once

// One-time-pad encryption over bit strings, plus the pad bookkeeping that
// keeps the "one-time" promise honest: every encryption consumes a fresh key
// segment, ciphertexts carry (key id, offset, length) so the holder of the
// same key can decrypt without any shared mutable state, and a PadAudit can
// certify that no pad bit was ever used twice in a run.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "aqs/bits.hpp"
#include "aqs/key.hpp"

namespace aqs {

// A requested pad segment is not available (key too short for the run).
struct PadExhausted : std::runtime_error {
  explicit PadExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Decryption cannot proceed at all (wrong key id, segment out of range).
// Distinct from CodecError: the pad layer worked but the plaintext is junk.
struct CipherError : std::runtime_error {
  explicit CipherError(const std::string& what) : std::runtime_error(what) {}
};

struct CipherBlob {
  BitString bits;
  std::uint64_t pad_key_id = 0;
  std::size_t pad_offset = 0;

  std::size_t length() const { return bits.size(); }
};

// XORs `plaintext` against the next unconsumed key segment and advances the
// cursor. Throws PadExhausted (leaving the key untouched) if the segment
// would run past the end of the key.
inline CipherBlob otp_encrypt(SecretKey& key, const BitString& plaintext) {
  if (key.unconsumed() < plaintext.size())
    throw PadExhausted("one-time pad exhausted: need " + std::to_string(plaintext.size()) + " bits, have " +
                       std::to_string(key.unconsumed()));
  CipherBlob blob;
  blob.pad_key_id = key.key_id;
  blob.pad_offset = key.cursor;
  blob.bits.reserve(plaintext.size());
  for (std::size_t i = 0; i < plaintext.size(); ++i)
    blob.bits.push_back(plaintext[i] ^ key.bits[key.cursor + i]);
  key.cursor += plaintext.size();
  return blob;
}

// XORs the blob against the key segment named in its header. Pure: does not
// touch the cursor, so a receiver can decrypt in any order.
inline BitString otp_decrypt(const SecretKey& key, const CipherBlob& blob) {
  if (blob.pad_key_id != key.key_id) throw CipherError("otp_decrypt: blob was encrypted under a different key");
  if (blob.pad_offset > key.bits.size() || key.bits.size() - blob.pad_offset < blob.bits.size())
    throw CipherError("otp_decrypt: pad segment out of range");
  BitString plain;
  plain.reserve(blob.bits.size());
  for (std::size_t i = 0; i < blob.bits.size(); ++i)
    plain.push_back(blob.bits[i] ^ key.bits[blob.pad_offset + i]);
  return plain;
}

// Records every (key id, offset, length) segment handed out during a run and
// reports overlaps. Used by tests to certify pad discipline.
class PadAudit {
 public:
  // Returns false (and still records) if the segment overlaps a prior one
  // under the same key id.
  bool add(std::uint64_t key_id, std::size_t offset, std::size_t length) {
    bool clean = true;
    auto& segments = used_[key_id];
    for (const auto& [off, len] : segments)
      if (offset < off + len && off < offset + length) clean = false;
    segments.emplace_back(offset, length);
    if (!clean) overlaps_++;
    return clean;
  }

  bool add(const CipherBlob& blob) { return add(blob.pad_key_id, blob.pad_offset, blob.length()); }

  std::size_t overlap_count() const { return overlaps_; }

 private:
  std::map<std::uint64_t, std::vector<std::pair<std::size_t, std::size_t>>> used_;
  std::size_t overlaps_ = 0;
};

}  // namespace aqs
