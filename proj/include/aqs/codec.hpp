#pragma once

// Canonical bit layouts for everything the parties put on the wire. All
// multi-bit integers are written MSB-first; counts are 32-bit; amplitudes are
// IEEE-754 doubles (64 bits each, real then imaginary). Layouts:
//
//   pair-outcome code   2 bits   Psi+ = 00, Psi- = 01, Phi+ = 10, Phi- = 11
//   x-outcome code      1 bit    +x = 0, -x = 1
//   basis tag           1 bit    rectilinear = 0, diagonal = 1
//   record entry        257 bits [tag][re a0][im a0][re a1][im a1]
//   qubit               256 bits [re alpha][im alpha][re beta][im beta]
//   signature           32 + 259n bits   [n][pair codes x n][record entries x n]
//   bound signature     96 + 259n bits   signature + [64-bit receipt digest]
//   framed blob         160 + L bits     [key id][pad offset][length L][cipher bits]
//
// Decoders validate everything (counts, finiteness, normalization, exact
// length) and report malformed input as std::nullopt at the boundary.

#include <cstdint>
#include <optional>
#include <vector>

#include "aqs/bits.hpp"
#include "aqs/measure.hpp"
#include "aqs/otp.hpp"
#include "aqs/record.hpp"
#include "aqs/state.hpp"

namespace aqs {

// Upper bound on any decoded count; desk-scale runs are far below this, and
// it keeps a flipped header bit from requesting a gigabyte.
inline constexpr std::size_t kMaxCodecCount = 1u << 20;

namespace codec {

inline void write_count(BitString& out, std::size_t count) {
  if (count > kMaxCodecCount) throw std::invalid_argument("codec: count too large");
  append_uint(out, count, 32);
}

inline std::size_t read_count(BitReader& in) {
  std::uint64_t v = in.read_uint(32);
  if (v > kMaxCodecCount) throw CodecError("count field out of range");
  return static_cast<std::size_t>(v);
}

inline void write_bell_codes(BitString& out, const std::vector<BellOutcome>& outcomes) {
  for (BellOutcome o : outcomes) append_uint(out, static_cast<std::uint64_t>(o), 2);
}

inline std::vector<BellOutcome> read_bell_codes(BitReader& in, std::size_t n) {
  std::vector<BellOutcome> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<BellOutcome>(in.read_uint(2)));
  return out;
}

inline void write_bell_outcomes(BitString& out, const std::vector<BellOutcome>& outcomes) {
  write_count(out, outcomes.size());
  write_bell_codes(out, outcomes);
}

inline std::vector<BellOutcome> read_bell_outcomes(BitReader& in) {
  return read_bell_codes(in, read_count(in));
}

inline void write_x_outcomes(BitString& out, const std::vector<XOutcome>& outcomes) {
  write_count(out, outcomes.size());
  for (XOutcome o : outcomes) append_bit(out, o == XOutcome::MinusX ? 1 : 0);
}

inline std::vector<XOutcome> read_x_outcomes(BitReader& in) {
  std::size_t n = read_count(in);
  std::vector<XOutcome> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(in.read_bit() ? XOutcome::MinusX : XOutcome::PlusX);
  return out;
}

inline double read_checked_f64(BitReader& in) {
  double v = in.read_f64();
  if (!std::isfinite(v)) throw CodecError("non-finite amplitude component");
  return v;
}

inline void write_qubits(BitString& out, const std::vector<QubitSpec>& qubits) {
  write_count(out, qubits.size());
  for (const QubitSpec& q : qubits) {
    append_f64(out, q.alpha.real());
    append_f64(out, q.alpha.imag());
    append_f64(out, q.beta.real());
    append_f64(out, q.beta.imag());
  }
}

inline std::vector<QubitSpec> read_qubits(BitReader& in) {
  std::size_t n = read_count(in);
  std::vector<QubitSpec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Amplitude a{read_checked_f64(in), read_checked_f64(in)};
    Amplitude b{read_checked_f64(in), read_checked_f64(in)};
    if (std::abs(std::norm(a) + std::norm(b) - 1.0) > kNormTolerance)
      throw CodecError("qubit amplitudes not normalized");
    out.emplace_back(a, b);
  }
  return out;
}

inline void write_record_entries(BitString& out, const RotatedRecord& record) {
  for (const RecordEntry& e : record) {
    append_bit(out, e.tag == BasisTag::Diagonal ? 1 : 0);
    append_f64(out, e.amp0.real());
    append_f64(out, e.amp0.imag());
    append_f64(out, e.amp1.real());
    append_f64(out, e.amp1.imag());
  }
}

inline RotatedRecord read_record_entries(BitReader& in, std::size_t n) {
  RotatedRecord out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RecordEntry e;
    e.tag = in.read_bit() ? BasisTag::Diagonal : BasisTag::Rectilinear;
    e.amp0 = Amplitude{read_checked_f64(in), read_checked_f64(in)};
    e.amp1 = Amplitude{read_checked_f64(in), read_checked_f64(in)};
    if (std::abs(std::norm(e.amp0) + std::norm(e.amp1) - 1.0) > kNormTolerance)
      throw CodecError("record entry not normalized");
    out.push_back(e);
  }
  return out;
}

inline void write_blob(BitString& out, const CipherBlob& blob) {
  append_uint(out, blob.pad_key_id, 64);
  append_uint(out, blob.pad_offset, 64);
  write_count(out, blob.length());
  append_bits(out, blob.bits);
}

inline CipherBlob read_blob(BitReader& in) {
  CipherBlob blob;
  blob.pad_key_id = in.read_uint(64);
  std::uint64_t offset = in.read_uint(64);
  if (offset > kMaxCodecCount * 64ull) throw CodecError("pad offset out of range");
  blob.pad_offset = static_cast<std::size_t>(offset);
  std::size_t len = read_count(in);
  blob.bits.reserve(len);
  for (std::size_t i = 0; i < len; ++i) blob.bits.push_back(in.read_bit() ? 1u : 0u);
  return blob;
}

}  // namespace codec

// Plaintext of a signature: Alice's pair outcomes plus her rotated record,
// one of each per message qubit.
struct SignaturePayload {
  std::vector<BellOutcome> bell_outcomes;
  RotatedRecord record;
};

inline std::size_t signature_bit_length(std::size_t n) { return 32 + 259 * n; }
inline std::size_t bound_signature_bit_length(std::size_t n) { return 96 + 259 * n; }

inline BitString encode_signature(const SignaturePayload& payload) {
  if (payload.bell_outcomes.size() != payload.record.size())
    throw std::invalid_argument("encode_signature: outcome and record lengths differ");
  BitString out;
  out.reserve(signature_bit_length(payload.record.size()));
  codec::write_count(out, payload.record.size());
  codec::write_bell_codes(out, payload.bell_outcomes);
  codec::write_record_entries(out, payload.record);
  return out;
}

// Signature with a trailing digest that binds it to a specific receipt
// ciphertext (the deniability-resistant flow).
inline BitString encode_bound_signature(const SignaturePayload& payload, std::uint64_t receipt_digest) {
  BitString out = encode_signature(payload);
  append_uint(out, receipt_digest, 64);
  return out;
}

inline std::optional<SignaturePayload> decode_signature(const BitString& bits) {
  try {
    BitReader in(bits);
    std::size_t n = codec::read_count(in);
    if (n == 0) return std::nullopt;
    SignaturePayload payload;
    payload.bell_outcomes = codec::read_bell_codes(in, n);
    payload.record = codec::read_record_entries(in, n);
    if (in.leftover() != 0) return std::nullopt;
    return payload;
  } catch (const CodecError&) {
    return std::nullopt;
  }
}

struct BoundSignaturePayload {
  SignaturePayload payload;
  std::uint64_t receipt_digest = 0;
};

inline std::optional<BoundSignaturePayload> decode_bound_signature(const BitString& bits) {
  try {
    BitReader in(bits);
    std::size_t n = codec::read_count(in);
    if (n == 0) return std::nullopt;
    BoundSignaturePayload out;
    out.payload.bell_outcomes = codec::read_bell_codes(in, n);
    out.payload.record = codec::read_record_entries(in, n);
    out.receipt_digest = in.read_uint(64);
    if (in.leftover() != 0) return std::nullopt;
    return out;
  } catch (const CodecError&) {
    return std::nullopt;
  }
}

}  // namespace aqs
