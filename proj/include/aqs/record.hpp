#pragma once

// The classical signing record: each message qubit's amplitudes re-expressed
// in a secret per-qubit basis derived from Alice's key. Rectilinear keeps the
// computational-basis amplitudes; diagonal rewrites them in the +/-x basis.
// The map is unitary per qubit, so it is exactly invertible by the adjoint
// rotation, and an arbitrator holding the same key can recompute the record
// from a claimed message and compare.

#include <stdexcept>
#include <vector>

#include "aqs/key.hpp"
#include "aqs/state.hpp"

namespace aqs {

struct RecordEntry {
  BasisTag tag = BasisTag::Rectilinear;
  Amplitude amp0{1.0, 0.0};  // weight on the basis's first vector
  Amplitude amp1{0.0, 0.0};
};

using RotatedRecord = std::vector<RecordEntry>;

inline RecordEntry rotate_qubit(const QubitSpec& q, BasisTag tag) {
  RecordEntry e;
  e.tag = tag;
  if (tag == BasisTag::Rectilinear) {
    e.amp0 = q.alpha;
    e.amp1 = q.beta;
  } else {
    // Components along (|0>+|1>)/sqrt2 and (|0>-|1>)/sqrt2.
    e.amp0 = (q.alpha + q.beta) * kInvSqrt2;
    e.amp1 = (q.alpha - q.beta) * kInvSqrt2;
  }
  return e;
}

// Adjoint of rotate_qubit: recovers the computational-basis amplitudes.
inline QubitSpec unrotate_entry(const RecordEntry& e) {
  if (e.tag == BasisTag::Rectilinear) return QubitSpec{e.amp0, e.amp1};
  return QubitSpec{(e.amp0 + e.amp1) * kInvSqrt2, (e.amp0 - e.amp1) * kInvSqrt2};
}

inline RotatedRecord transform_message(const std::vector<QubitSpec>& message, const BasisSequence& bases) {
  if (message.size() != bases.size())
    throw std::invalid_argument("transform_message: message and basis sequence lengths differ");
  RotatedRecord out;
  out.reserve(message.size());
  for (std::size_t i = 0; i < message.size(); ++i) out.push_back(rotate_qubit(message[i], bases[i]));
  return out;
}

// Entry-wise comparison up to per-entry global phase: tags must match and the
// overlap |<a_i|b_i>|^2 must be within `tolerance` of 1.
inline bool records_equal(const RotatedRecord& a, const RotatedRecord& b, double tolerance = kNormTolerance) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].tag != b[i].tag) return false;
    Amplitude overlap = std::conj(a[i].amp0) * b[i].amp0 + std::conj(a[i].amp1) * b[i].amp1;
    if (std::abs(std::norm(overlap) - 1.0) > tolerance) return false;
  }
  return true;
}

}  // namespace aqs
