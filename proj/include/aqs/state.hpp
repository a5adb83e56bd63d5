#pragma once

// Dense state vectors for registers of up to four qubits, which is all the
// signature protocol ever touches at once (message qubit + three-party
// entangled triple). Indexing is big-endian: qubit 0 is the most significant
// bit of the amplitude index, so |q0 q1 q2> lands at index q0*4 + q1*2 + q2.

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "aqs/random.hpp"

namespace aqs {

using Amplitude = std::complex<double>;

// Tolerance for "is this state normalized" checks at construction and decode
// boundaries.
inline constexpr double kNormTolerance = 1e-9;
// Tolerance for exact linear-algebra identities (projector completeness,
// trace of a reduced density matrix, ...).
inline constexpr double kAlgebraTolerance = 1e-12;

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

inline bool amplitude_finite(const Amplitude& a) {
  return std::isfinite(a.real()) && std::isfinite(a.imag());
}

// A single qubit alpha|0> + beta|1>, the protocol's unit of message. Always
// normalized and finite by construction.
struct QubitSpec {
  Amplitude alpha{1.0, 0.0};
  Amplitude beta{0.0, 0.0};

  QubitSpec() = default;
  QubitSpec(Amplitude a, Amplitude b) : alpha(a), beta(b) {
    if (!amplitude_finite(alpha) || !amplitude_finite(beta))
      throw std::invalid_argument("QubitSpec: amplitudes must be finite");
    double n = std::norm(alpha) + std::norm(beta);
    if (std::abs(n - 1.0) > kNormTolerance)
      throw std::invalid_argument("QubitSpec: amplitudes must be normalized");
  }
};

class PureState {
 public:
  // |00...0> on `qubit_count` qubits (qubit_count 0 is the empty register
  // left over after every qubit of a state has been measured out).
  explicit PureState(int qubit_count) {
    check_count(qubit_count);
    qubit_count_ = qubit_count;
    amps_.assign(std::size_t{1} << qubit_count, Amplitude{0.0, 0.0});
    amps_[0] = Amplitude{1.0, 0.0};
  }

  static PureState from_amplitudes(int qubit_count, std::vector<Amplitude> amps) {
    check_count(qubit_count);
    if (amps.size() != (std::size_t{1} << qubit_count))
      throw std::invalid_argument("PureState: amplitude count does not match qubit count");
    double n = 0.0;
    for (const auto& a : amps) {
      if (!amplitude_finite(a)) throw std::invalid_argument("PureState: amplitudes must be finite");
      n += std::norm(a);
    }
    if (std::abs(n - 1.0) > kNormTolerance)
      throw std::invalid_argument("PureState: amplitudes must be normalized");
    PureState s;
    s.qubit_count_ = qubit_count;
    s.amps_ = std::move(amps);
    return s;
  }

  int qubit_count() const { return qubit_count_; }
  std::size_t dim() const { return amps_.size(); }
  const Amplitude& operator[](std::size_t index) const { return amps_.at(index); }
  const std::vector<Amplitude>& amplitudes() const { return amps_; }

  double norm_sq() const {
    double n = 0.0;
    for (const auto& a : amps_) n += std::norm(a);
    return n;
  }

 private:
  PureState() = default;
  static void check_count(int k) {
    if (k < 0 || k > 4) throw std::invalid_argument("PureState: qubit count must be in [0, 4]");
  }

  int qubit_count_ = 0;
  std::vector<Amplitude> amps_{Amplitude{1.0, 0.0}};
};

// Value of qubit `qubit` in basis index `index` of a `qubit_count`-qubit register.
inline std::size_t qubit_bit(std::size_t index, int qubit, int qubit_count) {
  return (index >> (qubit_count - 1 - qubit)) & 1u;
}

inline PureState basis_state(int qubit_count, std::size_t index) {
  std::vector<Amplitude> amps(std::size_t{1} << qubit_count, Amplitude{0.0, 0.0});
  amps.at(index) = Amplitude{1.0, 0.0};
  return PureState::from_amplitudes(qubit_count, std::move(amps));
}

inline PureState single_qubit(const QubitSpec& q) {
  return PureState::from_amplitudes(1, {q.alpha, q.beta});
}

// Kronecker product; `a`'s qubits become the most significant block.
inline PureState tensor(const PureState& a, const PureState& b) {
  int k = a.qubit_count() + b.qubit_count();
  if (k > 4) throw std::invalid_argument("tensor: combined register exceeds four qubits");
  std::vector<Amplitude> amps(a.dim() * b.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < b.dim(); ++j) amps[i * b.dim() + j] = a[i] * b[j];
  return PureState::from_amplitudes(k, std::move(amps));
}

// The three-party entangled triple (|000> + |111>)/sqrt2 shared out as
// (Alice a, arbitrator A, Bob b) in that qubit order.
inline PureState ghz3() {
  std::vector<Amplitude> amps(8, Amplitude{0.0, 0.0});
  amps[0] = Amplitude{kInvSqrt2, 0.0};
  amps[7] = Amplitude{kInvSqrt2, 0.0};
  return PureState::from_amplitudes(3, std::move(amps));
}

// Message qubit glued onto the shared triple. Resulting qubit order:
// 0 = message, 1 = Alice's share, 2 = arbitrator's share, 3 = Bob's share.
inline PureState compose(const QubitSpec& message, const PureState& ghz) {
  if (ghz.qubit_count() != 3) throw std::invalid_argument("compose: expected a three-qubit entangled register");
  return tensor(single_qubit(message), ghz);
}

// |<a|b>|^2, invariant under global phase of either argument.
inline double fidelity(const PureState& a, const PureState& b) {
  if (a.qubit_count() != b.qubit_count()) throw std::invalid_argument("fidelity: qubit count mismatch");
  Amplitude overlap{0.0, 0.0};
  for (std::size_t i = 0; i < a.dim(); ++i) overlap += std::conj(a[i]) * b[i];
  return std::norm(overlap);
}

enum class PauliOp { Identity, SigmaX, SigmaZ, SigmaXZ };

inline const char* to_string(PauliOp op) {
  switch (op) {
    case PauliOp::Identity: return "I";
    case PauliOp::SigmaX: return "X";
    case PauliOp::SigmaZ: return "Z";
    case PauliOp::SigmaXZ: return "XZ";
  }
  return "?";
}

// Applies a Pauli operator to one qubit. SigmaXZ means sigma_z first, then
// sigma_x (the product sigma_x * sigma_z as an operator).
inline PureState apply_pauli(PauliOp op, const PureState& state, int qubit) {
  if (qubit < 0 || qubit >= state.qubit_count()) throw std::out_of_range("apply_pauli: qubit index out of range");
  std::vector<Amplitude> amps = state.amplitudes();
  std::size_t mask = std::size_t{1} << (state.qubit_count() - 1 - qubit);
  if (op == PauliOp::SigmaZ || op == PauliOp::SigmaXZ) {
    for (std::size_t i = 0; i < amps.size(); ++i)
      if (i & mask) amps[i] = -amps[i];
  }
  if (op == PauliOp::SigmaX || op == PauliOp::SigmaXZ) {
    for (std::size_t i = 0; i < amps.size(); ++i)
      if (!(i & mask)) std::swap(amps[i], amps[i ^ mask]);
  }
  return PureState::from_amplitudes(state.qubit_count(), std::move(amps));
}

// Uniform (Haar) random qubit: four i.i.d. Gaussians, normalized.
inline QubitSpec haar_random_qubit(RandomSource& rng) {
  while (true) {
    Amplitude a{rng.gaussian(), rng.gaussian()};
    Amplitude b{rng.gaussian(), rng.gaussian()};
    double n2 = std::norm(a) + std::norm(b);
    if (n2 > 1e-12) {
      double inv = 1.0 / std::sqrt(n2);
      return QubitSpec{a * inv, b * inv};
    }
  }
}

// Haar sample conditioned away from the poles: both basis weights at least
// `min_weight`. Forgery campaigns use this so that a wrong phase-flip is
// never masked by an (almost-)basis state.
inline QubitSpec haar_random_qubit_nondegenerate(RandomSource& rng, double min_weight = 0.05) {
  while (true) {
    QubitSpec q = haar_random_qubit(rng);
    double w0 = std::norm(q.alpha);
    if (w0 >= min_weight && 1.0 - w0 >= min_weight) return q;
  }
}

}  // namespace aqs
