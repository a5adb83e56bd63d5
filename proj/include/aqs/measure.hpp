#pragma once

// Projective measurements used by the protocol: the two-qubit entangled-pair
// basis measurement Alice performs, and the +/-x single-qubit measurements
// Bob and the arbitrator perform. Also the teleportation correction table
// and the analytic (oracle) distributions the sampled chain is tested against.
//
// Pair-basis convention used throughout (it is what makes the correction
// table below come out right):
//   PsiPlus  = (|00> + |11>)/sqrt2      PsiMinus = (|00> - |11>)/sqrt2
//   PhiPlus  = (|01> + |10>)/sqrt2      PhiMinus = (|01> - |10>)/sqrt2

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "aqs/random.hpp"
#include "aqs/state.hpp"

namespace aqs {

enum class BellOutcome { PsiPlus, PsiMinus, PhiPlus, PhiMinus };
enum class XOutcome { PlusX, MinusX };

inline constexpr std::array<BellOutcome, 4> kAllBellOutcomes{BellOutcome::PsiPlus, BellOutcome::PsiMinus,
                                                             BellOutcome::PhiPlus, BellOutcome::PhiMinus};
inline constexpr std::array<XOutcome, 2> kAllXOutcomes{XOutcome::PlusX, XOutcome::MinusX};

inline const char* to_string(BellOutcome o) {
  switch (o) {
    case BellOutcome::PsiPlus: return "Psi+";
    case BellOutcome::PsiMinus: return "Psi-";
    case BellOutcome::PhiPlus: return "Phi+";
    case BellOutcome::PhiMinus: return "Phi-";
  }
  return "?";
}

inline const char* to_string(XOutcome o) {
  return o == XOutcome::PlusX ? "+x" : "-x";
}

inline PureState bell_state(BellOutcome o) {
  std::vector<Amplitude> amps(4, Amplitude{0.0, 0.0});
  switch (o) {
    case BellOutcome::PsiPlus:
      amps[0] = amps[3] = Amplitude{kInvSqrt2, 0.0};
      break;
    case BellOutcome::PsiMinus:
      amps[0] = Amplitude{kInvSqrt2, 0.0};
      amps[3] = Amplitude{-kInvSqrt2, 0.0};
      break;
    case BellOutcome::PhiPlus:
      amps[1] = amps[2] = Amplitude{kInvSqrt2, 0.0};
      break;
    case BellOutcome::PhiMinus:
      amps[1] = Amplitude{kInvSqrt2, 0.0};
      amps[2] = Amplitude{-kInvSqrt2, 0.0};
      break;
  }
  return PureState::from_amplitudes(2, std::move(amps));
}

inline PureState x_state(XOutcome o) {
  double s = (o == XOutcome::PlusX) ? kInvSqrt2 : -kInvSqrt2;
  return PureState::from_amplitudes(1, {Amplitude{kInvSqrt2, 0.0}, Amplitude{s, 0.0}});
}

namespace detail {

// Drops the bits at the (ascending) qubit positions in `removed` from `index`,
// compacting the remaining bits while preserving their order.
template <std::size_t N>
std::size_t compact_index(std::size_t index, const std::array<int, N>& removed, int qubit_count) {
  std::size_t out = 0;
  for (int q = 0; q < qubit_count; ++q) {
    bool skip = false;
    for (int r : removed)
      if (r == q) skip = true;
    if (skip) continue;
    out = (out << 1) | qubit_bit(index, q, qubit_count);
  }
  return out;
}

// Inverse of compact_index for a single removed position: re-inserts `bit` at
// qubit position `at` into a (qubit_count-1)-bit compacted index.
inline std::size_t insert_bit(std::size_t compact, int at, std::size_t bit, int qubit_count) {
  std::size_t out = 0;
  std::size_t src = qubit_count - 1;  // bits remaining to place, counting down
  for (int q = 0; q < qubit_count; ++q) {
    std::size_t b;
    if (q == at) {
      b = bit;
    } else {
      --src;
      b = (compact >> src) & 1u;
    }
    out = (out << 1) | b;
  }
  return out;
}

}  // namespace detail

// Outcome branch of a projective measurement: the Born probability and the
// normalized residual state on the unmeasured qubits. `residual` is absent
// when the branch has (numerically) zero probability.
struct ProjectionResult {
  double probability = 0.0;
  std::optional<PureState> residual;
};

// Projects qubits (q1, q2) of `state` onto the two-qubit `basis2` vector.
inline ProjectionResult project_pair(const PureState& state, int q1, int q2, const PureState& basis2) {
  int k = state.qubit_count();
  if (k < 2) throw std::invalid_argument("project_pair: register too small");
  if (q1 < 0 || q1 >= k || q2 < 0 || q2 >= k || q1 == q2)
    throw std::invalid_argument("project_pair: bad qubit pair");
  if (basis2.qubit_count() != 2) throw std::invalid_argument("project_pair: basis must be two qubits");

  std::array<int, 2> removed{std::min(q1, q2), std::max(q1, q2)};
  std::vector<Amplitude> residual(std::size_t{1} << (k - 2), Amplitude{0.0, 0.0});
  for (std::size_t i = 0; i < state.dim(); ++i) {
    std::size_t b1 = qubit_bit(i, q1, k);
    std::size_t b2 = qubit_bit(i, q2, k);
    std::size_t rest = detail::compact_index(i, removed, k);
    residual[rest] += std::conj(basis2[(b1 << 1) | b2]) * state[i];
  }
  double p = 0.0;
  for (const auto& a : residual) p += std::norm(a);
  ProjectionResult out;
  out.probability = p;
  if (p > 1e-15) {
    double inv = 1.0 / std::sqrt(p);
    for (auto& a : residual) a *= inv;
    out.residual = PureState::from_amplitudes(k - 2, std::move(residual));
  }
  return out;
}

// Projects a single qubit of `state` onto the one-qubit `basis1` vector.
inline ProjectionResult project_single(const PureState& state, int qubit, const PureState& basis1) {
  int k = state.qubit_count();
  if (k < 1) throw std::invalid_argument("project_single: register is empty");
  if (qubit < 0 || qubit >= k) throw std::out_of_range("project_single: qubit index out of range");
  if (basis1.qubit_count() != 1) throw std::invalid_argument("project_single: basis must be one qubit");

  std::array<int, 1> removed{qubit};
  std::vector<Amplitude> residual(std::size_t{1} << (k - 1), Amplitude{0.0, 0.0});
  for (std::size_t i = 0; i < state.dim(); ++i) {
    std::size_t b = qubit_bit(i, qubit, k);
    std::size_t rest = detail::compact_index(i, removed, k);
    residual[rest] += std::conj(basis1[b]) * state[i];
  }
  double p = 0.0;
  for (const auto& a : residual) p += std::norm(a);
  ProjectionResult out;
  out.probability = p;
  if (p > 1e-15) {
    double inv = 1.0 / std::sqrt(p);
    for (auto& a : residual) a *= inv;
    out.residual = PureState::from_amplitudes(k - 1, std::move(residual));
  }
  return out;
}

namespace detail {

template <typename Outcome, std::size_t N>
std::pair<Outcome, PureState> sample_branches(const std::array<Outcome, N>& outcomes,
                                              const std::array<ProjectionResult, N>& branches,
                                              RandomSource& rng) {
  double total = 0.0;
  for (const auto& b : branches) total += b.probability;
  if (total < 1e-9) throw std::logic_error("measurement branches do not sum to a probability");
  double u = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (!branches[i].residual) continue;
    cum += branches[i].probability;
    if (u < cum) return {outcomes[i], *branches[i].residual};
  }
  for (std::size_t i = N; i-- > 0;)
    if (branches[i].residual) return {outcomes[i], *branches[i].residual};
  throw std::logic_error("no realizable measurement branch");
}

}  // namespace detail

// Samples the entangled-pair basis measurement on qubits (q1, q2), removing
// them from the register. Returns the outcome and the normalized residual.
inline std::pair<BellOutcome, PureState> bell_measure(const PureState& state, std::pair<int, int> qubits,
                                                      RandomSource& rng) {
  std::array<ProjectionResult, 4> branches;
  for (std::size_t i = 0; i < 4; ++i)
    branches[i] = project_pair(state, qubits.first, qubits.second, bell_state(kAllBellOutcomes[i]));
  return detail::sample_branches(kAllBellOutcomes, branches, rng);
}

// Samples a +/-x measurement on one qubit, removing it from the register.
inline std::pair<XOutcome, PureState> x_measure(const PureState& state, int qubit, RandomSource& rng) {
  std::array<ProjectionResult, 2> branches;
  for (std::size_t i = 0; i < 2; ++i) branches[i] = project_single(state, qubit, x_state(kAllXOutcomes[i]));
  return detail::sample_branches(kAllXOutcomes, branches, rng);
}

// Teleportation repair: the Pauli Bob must apply to his share, given Alice's
// pair outcome and the arbitrator's x outcome, to recover the message qubit.
inline PauliOp pauli_correction(BellOutcome bell, XOutcome arb_x) {
  bool minus = (arb_x == XOutcome::MinusX);
  switch (bell) {
    case BellOutcome::PsiPlus: return minus ? PauliOp::SigmaZ : PauliOp::Identity;
    case BellOutcome::PsiMinus: return minus ? PauliOp::Identity : PauliOp::SigmaZ;
    case BellOutcome::PhiPlus: return minus ? PauliOp::SigmaXZ : PauliOp::SigmaX;
    case BellOutcome::PhiMinus: return minus ? PauliOp::SigmaX : PauliOp::SigmaXZ;
  }
  throw std::logic_error("pauli_correction: bad outcome");
}

// 2x2 density matrix, used for single-qubit marginals.
struct DensityMatrix2 {
  std::array<std::array<Amplitude, 2>, 2> m{};

  double trace() const { return m[0][0].real() + m[1][1].real(); }

  double max_abs_diff(const DensityMatrix2& other) const {
    double d = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) d = std::max(d, std::abs(m[i][j] - other.m[i][j]));
    return d;
  }
};

// Bob's share marginal after Alice's pair measurement, computed analytically:
// Psi branches leave diag(|alpha|^2, |beta|^2), Phi branches swap the weights.
// Off-diagonals vanish because the arbitrator's share is still unmeasured.
inline DensityMatrix2 bob_marginal(BellOutcome bell, const QubitSpec& message) {
  double wa = std::norm(message.alpha);
  double wb = std::norm(message.beta);
  DensityMatrix2 rho;
  bool swap = (bell == BellOutcome::PhiPlus || bell == BellOutcome::PhiMinus);
  rho.m[0][0] = Amplitude{swap ? wb : wa, 0.0};
  rho.m[1][1] = Amplitude{swap ? wa : wb, 0.0};
  return rho;
}

// Brute-force reduced density matrix of one qubit of a register (partial
// trace over everything else). Oracle for bob_marginal and friends.
inline DensityMatrix2 reduced_density(const PureState& state, int keep) {
  int k = state.qubit_count();
  if (k < 1) throw std::invalid_argument("reduced_density: register is empty");
  if (keep < 0 || keep >= k) throw std::out_of_range("reduced_density: qubit index out of range");
  DensityMatrix2 rho;
  std::size_t rest_dim = std::size_t{1} << (k - 1);
  for (std::size_t r = 0; r < rest_dim; ++r) {
    std::size_t i0 = detail::insert_bit(r, keep, 0, k);
    std::size_t i1 = detail::insert_bit(r, keep, 1, k);
    rho.m[0][0] += state[i0] * std::conj(state[i0]);
    rho.m[0][1] += state[i0] * std::conj(state[i1]);
    rho.m[1][0] += state[i1] * std::conj(state[i0]);
    rho.m[1][1] += state[i1] * std::conj(state[i1]);
  }
  return rho;
}

// Joint distribution over (pair outcome, Bob x, arbitrator x) for one message
// qubit glued onto the shared triple. 16 cells, indexed bell*4 + bob*2 + arb.
class JointDistribution {
 public:
  static int index(BellOutcome bell, XOutcome bob, XOutcome arb) {
    return static_cast<int>(bell) * 4 + static_cast<int>(bob) * 2 + static_cast<int>(arb);
  }

  double& at(BellOutcome bell, XOutcome bob, XOutcome arb) { return p_[index(bell, bob, arb)]; }
  double at(BellOutcome bell, XOutcome bob, XOutcome arb) const { return p_[index(bell, bob, arb)]; }
  double& cell(int i) { return p_.at(i); }
  double cell(int i) const { return p_.at(i); }

  double total() const {
    double t = 0.0;
    for (double v : p_) t += v;
    return t;
  }

  double total_variation(const JointDistribution& other) const {
    double d = 0.0;
    for (int i = 0; i < 16; ++i) d += std::abs(p_[i] - other.p_[i]);
    return 0.5 * d;
  }

 private:
  std::array<double, 16> p_{};
};

// Exact Born-rule enumeration of the full measurement chain. This is the
// oracle the sampled chain is validated against.
inline JointDistribution enumerate_joint_distribution(const QubitSpec& message) {
  JointDistribution dist;
  PureState full = compose(message, ghz3());
  for (BellOutcome bell : kAllBellOutcomes) {
    ProjectionResult pb = project_pair(full, 0, 1, bell_state(bell));
    if (!pb.residual) continue;
    // Residual order after removing (message, Alice): arbitrator = 0, Bob = 1.
    for (XOutcome bob : kAllXOutcomes) {
      ProjectionResult pbob = project_single(*pb.residual, 1, x_state(bob));
      if (!pbob.residual) continue;
      for (XOutcome arb : kAllXOutcomes) {
        ProjectionResult parb = project_single(*pbob.residual, 0, x_state(arb));
        dist.at(bell, bob, arb) = pb.probability * pbob.probability * parb.probability;
      }
    }
  }
  return dist;
}

struct MeasurementChainSample {
  BellOutcome bell;
  XOutcome bob;
  XOutcome arb;
};

// One sampled run of the signing/verification measurement chain for a single
// message qubit: pair measurement, then Bob's x, then the arbitrator's x.
inline MeasurementChainSample sample_measurement_chain(const QubitSpec& message, RandomSource& rng) {
  PureState full = compose(message, ghz3());
  auto [bell, rest] = bell_measure(full, {0, 1}, rng);
  auto [bob, rest2] = x_measure(rest, 1, rng);
  auto [arb, rest3] = x_measure(rest2, 0, rng);
  (void)rest3;
  return {bell, bob, arb};
}

using CorrectionFn = std::function<PauliOp(BellOutcome, XOutcome)>;

// Checks a candidate correction table against the physics: for every spec and
// every realizable (pair outcome, arbitrator x) branch, the corrected Bob
// share must match the original message with fidelity >= min_fidelity.
// Returns the first failing combination, or nullopt if the table is sound.
inline std::optional<std::pair<BellOutcome, XOutcome>> find_correction_failure(
    const CorrectionFn& correction, std::span<const QubitSpec> specs, double min_fidelity) {
  for (const QubitSpec& spec : specs) {
    PureState full = compose(spec, ghz3());
    PureState target = single_qubit(spec);
    for (BellOutcome bell : kAllBellOutcomes) {
      ProjectionResult pb = project_pair(full, 0, 1, bell_state(bell));
      if (!pb.residual) continue;
      for (XOutcome arb : kAllXOutcomes) {
        ProjectionResult pa = project_single(*pb.residual, 0, x_state(arb));
        if (!pa.residual) continue;
        PureState corrected = apply_pauli(correction(bell, arb), *pa.residual, 0);
        if (fidelity(corrected, target) < min_fidelity) return std::make_pair(bell, arb);
      }
    }
  }
  return std::nullopt;
}

}  // namespace aqs
