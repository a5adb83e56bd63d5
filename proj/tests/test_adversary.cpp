// Attack campaigns, the analytic detection expectations behind them, and the
// arbitrator's offline dispute / denial procedures.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "aqs/aqs.hpp"

using namespace aqs;
using Catch::Approx;

namespace {
constexpr double kInv = 0.7071067811865476;
const QubitSpec kSixEight{Amplitude{0.6, 0.0}, Amplitude{0.8, 0.0}};
const QubitSpec kPlus{Amplitude{kInv, 0.0}, Amplitude{kInv, 0.0}};
const QubitSpec kPlusI{Amplitude{kInv, 0.0}, Amplitude{0.0, kInv}};
}  // namespace

TEST_CASE("pauli survival probabilities: frozen values") {
  CHECK(pauli_survival(PauliOp::Identity, kSixEight) == 1.0);
  CHECK(pauli_survival(PauliOp::SigmaZ, kSixEight) == Approx(0.0784).margin(1e-12));
  CHECK(pauli_survival(PauliOp::SigmaX, kSixEight) == Approx(0.9216).margin(1e-12));
  CHECK(pauli_survival(PauliOp::SigmaXZ, kSixEight) == Approx(0.0).margin(1e-12));

  // The x eigenstate survives a bit flip exactly; the y eigenstate survives
  // the combined flip.
  CHECK(pauli_survival(PauliOp::SigmaX, kPlus) == Approx(1.0).margin(1e-12));
  CHECK(pauli_survival(PauliOp::SigmaZ, kPlus) == Approx(0.0).margin(1e-12));
  CHECK(pauli_survival(PauliOp::SigmaXZ, kPlusI) == Approx(1.0).margin(1e-12));
  CHECK(pauli_survival(PauliOp::SigmaX, kPlusI) == Approx(0.0).margin(1e-12));

  // Survival under each wrong repair matches a direct state computation.
  RandomSource rng(9);
  for (int i = 0; i < 30; ++i) {
    QubitSpec q = haar_random_qubit(rng);
    PureState target = single_qubit(q);
    for (PauliOp op : {PauliOp::SigmaX, PauliOp::SigmaZ, PauliOp::SigmaXZ})
      CHECK(pauli_survival(op, q) == Approx(fidelity(apply_pauli(op, target, 0), target)).margin(1e-12));
  }
}

TEST_CASE("uniform guess pass probability counts the surviving branches") {
  CHECK(uniform_guess_pass_probability(kSixEight) == Approx(0.25).margin(1e-12));
  CHECK(uniform_guess_pass_probability(kPlus) == Approx(0.5).margin(1e-12));
  CHECK(uniform_guess_pass_probability(kPlusI) == Approx(0.5).margin(1e-12));
  CHECK(uniform_guess_pass_probability(QubitSpec{}) == Approx(0.5).margin(1e-12));  // |0>: Z survives
}

TEST_CASE("attack names round-trip through the parser") {
  for (AttackKind a : kAllAttackKinds) {
    auto parsed = parse_attack_kind(to_string(a));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == a);
  }
  CHECK_FALSE(parse_attack_kind("NoSuchAttack").has_value());
  CHECK_FALSE(parse_attack_kind("bobforgesignature").has_value());
  CHECK_FALSE(parse_attack_kind("").has_value());
}

namespace {

// Produces the signing artifacts of an honest run for dispute tests.
struct SignedRun {
  SecretKey alice_key;
  SecretKey bob_key;
  MessageString message;
  CipherBlob signature;
};

SignedRun make_signed_run(std::size_t n, std::uint64_t seed) {
  RandomSource rng(seed);
  std::size_t key_length = required_bob_key_bits(n, VerifyMode::Deferred, Variant::Base);
  InitialSetup setup = initial_phase(n, key_length, rng);
  SignedRun run;
  run.message.reserve(n);
  for (std::size_t i = 0; i < n; ++i) run.message.push_back(haar_random_qubit(rng));
  Transcript t;
  SigningResult sr = signing_phase(run.message, setup.alice_key, setup.allocation, rng, t);
  run.signature = sr.signature;
  run.alice_key = std::move(setup.alice_key);
  run.bob_key = std::move(setup.bob_key);
  return run;
}

}  // namespace

TEST_CASE("dispute resolution pins genuine signatures on Alice") {
  for (std::uint64_t seed : {100ull, 101ull, 102ull}) {
    SignedRun run = make_signed_run(4, seed);
    CHECK(resolve_dispute(run.signature, run.alice_key, run.message) == DisputeVerdict::SignedByAlice);
  }
}

TEST_CASE("dispute resolution rejects everything that is not hers") {
  SignedRun run = make_signed_run(4, 200);

  SECTION("a different claimed message") {
    RandomSource rng(201);
    MessageString other;
    for (int i = 0; i < 4; ++i) other.push_back(haar_random_qubit(rng));
    CHECK(resolve_dispute(run.signature, run.alice_key, other) == DisputeVerdict::NotSignedByAlice);
  }
  SECTION("a single altered message qubit") {
    MessageString nearby = run.message;
    nearby[2] = QubitSpec{};
    CHECK(resolve_dispute(run.signature, run.alice_key, nearby) == DisputeVerdict::NotSignedByAlice);
  }
  SECTION("wrong message length") {
    MessageString shorter(run.message.begin(), run.message.begin() + 3);
    CHECK(resolve_dispute(run.signature, run.alice_key, shorter) == DisputeVerdict::NotSignedByAlice);
  }
  SECTION("random forged blobs") {
    RandomSource rng(202);
    for (int i = 0; i < 200; ++i) {
      CipherBlob forged;
      forged.pad_key_id = run.alice_key.key_id;
      forged.pad_offset = 0;
      for (std::size_t j = 0; j < signature_bit_length(4); ++j)
        forged.bits.push_back(static_cast<std::uint8_t>(rng.bit()));
      CHECK(resolve_dispute(forged, run.alice_key, run.message) == DisputeVerdict::NotSignedByAlice);
    }
  }
  SECTION("a signature under someone else's key") {
    SignedRun other = make_signed_run(4, 203);
    CHECK(resolve_dispute(other.signature, run.alice_key, other.message) == DisputeVerdict::NotSignedByAlice);
  }
  SECTION("a truncated ciphertext") {
    CipherBlob cut = run.signature;
    cut.bits.pop_back();
    CHECK(resolve_dispute(cut, run.alice_key, run.message) == DisputeVerdict::NotSignedByAlice);
  }
}

namespace {

// Captures the evidence the arbitrator retains from an undeniable run.
struct DenialEvidence {
  CipherBlob receipt;
  CipherBlob bound;
  SecretKey alice_key;
  SecretKey bob_key;
  bool accepted = false;
};

DenialEvidence gather_denial_evidence(std::size_t n, std::uint64_t seed) {
  DenialEvidence ev;
  ProtocolConfig config;
  config.n = n;
  config.seed = seed;
  config.variant = Variant::Undeniable;
  ChannelHooks hooks;
  hooks.on_deliver = [&ev](Envelope& e, const RunSecrets& secrets) {
    if (const auto* f = std::get_if<ForwardedReceiptPayload>(&e.payload)) {
      ev.receipt = f->receipt;
      ev.bound = f->bound_signature;
      ev.alice_key = *secrets.alice_key;
      ev.bob_key = *secrets.bob_key;
    }
  };
  ev.accepted = run_protocol(config, hooks).outcome == RunOutcome::Accepted;
  return ev;
}

}  // namespace

TEST_CASE("denial resolution refutes Bob with the retained evidence") {
  DenialEvidence ev = gather_denial_evidence(3, 300);
  REQUIRE(ev.accepted);
  CHECK(resolve_denial(ev.bound, ev.receipt, ev.alice_key, ev.bob_key) == DenialVerdict::Received);

  SECTION("a receipt that does not match the digest") {
    CipherBlob tampered = ev.receipt;
    tampered.bits.at(200) ^= 1u;
    CHECK(resolve_denial(ev.bound, tampered, ev.alice_key, ev.bob_key) == DenialVerdict::NotReceived);
  }
  SECTION("a bound signature under the wrong key") {
    CHECK(resolve_denial(ev.bound, ev.receipt, ev.bob_key, ev.bob_key) == DenialVerdict::NotReceived);
  }
  SECTION("a receipt that does not open under Bob's key") {
    CHECK(resolve_denial(ev.bound, ev.receipt, ev.alice_key, ev.alice_key) == DenialVerdict::NotReceived);
  }
  SECTION("a fabricated bound signature") {
    RandomSource rng(301);
    CipherBlob fake;
    fake.pad_key_id = ev.alice_key.key_id;
    fake.pad_offset = ev.bound.pad_offset;
    for (std::size_t i = 0; i < ev.bound.length(); ++i) fake.bits.push_back(static_cast<std::uint8_t>(rng.bit()));
    CHECK(resolve_denial(fake, ev.receipt, ev.alice_key, ev.bob_key) == DenialVerdict::NotReceived);
  }
}

TEST_CASE("tamper trials report the region-specific rejection") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    TamperTrialResult header = run_tamper_trial(TamperRegion::Header, 4, 1000 + trial);
    CHECK(header.detected);
    CHECK(header.reason == RejectReason::GammaZero);

    TamperTrialResult record = run_tamper_trial(TamperRegion::RecordField, 4, 2000 + trial);
    CHECK(record.detected);
    CHECK(record.reason == RejectReason::GammaZero);

    TamperTrialResult pair = run_tamper_trial(TamperRegion::PairField, 4, 3000 + trial);
    CHECK(pair.detected);
    CHECK(pair.reason == RejectReason::StateMismatch);
  }
}

TEST_CASE("campaigns: every channel attack is caught") {
  DetectionStats tamper = run_attack(AttackKind::OutsiderTamperSignature, 50, 4, 11);
  CHECK(tamper.detected == 50);
  CHECK(tamper.rate == 1.0);
  CHECK(tamper.n == 4);
  CHECK(tamper.trials == 50);
  CHECK(tamper.seed == 11);
  CHECK(tamper.attack == AttackKind::OutsiderTamperSignature);

  DetectionStats swap = run_attack(AttackKind::OutsiderSwapMessage, 40, 3, 12);
  CHECK(swap.rate == 1.0);

  DetectionStats forge = run_attack(AttackKind::BobForgeSignature, 40, 3, 13);
  CHECK(forge.rate == 1.0);
}

TEST_CASE("campaigns: repudiation attempts are refuted") {
  DetectionStats disavow = run_attack(AttackKind::AliceDisavow, 50, 3, 14);
  CHECK(disavow.rate == 1.0);

  DetectionStats deny = run_attack(AttackKind::BobDenyReceipt, 30, 3, 15);
  CHECK(deny.rate == 1.0);
}

TEST_CASE("key compromise without the pair outcomes is still detected") {
  DetectionStats stats = run_attack(AttackKind::KeyCompromiseForgeWithoutMa, 60, 8, 16);
  CHECK(stats.rate >= 0.95);
  CHECK(stats.expected_rate == Approx(1.0 - std::pow(0.25, 8)).margin(1e-4));
  CHECK(std::abs(stats.rate - stats.expected_rate) <= 3.0 * stats.sigma + 1e-9);

  // Shorter messages leave the forger a real chance, and the observed rate
  // must sit inside the analytic band.
  DetectionStats small = run_attack(AttackKind::KeyCompromiseForgeWithoutMa, 400, 2, 17);
  CHECK(small.expected_rate == Approx(1.0 - std::pow(0.25, 2)).margin(0.01));
  CHECK(std::abs(small.rate - small.expected_rate) <= 3.0 * small.sigma + 0.01);
  CHECK(small.rate < 1.0);  // with 400 trials some forgeries do slip through
}

TEST_CASE("campaigns are deterministic in their seed") {
  DetectionStats a = run_attack(AttackKind::KeyCompromiseForgeWithoutMa, 30, 3, 99);
  DetectionStats b = run_attack(AttackKind::KeyCompromiseForgeWithoutMa, 30, 3, 99);
  CHECK(a.detected == b.detected);
  CHECK(a.rate == b.rate);
  CHECK(a.expected_rate == b.expected_rate);
  CHECK(a.sigma == b.sigma);

  CHECK_THROWS_AS(run_attack(AttackKind::AliceDisavow, 0, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(run_attack(AttackKind::AliceDisavow, 3, 0, 1), std::invalid_argument);
}
