#pragma once

// Attack campaigns against the protocol, plus the arbitrator's two offline
// procedures: dispute resolution (did Alice sign this?) and denial resolution
// (did Bob receive it?). Every campaign is deterministic in its seed: trial t
// derives its own protocol seed and an independent adversary stream, so a
// campaign can be replayed bit for bit.
//
// Threat models:
//   BobForgeSignature            Bob fabricates a signature ciphertext without
//                                ever seeing Alice's key.
//   OutsiderTamperSignature      a channel outsider flips one ciphertext bit
//                                of the signature in flight.
//   OutsiderSwapMessage          a channel outsider swaps the message qubits,
//                                replaying the original signature.
//   KeyCompromiseForgeWithoutMa  the attacker holds Alice's key but not her
//                                pair outcomes, and substitutes uniform
//                                guesses for them.
//   AliceDisavow                 Alice denies a signature she produced.
//   BobDenyReceipt               Bob denies having received a signed message
//                                (countered by the deniability-resistant flow).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aqs/codec.hpp"
#include "aqs/otp.hpp"
#include "aqs/protocol.hpp"

namespace aqs {

enum class AttackKind {
  BobForgeSignature,
  OutsiderTamperSignature,
  OutsiderSwapMessage,
  KeyCompromiseForgeWithoutMa,
  AliceDisavow,
  BobDenyReceipt,
};

inline constexpr std::array<AttackKind, 6> kAllAttackKinds{
    AttackKind::BobForgeSignature,          AttackKind::OutsiderTamperSignature,
    AttackKind::OutsiderSwapMessage,        AttackKind::KeyCompromiseForgeWithoutMa,
    AttackKind::AliceDisavow,               AttackKind::BobDenyReceipt,
};

inline const char* to_string(AttackKind a) {
  switch (a) {
    case AttackKind::BobForgeSignature: return "BobForgeSignature";
    case AttackKind::OutsiderTamperSignature: return "OutsiderTamperSignature";
    case AttackKind::OutsiderSwapMessage: return "OutsiderSwapMessage";
    case AttackKind::KeyCompromiseForgeWithoutMa: return "KeyCompromiseForgeWithoutMa";
    case AttackKind::AliceDisavow: return "AliceDisavow";
    case AttackKind::BobDenyReceipt: return "BobDenyReceipt";
  }
  return "?";
}

inline std::optional<AttackKind> parse_attack_kind(const std::string& name) {
  for (AttackKind a : kAllAttackKinds)
    if (name == to_string(a)) return a;
  return std::nullopt;
}

enum class DisputeVerdict { SignedByAlice, NotSignedByAlice };
enum class DenialVerdict { Received, NotReceived };

inline const char* to_string(DisputeVerdict v) {
  return v == DisputeVerdict::SignedByAlice ? "signed-by-alice" : "not-signed-by-alice";
}

inline const char* to_string(DenialVerdict v) { return v == DenialVerdict::Received ? "received" : "not-received"; }

// ---------------------------------------------------------------------------
// Dispute resolution. The arbitrator decrypts the disputed signature under
// Alice's key and recomputes the rotated record for the claimed message; only
// a well-formed payload whose record matches bit for bit counts as Alice's.
// Never throws: malformed or undecryptable input simply is not her signature.
inline DisputeVerdict resolve_dispute(const CipherBlob& signature, const SecretKey& alice_key,
                                      const MessageString& claimed_message) {
  BitString plain;
  try {
    plain = otp_decrypt(alice_key, signature);
  } catch (const CipherError&) {
    return DisputeVerdict::NotSignedByAlice;
  }
  std::optional<SignaturePayload> payload = decode_signature(plain);
  if (!payload) return DisputeVerdict::NotSignedByAlice;
  std::size_t n = payload->record.size();
  if (n != claimed_message.size() || alice_key.bits.size() < n) return DisputeVerdict::NotSignedByAlice;

  RotatedRecord expected = transform_message(claimed_message, derive_bases(alice_key, n));
  BitString expected_bits, stored_bits;
  codec::write_record_entries(expected_bits, expected);
  codec::write_record_entries(stored_bits, payload->record);
  return expected_bits == stored_bits ? DisputeVerdict::SignedByAlice : DisputeVerdict::NotSignedByAlice;
}

// Denial resolution (deniability-resistant flow): the arbitrator's retained
// evidence refutes Bob's denial if Alice's bound signature opens under her
// key, its digest pins exactly the receipt ciphertext on file, and that
// receipt opens under Bob's key as a well-formed receipt for the same run.
inline DenialVerdict resolve_denial(const CipherBlob& bound_signature, const CipherBlob& receipt,
                                    const SecretKey& alice_key, const SecretKey& bob_key) {
  BitString bound_plain;
  try {
    bound_plain = otp_decrypt(alice_key, bound_signature);
  } catch (const CipherError&) {
    return DenialVerdict::NotReceived;
  }
  std::optional<BoundSignaturePayload> bound = decode_bound_signature(bound_plain);
  if (!bound) return DenialVerdict::NotReceived;
  if (bound->receipt_digest != digest64(receipt.bits)) return DenialVerdict::NotReceived;

  BitString receipt_plain;
  try {
    receipt_plain = otp_decrypt(bob_key, receipt);
  } catch (const CipherError&) {
    return DenialVerdict::NotReceived;
  }
  std::optional<ReceiptPlain> opened = decode_receipt(receipt_plain);
  if (!opened) return DenialVerdict::NotReceived;
  if (opened->message.size() != bound->payload.record.size()) return DenialVerdict::NotReceived;
  return DenialVerdict::Received;
}

// ---------------------------------------------------------------------------
// Campaigns

struct DetectionStats {
  AttackKind attack = AttackKind::BobForgeSignature;
  std::size_t n = 0;
  std::size_t trials = 0;
  std::size_t detected = 0;
  double rate = 0.0;
  // Analytic expectation for the campaign and a one-sigma width for the
  // observed rate, both computed per trial from the drawn messages.
  double expected_rate = 1.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

// Fidelity of a message qubit against its image under each non-identity
// Pauli. These are the exact survival probabilities of a wrong teleportation
// repair, used for the analytic detection expectation.
inline double pauli_survival(PauliOp op, const QubitSpec& q) {
  switch (op) {
    case PauliOp::Identity:
      return 1.0;
    case PauliOp::SigmaZ: {
      double d = std::norm(q.alpha) - std::norm(q.beta);
      return d * d;
    }
    case PauliOp::SigmaX: {
      double re = 2.0 * (std::conj(q.alpha) * q.beta).real();
      return re * re;
    }
    case PauliOp::SigmaXZ: {
      double im = 2.0 * (std::conj(q.alpha) * q.beta).imag();
      return im * im;
    }
  }
  return 0.0;
}

// Probability that one qubit survives a uniformly guessed pair outcome: the
// guess is right with probability 1/4, and each wrong guess lands exactly one
// of the non-identity Paulis on Bob's share.
inline double uniform_guess_pass_probability(const QubitSpec& q) {
  double pass = 1.0;  // correct guess
  for (PauliOp op : {PauliOp::SigmaX, PauliOp::SigmaZ, PauliOp::SigmaXZ})
    if (pauli_survival(op, q) >= 1.0 - kAcceptEpsilon) pass += 1.0;
  return pass / 4.0;
}

namespace detail {

inline MessageString draw_attack_message(std::size_t n, RandomSource& rng) {
  MessageString m;
  m.reserve(n);
  for (std::size_t i = 0; i < n; ++i) m.push_back(haar_random_qubit_nondegenerate(rng));
  return m;
}

inline std::uint64_t adversary_stream_seed(std::uint64_t trial_seed) {
  return trial_seed ^ 0x9e3779b97f4a7c15ull;
}

// Re-encrypts a plaintext over the same pad segment a blob came from.
inline CipherBlob reencrypt_segment(const SecretKey& key, std::size_t offset, const BitString& plain) {
  if (offset > key.bits.size() || key.bits.size() - offset < plain.size())
    throw CipherError("reencrypt_segment: pad segment out of range");
  CipherBlob blob;
  blob.pad_key_id = key.key_id;
  blob.pad_offset = offset;
  blob.bits.reserve(plain.size());
  for (std::size_t i = 0; i < plain.size(); ++i) blob.bits.push_back(plain[i] ^ key.bits[offset + i]);
  return blob;
}

}  // namespace detail

// Regions of the signature ciphertext a tampering outsider can aim at.
enum class TamperRegion { Header, PairField, RecordField, Anywhere };

struct TamperTrialResult {
  bool detected = false;
  std::optional<RejectReason> reason;
};

// One signing run with a single ciphertext bit flipped in the chosen region.
inline TamperTrialResult run_tamper_trial(TamperRegion region, std::size_t n, std::uint64_t trial_seed) {
  RandomSource adv(detail::adversary_stream_seed(trial_seed));
  ProtocolConfig config;
  config.n = n;
  config.seed = trial_seed;
  config.message = detail::draw_attack_message(n, adv);
  ChannelHooks hooks;
  hooks.on_deliver = [&adv, n, region](Envelope& e, const RunSecrets&) {
    auto* sm = std::get_if<SignedMessagePayload>(&e.payload);
    if (!sm) return;
    std::size_t lo = 0, hi = sm->signature.bits.size();
    switch (region) {
      case TamperRegion::Header: hi = 32; break;
      case TamperRegion::PairField: lo = 32; hi = 32 + 2 * n; break;
      case TamperRegion::RecordField: lo = 32 + 2 * n; break;
      case TamperRegion::Anywhere: break;
    }
    std::size_t at = lo + static_cast<std::size_t>(adv.uniform() * static_cast<double>(hi - lo));
    if (at >= hi) at = hi - 1;
    sm->signature.bits[at] ^= 1u;
  };
  Transcript t = run_protocol(config, hooks);
  TamperTrialResult r;
  r.detected = t.outcome != RunOutcome::Accepted;
  if (t.report && t.report->reject_reason) r.reason = t.report->reject_reason;
  return r;
}

// Runs a deterministic campaign of `trials` independent attacks and reports
// how often the protocol (or the arbitrator's offline procedure) caught it.
inline DetectionStats run_attack(AttackKind attack, std::size_t trials, std::size_t n, std::uint64_t seed) {
  if (n == 0 || trials == 0) throw std::invalid_argument("run_attack: need n >= 1 and trials >= 1");
  DetectionStats stats;
  stats.attack = attack;
  stats.n = n;
  stats.trials = trials;
  stats.seed = seed;

  double expected_sum = 0.0;
  double variance_sum = 0.0;

  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::uint64_t trial_seed = seed + trial;
    RandomSource adv(detail::adversary_stream_seed(trial_seed));
    MessageString message = detail::draw_attack_message(n, adv);
    bool detected = false;
    double p_detect = 1.0;  // analytic detection probability for this trial

    switch (attack) {
      case AttackKind::OutsiderTamperSignature: {
        detected = run_tamper_trial(TamperRegion::Anywhere, n, trial_seed).detected;
        break;
      }
      case AttackKind::OutsiderSwapMessage: {
        ProtocolConfig config;
        config.n = n;
        config.seed = trial_seed;
        config.message = message;
        ChannelHooks hooks;
        hooks.on_deliver = [&adv, n](Envelope& e, const RunSecrets&) {
          auto* sm = std::get_if<SignedMessagePayload>(&e.payload);
          if (!sm) return;
          sm->message = detail::draw_attack_message(n, adv);
        };
        detected = run_protocol(config, hooks).outcome != RunOutcome::Accepted;
        break;
      }
      case AttackKind::KeyCompromiseForgeWithoutMa: {
        ProtocolConfig config;
        config.n = n;
        config.seed = trial_seed;
        config.mode = VerifyMode::Deferred;
        config.message = message;
        ChannelHooks hooks;
        hooks.on_deliver = [&adv](Envelope& e, const RunSecrets& secrets) {
          auto* sm = std::get_if<SignedMessagePayload>(&e.payload);
          if (!sm || !secrets.alice_key) return;
          // Holder of Alice's key, blind to her outcomes: reopen the
          // signature, overwrite the pair outcomes with uniform guesses,
          // seal it again over the same pad segment.
          BitString plain = otp_decrypt(*secrets.alice_key, sm->signature);
          std::optional<SignaturePayload> payload = decode_signature(plain);
          if (!payload) return;
          for (BellOutcome& o : payload->bell_outcomes) o = kAllBellOutcomes[adv.uniform_int(4)];
          sm->signature = detail::reencrypt_segment(*secrets.alice_key, sm->signature.pad_offset,
                                                    encode_signature(*payload));
        };
        detected = run_protocol(config, hooks).outcome != RunOutcome::Accepted;
        double pass = 1.0;
        for (const QubitSpec& q : message) pass *= uniform_guess_pass_probability(q);
        p_detect = 1.0 - pass;
        break;
      }
      case AttackKind::BobForgeSignature: {
        // No signing run at all: Bob invents a ciphertext of the right length
        // with plausible pad coordinates and submits it with his own message.
        RandomSource rng(trial_seed);
        std::size_t key_length = std::max(required_alice_key_bits(n, Variant::Base),
                                          required_bob_key_bits(n, VerifyMode::Deferred, Variant::Base));
        InitialSetup setup = initial_phase(n, key_length, rng, VerifyMode::Deferred, Variant::Base);
        CipherBlob forged;
        forged.pad_key_id = setup.alice_key.key_id;
        forged.pad_offset = 0;
        for (std::size_t i = 0; i < signature_bit_length(n); ++i)
          forged.bits.push_back(static_cast<std::uint8_t>(adv.bit()));
        // Forging consumes Alice's pad segment from the verifier's viewpoint.
        setup.alice_key.cursor = signature_bit_length(n);
        Transcript t;
        t.config.n = n;
        t.config.seed = trial_seed;
        t.mark_phase("verification");
        Envelope envelope{PartyId::Alice, PartyId::Bob, SignedMessagePayload{message, forged}};
        Envelope delivered = deliver(std::move(envelope), t, {}, RunSecrets{&setup.alice_key, &setup.bob_key});
        VerificationReport report =
            verification_phase(delivered, setup.alice_key, setup.bob_key, setup.allocation,
                               VerifyMode::Deferred, Variant::Base, rng, t);
        detected = !report.accepted;
        break;
      }
      case AttackKind::AliceDisavow: {
        // Honest signing, then Alice denies it; detection means the dispute
        // procedure correctly pins the signature on her.
        RandomSource rng(trial_seed);
        std::size_t key_length = std::max(required_alice_key_bits(n, Variant::Base),
                                          required_bob_key_bits(n, VerifyMode::Deferred, Variant::Base));
        InitialSetup setup = initial_phase(n, key_length, rng, VerifyMode::Deferred, Variant::Base);
        Transcript t;
        t.config.n = n;
        t.config.seed = trial_seed;
        t.mark_phase("signing");
        SigningResult sr = signing_phase(message, setup.alice_key, setup.allocation, rng, t);
        detected = resolve_dispute(sr.signature, setup.alice_key, message) == DisputeVerdict::SignedByAlice;
        break;
      }
      case AttackKind::BobDenyReceipt: {
        // Honest deniability-resistant run; the hook snapshots the evidence
        // the arbitrator retains. Detection means the denial is refuted.
        ProtocolConfig config;
        config.n = n;
        config.seed = trial_seed;
        config.variant = Variant::Undeniable;
        config.message = message;
        std::optional<CipherBlob> receipt, bound;
        SecretKey alice_copy, bob_copy;
        ChannelHooks hooks;
        hooks.on_deliver = [&](Envelope& e, const RunSecrets& secrets) {
          if (const auto* f = std::get_if<ForwardedReceiptPayload>(&e.payload)) {
            receipt = f->receipt;
            bound = f->bound_signature;
            if (secrets.alice_key) alice_copy = *secrets.alice_key;
            if (secrets.bob_key) bob_copy = *secrets.bob_key;
          }
        };
        Transcript t = run_protocol(config, hooks);
        detected = t.outcome == RunOutcome::Accepted && receipt && bound &&
                   resolve_denial(*bound, *receipt, alice_copy, bob_copy) == DenialVerdict::Received;
        break;
      }
    }

    if (detected) stats.detected++;
    expected_sum += p_detect;
    variance_sum += p_detect * (1.0 - p_detect);
  }

  stats.rate = static_cast<double>(stats.detected) / static_cast<double>(trials);
  stats.expected_rate = expected_sum / static_cast<double>(trials);
  stats.sigma = std::sqrt(variance_sum) / static_cast<double>(trials);
  return stats;
}

}  // namespace aqs
