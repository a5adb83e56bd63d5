#pragma once

// The three-party signature protocol itself: setup of shared keys and
// entangled triples, Alice's signing phase, and the arbitrated verification
// exchange, all recorded into a deterministic transcript.
//
// Messages on the classical channel ("envelopes"):
//   signed-message     Alice -> Bob         message qubits + encrypted signature
//   receipt            Bob -> Arbitrator    Bob's encrypted receipt: his x outcomes
//                                           (if already measured), the signature
//                                           ciphertext as received, and the message
//   forwarded-receipt  Bob -> Alice -> Arbitrator (deniability-resistant variant)
//                                           the receipt plus Alice's re-signed
//                                           payload bound to the receipt's digest
//   arb-packet         Arbitrator -> Bob    outcomes, gamma verdict, signature copy
//
// Verification modes:
//   PaperOrder  Bob measures his shares in the x basis before involving the
//               arbitrator; his final check is an analytic consistency test.
//   Deferred    Bob keeps his shares unmeasured, applies the teleportation
//               correction after the arbitrator's packet arrives, and compares
//               the physical state against the original message qubit.

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aqs/bits.hpp"
#include "aqs/codec.hpp"
#include "aqs/key.hpp"
#include "aqs/measure.hpp"
#include "aqs/otp.hpp"
#include "aqs/random.hpp"
#include "aqs/record.hpp"
#include "aqs/state.hpp"

namespace aqs {

// A verified run accepts only if every reconstructed qubit matches this close.
inline constexpr double kAcceptEpsilon = 1e-6;

enum class PartyId { Alice, Bob, Arbitrator };
enum class VerifyMode { PaperOrder, Deferred };
enum class Variant { Base, Undeniable };
enum class RejectReason { GammaZero, StateMismatch, DecryptError };
enum class RunOutcome { Accepted, Rejected, Error };

inline const char* to_string(PartyId p) {
  switch (p) {
    case PartyId::Alice: return "Alice";
    case PartyId::Bob: return "Bob";
    case PartyId::Arbitrator: return "Arbitrator";
  }
  return "?";
}

inline const char* to_string(VerifyMode m) { return m == VerifyMode::PaperOrder ? "paper-order" : "deferred"; }
inline const char* to_string(Variant v) { return v == Variant::Undeniable ? "undeniable" : "base"; }

inline const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::GammaZero: return "GammaZero";
    case RejectReason::StateMismatch: return "StateMismatch";
    case RejectReason::DecryptError: return "DecryptError";
  }
  return "?";
}

inline const char* to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::Accepted: return "accepted";
    case RunOutcome::Rejected: return "rejected";
    case RunOutcome::Error: return "error";
  }
  return "?";
}

using MessageString = std::vector<QubitSpec>;

// One shared entangled triple plus bookkeeping for which share sits at which
// qubit index as measurements shrink the register. An index of -1 means that
// share has been measured out.
struct GhzRegister {
  PureState state = ghz3();
  int alice = 0;
  int arbitrator = 1;
  int bob = 2;
  bool composed = false;  // message qubit glued on yet?
};

struct GhzAllocation {
  std::vector<GhzRegister> registers;
};

// ---------------------------------------------------------------------------
// Envelopes

struct SignedMessagePayload {
  MessageString message;
  CipherBlob signature;
};

struct ReceiptPayload {
  CipherBlob blob;
};

struct ArbPacketPayload {
  CipherBlob blob;
};

struct ForwardedReceiptPayload {
  CipherBlob receipt;
  CipherBlob bound_signature;
};

using EnvelopePayload =
    std::variant<SignedMessagePayload, ReceiptPayload, ArbPacketPayload, ForwardedReceiptPayload>;

struct Envelope {
  PartyId sender = PartyId::Alice;
  PartyId receiver = PartyId::Bob;
  EnvelopePayload payload;
};

inline const char* payload_kind_name(const EnvelopePayload& p) {
  switch (p.index()) {
    case 0: return "signed-message";
    case 1: return "receipt";
    case 2: return "arb-packet";
    case 3: return "forwarded-receipt";
  }
  return "?";
}

inline BitString encode_envelope_payload(const EnvelopePayload& p) {
  BitString out;
  append_uint(out, p.index(), 2);
  if (const auto* sm = std::get_if<SignedMessagePayload>(&p)) {
    codec::write_qubits(out, sm->message);
    codec::write_blob(out, sm->signature);
  } else if (const auto* r = std::get_if<ReceiptPayload>(&p)) {
    codec::write_blob(out, r->blob);
  } else if (const auto* a = std::get_if<ArbPacketPayload>(&p)) {
    codec::write_blob(out, a->blob);
  } else if (const auto* f = std::get_if<ForwardedReceiptPayload>(&p)) {
    codec::write_blob(out, f->receipt);
    codec::write_blob(out, f->bound_signature);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plaintext layouts of the encrypted envelopes

// Bob's receipt: his x outcomes (empty in deferred mode), the signature
// ciphertext exactly as received, and the message qubits as he holds them.
struct ReceiptPlain {
  std::vector<XOutcome> bob_outcomes;
  CipherBlob signature;
  MessageString message;
};

inline BitString encode_receipt(const ReceiptPlain& r) {
  BitString out;
  codec::write_x_outcomes(out, r.bob_outcomes);
  codec::write_blob(out, r.signature);
  codec::write_qubits(out, r.message);
  return out;
}

inline std::optional<ReceiptPlain> decode_receipt(const BitString& plain) {
  try {
    BitReader in(plain);
    ReceiptPlain r;
    r.bob_outcomes = codec::read_x_outcomes(in);
    r.signature = codec::read_blob(in);
    r.message = codec::read_qubits(in);
    if (in.leftover() != 0) return std::nullopt;
    return r;
  } catch (const CodecError&) {
    return std::nullopt;
  }
}

// The arbitrator's verdict packet.
struct ArbPacketPlain {
  std::vector<BellOutcome> alice_outcomes;
  std::vector<XOutcome> bob_outcomes;
  std::vector<XOutcome> arb_outcomes;
  int gamma = 0;
  CipherBlob signature;  // signature (or bound signature) ciphertext, echoed
};

inline BitString encode_arb_packet(const ArbPacketPlain& p) {
  BitString out;
  codec::write_bell_outcomes(out, p.alice_outcomes);
  codec::write_x_outcomes(out, p.bob_outcomes);
  codec::write_x_outcomes(out, p.arb_outcomes);
  append_bit(out, p.gamma ? 1 : 0);
  codec::write_blob(out, p.signature);
  return out;
}

inline std::optional<ArbPacketPlain> decode_arb_packet(const BitString& plain) {
  try {
    BitReader in(plain);
    ArbPacketPlain p;
    p.alice_outcomes = codec::read_bell_outcomes(in);
    p.bob_outcomes = codec::read_x_outcomes(in);
    p.arb_outcomes = codec::read_x_outcomes(in);
    p.gamma = in.read_bit() ? 1 : 0;
    p.signature = codec::read_blob(in);
    if (in.leftover() != 0) return std::nullopt;
    return p;
  } catch (const CodecError&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Pad budget. Every ciphertext length is a closed form in n, so a run can
// check up front that the pre-shared keys cover the whole exchange.

inline std::size_t framed_blob_bit_length(std::size_t payload_bits) { return 160 + payload_bits; }
inline std::size_t qubits_bit_length(std::size_t n) { return 32 + 256 * n; }
inline std::size_t x_outcomes_bit_length(std::size_t n) { return 32 + n; }
inline std::size_t bell_outcomes_bit_length(std::size_t n) { return 32 + 2 * n; }

inline std::size_t receipt_bit_length(std::size_t n, VerifyMode mode) {
  return x_outcomes_bit_length(mode == VerifyMode::PaperOrder ? n : 0) +
         framed_blob_bit_length(signature_bit_length(n)) + qubits_bit_length(n);
}

inline std::size_t arb_packet_bit_length(std::size_t n, VerifyMode mode, Variant variant) {
  std::size_t sig =
      variant == Variant::Undeniable ? bound_signature_bit_length(n) : signature_bit_length(n);
  return bell_outcomes_bit_length(n) + x_outcomes_bit_length(mode == VerifyMode::PaperOrder ? n : 0) +
         x_outcomes_bit_length(n) + 1 + framed_blob_bit_length(sig);
}

inline std::size_t required_alice_key_bits(std::size_t n, Variant variant) {
  std::size_t r = signature_bit_length(n);
  if (variant == Variant::Undeniable) r += bound_signature_bit_length(n);
  return r;
}

inline std::size_t required_bob_key_bits(std::size_t n, VerifyMode mode, Variant variant) {
  return receipt_bit_length(n, mode) + arb_packet_bit_length(n, mode, variant);
}

// ---------------------------------------------------------------------------
// Transcript

struct TranscriptEvent {
  std::uint64_t seq = 0;
  std::string kind;         // config | phase | envelope | measurement | report
  std::string sender = "-";
  std::string receiver = "-";
  std::string payload_hex = "-";
  std::string phase = "-";  // initial | signing | verification | -
  std::string extra;        // preformatted " key=value ..." suffix, may be empty
};

struct VerificationReport {
  bool accepted = false;
  int gamma = 0;
  VerifyMode mode = VerifyMode::Deferred;
  std::vector<double> per_qubit_fidelity;
  std::optional<RejectReason> reject_reason;
};

struct PadSegment {
  std::uint64_t key_id = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct ProtocolConfig {
  std::size_t n = 8;
  std::uint64_t seed = 0;
  VerifyMode mode = VerifyMode::Deferred;
  Variant variant = Variant::Base;
  std::optional<MessageString> message;    // absent: fresh Haar message per run
  std::optional<std::size_t> key_length;   // absent: exact requirement for (n, mode, variant)
};

class Transcript {
 public:
  ProtocolConfig config;
  RunOutcome outcome = RunOutcome::Error;
  std::optional<VerificationReport> report;
  std::string error_code;               // empty unless outcome == Error
  std::vector<TranscriptEvent> events;
  std::vector<PadSegment> pad_segments;  // every pad interval consumed in the run

  void add_event(std::string kind, std::string sender, std::string receiver, std::string payload_hex,
                 std::string extra = "") {
    TranscriptEvent e;
    e.seq = next_seq_++;
    e.kind = std::move(kind);
    e.sender = std::move(sender);
    e.receiver = std::move(receiver);
    e.payload_hex = std::move(payload_hex);
    e.phase = current_phase_;
    e.extra = std::move(extra);
    events.push_back(std::move(e));
  }

  void mark_phase(const std::string& name) {
    current_phase_ = name;
    add_event("phase", "-", "-", "-");
  }

  void note_pad(const CipherBlob& blob) { pad_segments.push_back({blob.pad_key_id, blob.pad_offset, blob.length()}); }

  const std::string& current_phase() const { return current_phase_; }

  // One line per event:
  //   seq=<n> sender=<party> receiver=<party> kind=<kind> payload_hex=<hex> phase=<phase>[ extras]
  std::string serialize() const {
    std::string out;
    for (const TranscriptEvent& e : events) {
      out += "seq=" + std::to_string(e.seq);
      out += " sender=" + e.sender;
      out += " receiver=" + e.receiver;
      out += " kind=" + e.kind;
      out += " payload_hex=" + (e.payload_hex.empty() ? std::string("-") : e.payload_hex);
      out += " phase=" + e.phase;
      out += e.extra;
      out += "\n";
    }
    return out;
  }

 private:
  std::uint64_t next_seq_ = 0;
  std::string current_phase_ = "-";
};

// ---------------------------------------------------------------------------
// Channel. Envelopes pass through deliver(), which applies the adversary hook
// (if any) and records what the receiver actually sees. RunSecrets models key
// compromise: a hook that legitimately holds a party's key gets it from here,
// honest runs never read it.

struct RunSecrets {
  const SecretKey* alice_key = nullptr;
  const SecretKey* bob_key = nullptr;
};

using DeliverHook = std::function<void(Envelope&, const RunSecrets&)>;

struct ChannelHooks {
  DeliverHook on_deliver;  // applied to every envelope in flight
};

inline Envelope deliver(Envelope envelope, Transcript& transcript, const ChannelHooks& hooks,
                        const RunSecrets& secrets) {
  if (hooks.on_deliver) hooks.on_deliver(envelope, secrets);
  transcript.add_event("envelope", to_string(envelope.sender), to_string(envelope.receiver),
                       to_hex(encode_envelope_payload(envelope.payload)),
                       std::string(" payload=") + payload_kind_name(envelope.payload));
  return envelope;
}

// ---------------------------------------------------------------------------
// Phase 1: setup

struct InitialSetup {
  SecretKey alice_key;  // shared Alice <-> arbitrator
  SecretKey bob_key;    // shared Bob <-> arbitrator
  GhzAllocation allocation;
};

// Generates both shared keys (each `key_length` bits) and n entangled
// triples. Throws PadExhausted before creating anything if `key_length`
// cannot cover the run's pad budget for the given mode and variant.
inline InitialSetup initial_phase(std::size_t n, std::size_t key_length, RandomSource& rng,
                                  VerifyMode mode = VerifyMode::Deferred, Variant variant = Variant::Base) {
  if (n == 0) throw std::invalid_argument("initial_phase: n must be at least 1");
  std::size_t need_a = required_alice_key_bits(n, variant);
  std::size_t need_b = required_bob_key_bits(n, mode, variant);
  if (key_length < need_a || key_length < need_b)
    throw PadExhausted("initial_phase: key of " + std::to_string(key_length) + " bits cannot cover run (need " +
                       std::to_string(std::max(need_a, need_b)) + ")");
  InitialSetup setup;
  setup.alice_key = generate_key(key_length, rng);
  setup.bob_key = generate_key(key_length, rng);
  setup.allocation.registers.assign(n, GhzRegister{});
  return setup;
}

// ---------------------------------------------------------------------------
// Phase 2: signing

struct SigningResult {
  std::vector<BellOutcome> outcomes;
  RotatedRecord record;
  CipherBlob signature;
  Envelope envelope;  // signed-message, not yet delivered
};

namespace detail {

inline int drop_index(int share, int removed_a, int removed_b = -1) {
  if (share < 0) return share;
  int s = share;
  if (share > removed_a) --s;
  if (removed_b >= 0 && share > removed_b) --s;
  return s;
}

inline std::string pack_bell_hex(const std::vector<BellOutcome>& v) {
  BitString bits;
  codec::write_bell_codes(bits, v);
  return to_hex(bits);
}

inline std::string pack_x_hex(const std::vector<XOutcome>& v) {
  BitString bits;
  for (XOutcome o : v) append_bit(bits, o == XOutcome::MinusX ? 1 : 0);
  return to_hex(bits);
}

}  // namespace detail

// Alice signs: glue each message qubit onto its triple, measure the
// (message, her-share) pair in the entangled basis, rotate the message into
// her key-derived bases, and encrypt outcomes + record as the signature.
inline SigningResult signing_phase(const MessageString& message, SecretKey& alice_key, GhzAllocation& alloc,
                                   RandomSource& rng, Transcript& transcript) {
  std::size_t n = message.size();
  if (n == 0) throw std::invalid_argument("signing_phase: empty message");
  if (alloc.registers.size() != n)
    throw std::invalid_argument("signing_phase: allocation does not match message length");

  SigningResult result;
  result.outcomes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    GhzRegister& reg = alloc.registers[i];
    if (reg.composed || reg.alice < 0) throw std::logic_error("signing_phase: register already used");
    reg.state = compose(message[i], reg.state);
    reg.composed = true;
    // After compose: 0 = message, 1 = Alice, 2 = arbitrator, 3 = Bob.
    auto [outcome, residual] = bell_measure(reg.state, {0, 1}, rng);
    reg.state = residual;
    reg.alice = -1;
    reg.arbitrator = 0;
    reg.bob = 1;
    result.outcomes.push_back(outcome);
  }

  BasisSequence bases = derive_bases(alice_key, n);
  result.record = transform_message(message, bases);
  BitString plain = encode_signature({result.outcomes, result.record});
  result.signature = otp_encrypt(alice_key, plain);
  transcript.note_pad(result.signature);
  transcript.add_event("measurement", "Alice", "-", detail::pack_bell_hex(result.outcomes),
                       " basis=pair count=" + std::to_string(n));

  result.envelope.sender = PartyId::Alice;
  result.envelope.receiver = PartyId::Bob;
  result.envelope.payload = SignedMessagePayload{message, result.signature};
  return result;
}

// ---------------------------------------------------------------------------
// Analytic two-qubit residual on (arbitrator, Bob) after a given pair
// outcome, for message alpha|0> + beta|1>:
//   Psi+ -> alpha|00> + beta|11>      Psi- -> alpha|00> - beta|11>
//   Phi+ -> beta|00> + alpha|11>      Phi- -> beta|00> - alpha|11>
inline PureState analytic_pair_residual(BellOutcome bell, const QubitSpec& message) {
  std::vector<Amplitude> amps(4, Amplitude{0.0, 0.0});
  switch (bell) {
    case BellOutcome::PsiPlus:
      amps[0] = message.alpha;
      amps[3] = message.beta;
      break;
    case BellOutcome::PsiMinus:
      amps[0] = message.alpha;
      amps[3] = -message.beta;
      break;
    case BellOutcome::PhiPlus:
      amps[0] = message.beta;
      amps[3] = message.alpha;
      break;
    case BellOutcome::PhiMinus:
      amps[0] = message.beta;
      amps[3] = -message.alpha;
      break;
  }
  return PureState::from_amplitudes(2, std::move(amps));
}

// ---------------------------------------------------------------------------
// Phase 3: verification

namespace detail {

struct GammaCheck {
  int gamma = 0;
  std::vector<BellOutcome> alice_outcomes;  // as decoded from the signature
};

// Arbitrator's comparison: decrypt the signature, recompute the rotated
// record from the reported message under Alice's key-derived bases, and
// demand that the stored record region match the recomputation bit for bit.
// Any decode failure or mismatch yields gamma = 0, never an exception.
inline GammaCheck check_signature_against_message(const BitString& sig_plain, std::size_t expected_n,
                                                  const MessageString& reported_message,
                                                  const SecretKey& alice_key, bool bound,
                                                  std::uint64_t expected_digest = 0) {
  GammaCheck out;
  std::optional<SignaturePayload> payload;
  if (bound) {
    auto decoded = decode_bound_signature(sig_plain);
    if (!decoded) return out;
    if (decoded->receipt_digest != expected_digest) return out;
    payload = std::move(decoded->payload);
  } else {
    payload = decode_signature(sig_plain);
    if (!payload) return out;
  }
  out.alice_outcomes = payload->bell_outcomes;
  std::size_t n = payload->record.size();
  if (n != expected_n || reported_message.size() != expected_n) return out;

  RotatedRecord expected = transform_message(reported_message, derive_bases(alice_key, n));
  BitString expected_bits;
  codec::write_record_entries(expected_bits, expected);
  // Record region sits after the count and the 2-bit pair codes.
  std::size_t start = 32 + 2 * n;
  if (sig_plain.size() < start + expected_bits.size()) return out;
  for (std::size_t i = 0; i < expected_bits.size(); ++i)
    if (sig_plain[start + i] != expected_bits[i]) return out;
  out.gamma = 1;
  return out;
}

inline VerificationReport reject(VerifyMode mode, RejectReason reason, int gamma = 0) {
  VerificationReport r;
  r.mode = mode;
  r.gamma = gamma;
  r.accepted = false;
  r.reject_reason = reason;
  return r;
}

inline void log_report(Transcript& t, const VerificationReport& r) {
  std::string extra = " accepted=";
  extra += r.accepted ? "true" : "false";
  extra += " gamma=" + std::to_string(r.gamma);
  extra += " mode=";
  extra += to_string(r.mode);
  if (r.per_qubit_fidelity.empty()) {
    extra += " min_fidelity=-";
  } else {
    double mn = r.per_qubit_fidelity.front();
    for (double f : r.per_qubit_fidelity) mn = std::min(mn, f);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9f", mn);
    extra += " min_fidelity=";
    extra += buf;
  }
  extra += " reject_reason=";
  extra += r.reject_reason ? to_string(*r.reject_reason) : "-";
  extra += " error=-";
  t.add_event("report", "-", "-", "-", extra);
}

}  // namespace detail

// Runs the verification exchange for an already-delivered signed message.
// `alice_memory` is Alice's retained signing payload; the deniability-
// resistant variant needs it to produce the bound signature, the base flow
// ignores it. Appends its own report event to the transcript.
inline VerificationReport verification_phase(const Envelope& delivered, SecretKey& alice_key, SecretKey& bob_key,
                                             GhzAllocation& alloc, VerifyMode mode, Variant variant,
                                             RandomSource& rng, Transcript& transcript,
                                             const ChannelHooks& hooks = {},
                                             const SignaturePayload* alice_memory = nullptr) {
  const auto* signed_msg = std::get_if<SignedMessagePayload>(&delivered.payload);
  if (!signed_msg) throw std::invalid_argument("verification_phase: expected a signed-message envelope");
  if (variant == Variant::Undeniable && !alice_memory)
    throw std::invalid_argument("verification_phase: variant flow needs Alice's signing payload");
  RunSecrets secrets{&alice_key, &bob_key};
  const MessageString& message = signed_msg->message;
  std::size_t n = alloc.registers.size();

  auto finish = [&](VerificationReport r) {
    detail::log_report(transcript, r);
    return r;
  };

  if (message.size() != n || n == 0)
    return finish(detail::reject(mode, RejectReason::DecryptError));

  // Bob's receipt. In paper order he measures his shares first; deferred mode
  // sends an empty outcome list and keeps the shares live.
  std::vector<XOutcome> bob_local;
  if (mode == VerifyMode::PaperOrder) {
    bob_local.reserve(n);
    for (GhzRegister& reg : alloc.registers) {
      auto [outcome, residual] = x_measure(reg.state, reg.bob, rng);
      reg.state = residual;
      int measured = reg.bob;
      reg.bob = -1;
      reg.arbitrator = detail::drop_index(reg.arbitrator, measured);
      bob_local.push_back(outcome);
    }
    transcript.add_event("measurement", "Bob", "-", detail::pack_x_hex(bob_local),
                         " basis=x count=" + std::to_string(n));
  }

  ReceiptPlain receipt_plain{bob_local, signed_msg->signature, message};
  CipherBlob receipt = otp_encrypt(bob_key, encode_receipt(receipt_plain));
  transcript.note_pad(receipt);

  // Route the receipt: straight to the arbitrator, or through Alice in the
  // deniability-resistant variant, where she binds a fresh signature copy to
  // the exact ciphertext she saw.
  CipherBlob receipt_at_arb;
  std::optional<CipherBlob> bound_sig;
  if (variant == Variant::Base) {
    Envelope e{PartyId::Bob, PartyId::Arbitrator, ReceiptPayload{receipt}};
    Envelope got = deliver(std::move(e), transcript, hooks, secrets);
    receipt_at_arb = std::get<ReceiptPayload>(got.payload).blob;
  } else {
    Envelope to_alice{PartyId::Bob, PartyId::Alice, ReceiptPayload{receipt}};
    Envelope at_alice = deliver(std::move(to_alice), transcript, hooks, secrets);
    const CipherBlob& seen = std::get<ReceiptPayload>(at_alice.payload).blob;
    BitString bound_plain = encode_bound_signature(*alice_memory, digest64(seen.bits));
    CipherBlob bound = otp_encrypt(alice_key, bound_plain);
    transcript.note_pad(bound);
    Envelope to_arb{PartyId::Alice, PartyId::Arbitrator, ForwardedReceiptPayload{seen, bound}};
    Envelope at_arb = deliver(std::move(to_arb), transcript, hooks, secrets);
    const auto& fwd = std::get<ForwardedReceiptPayload>(at_arb.payload);
    receipt_at_arb = fwd.receipt;
    bound_sig = fwd.bound_signature;
  }

  // Arbitrator: open the receipt, check the signature against the reported
  // message, measure his own shares, and send the verdict packet.
  BitString receipt_bits;
  try {
    receipt_bits = otp_decrypt(bob_key, receipt_at_arb);
  } catch (const CipherError&) {
    return finish(detail::reject(mode, RejectReason::DecryptError));
  }
  std::optional<ReceiptPlain> opened = decode_receipt(receipt_bits);
  if (!opened) return finish(detail::reject(mode, RejectReason::DecryptError));

  detail::GammaCheck gamma;
  CipherBlob echoed_signature;
  if (variant == Variant::Base) {
    echoed_signature = opened->signature;
    BitString sig_plain;
    bool decrypted = true;
    try {
      sig_plain = otp_decrypt(alice_key, opened->signature);
    } catch (const CipherError&) {
      decrypted = false;
    }
    if (decrypted)
      gamma = detail::check_signature_against_message(sig_plain, n, opened->message, alice_key, false);
  } else {
    echoed_signature = *bound_sig;
    BitString bound_plain;
    bool decrypted = true;
    try {
      bound_plain = otp_decrypt(alice_key, *bound_sig);
    } catch (const CipherError&) {
      decrypted = false;
    }
    if (decrypted)
      gamma = detail::check_signature_against_message(bound_plain, n, opened->message, alice_key, true,
                                                      digest64(receipt_at_arb.bits));
  }

  std::vector<XOutcome> arb_outcomes;
  arb_outcomes.reserve(n);
  for (GhzRegister& reg : alloc.registers) {
    auto [outcome, residual] = x_measure(reg.state, reg.arbitrator, rng);
    reg.state = residual;
    int measured = reg.arbitrator;
    reg.arbitrator = -1;
    reg.bob = detail::drop_index(reg.bob, measured);
    arb_outcomes.push_back(outcome);
  }
  transcript.add_event("measurement", "Arbitrator", "-", detail::pack_x_hex(arb_outcomes),
                       " basis=x count=" + std::to_string(n));

  ArbPacketPlain packet{gamma.alice_outcomes, opened->bob_outcomes, arb_outcomes, gamma.gamma,
                        echoed_signature};
  CipherBlob packet_blob = otp_encrypt(bob_key, encode_arb_packet(packet));
  transcript.note_pad(packet_blob);
  Envelope verdict{PartyId::Arbitrator, PartyId::Bob, ArbPacketPayload{packet_blob}};
  Envelope verdict_got = deliver(std::move(verdict), transcript, hooks, secrets);

  // Bob's final decision.
  BitString packet_bits;
  try {
    packet_bits = otp_decrypt(bob_key, std::get<ArbPacketPayload>(verdict_got.payload).blob);
  } catch (const CipherError&) {
    return finish(detail::reject(mode, RejectReason::DecryptError));
  }
  std::optional<ArbPacketPlain> verdict_plain = decode_arb_packet(packet_bits);
  if (!verdict_plain) return finish(detail::reject(mode, RejectReason::DecryptError));

  VerificationReport report;
  report.mode = mode;
  report.gamma = verdict_plain->gamma;
  if (!verdict_plain->gamma) return finish(detail::reject(mode, RejectReason::GammaZero));
  if (verdict_plain->alice_outcomes.size() != n || verdict_plain->arb_outcomes.size() != n)
    return finish(detail::reject(mode, RejectReason::DecryptError, verdict_plain->gamma));

  report.per_qubit_fidelity.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    BellOutcome bell = verdict_plain->alice_outcomes[i];
    XOutcome arb_x = verdict_plain->arb_outcomes[i];
    double fid;
    if (mode == VerifyMode::Deferred) {
      // Physically repair the still-live share and compare with the message.
      GhzRegister& reg = alloc.registers[i];
      PureState corrected = apply_pauli(pauli_correction(bell, arb_x), reg.state, reg.bob);
      fid = fidelity(corrected, single_qubit(message[i]));
    } else {
      // Bob already measured; reconstruct analytically and check that his
      // recorded outcome is realizable in the claimed branch.
      ProjectionResult arb_proj =
          project_single(analytic_pair_residual(bell, message[i]), 0, x_state(arb_x));
      if (!arb_proj.residual) {
        fid = 0.0;
      } else {
        double p_local = std::norm((*arb_proj.residual)[0] * kInvSqrt2 +
                                   (*arb_proj.residual)[1] * (bob_local[i] == XOutcome::PlusX ? kInvSqrt2 : -kInvSqrt2));
        fid = p_local > kAlgebraTolerance ? 1.0 : 0.0;
      }
    }
    report.per_qubit_fidelity.push_back(fid);
  }

  bool all_good = true;
  for (double f : report.per_qubit_fidelity)
    if (f < 1.0 - kAcceptEpsilon) all_good = false;
  report.accepted = all_good;
  if (!all_good) report.reject_reason = RejectReason::StateMismatch;
  return finish(report);
}

// ---------------------------------------------------------------------------
// Whole-run orchestration

namespace detail {

inline std::string config_extra(const ProtocolConfig& c) {
  std::string s = " n=" + std::to_string(c.n);
  s += " seed=" + std::to_string(c.seed);
  s += " mode=";
  s += to_string(c.mode);
  s += " variant=";
  s += to_string(c.variant);
  s += c.message ? " message=explicit" : " message=haar";
  return s;
}

inline void log_error_report(Transcript& t, const std::string& code) {
  t.add_event("report", "-", "-", "-",
              " accepted=false gamma=- mode=" + std::string(to_string(t.config.mode)) +
                  " min_fidelity=- reject_reason=- error=" + code);
}

}  // namespace detail

// One complete protocol run under a single seed. Every coin (keys, entangled
// sampling, Haar message draw) comes from one generator, so two runs with the
// same config produce byte-identical transcripts.
inline Transcript run_protocol(const ProtocolConfig& config, const ChannelHooks& hooks = {}) {
  Transcript t;
  t.config = config;
  t.add_event("config", "-", "-", "-", detail::config_extra(config));

  if (config.n == 0 || (config.message && config.message->size() != config.n)) {
    t.outcome = RunOutcome::Error;
    t.error_code = "bad-config";
    detail::log_error_report(t, t.error_code);
    return t;
  }

  RandomSource rng(config.seed);
  std::size_t key_length = config.key_length.value_or(
      std::max(required_alice_key_bits(config.n, config.variant),
               required_bob_key_bits(config.n, config.mode, config.variant)));

  t.mark_phase("initial");
  InitialSetup setup;
  try {
    setup = initial_phase(config.n, key_length, rng, config.mode, config.variant);
  } catch (const PadExhausted&) {
    t.outcome = RunOutcome::Error;
    t.error_code = "pad-exhausted";
    detail::log_error_report(t, t.error_code);
    return t;
  }

  MessageString message;
  if (config.message) {
    message = *config.message;
  } else {
    message.reserve(config.n);
    for (std::size_t i = 0; i < config.n; ++i) message.push_back(haar_random_qubit(rng));
  }

  RunSecrets secrets{&setup.alice_key, &setup.bob_key};
  try {
    t.mark_phase("signing");
    SigningResult signed_result = signing_phase(message, setup.alice_key, setup.allocation, rng, t);
    Envelope delivered = deliver(std::move(signed_result.envelope), t, hooks, secrets);

    t.mark_phase("verification");
    SignaturePayload memory{signed_result.outcomes, signed_result.record};
    VerificationReport report =
        verification_phase(delivered, setup.alice_key, setup.bob_key, setup.allocation, config.mode,
                           config.variant, rng, t, hooks, &memory);
    t.report = report;
    t.outcome = report.accepted ? RunOutcome::Accepted : RunOutcome::Rejected;
  } catch (const PadExhausted&) {
    t.outcome = RunOutcome::Error;
    t.error_code = "pad-exhausted";
    detail::log_error_report(t, t.error_code);
  }
  return t;
}

// Convenience wrapper for the deniability-resistant flow.
inline Transcript undeniable_variant(ProtocolConfig config, const ChannelHooks& hooks = {}) {
  config.variant = Variant::Undeniable;
  return run_protocol(config, hooks);
}

}  // namespace aqs
