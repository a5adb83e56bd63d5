// End-to-end protocol behavior: pad budgets, phase mechanics, honest-run
// acceptance in both verification modes and both variants, tamper responses,
// transcript determinism, and pad discipline.

#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <string>
#include <variant>

#include "aqs/aqs.hpp"

using namespace aqs;
using Catch::Approx;

namespace {

const QubitSpec kSixEight{Amplitude{0.6, 0.0}, Amplitude{0.8, 0.0}};

MessageString repeated_message(std::size_t n, const QubitSpec& q) { return MessageString(n, q); }

std::size_t count_events(const Transcript& t, const std::string& kind) {
  std::size_t c = 0;
  for (const auto& e : t.events)
    if (e.kind == kind) ++c;
  return c;
}

// Hook that flips one ciphertext bit of the signature while it travels inside
// the signed-message envelope.
ChannelHooks flip_signature_bit(std::size_t position) {
  ChannelHooks hooks;
  hooks.on_deliver = [position](Envelope& e, const RunSecrets&) {
    if (auto* sm = std::get_if<SignedMessagePayload>(&e.payload)) sm->signature.bits.at(position) ^= 1u;
  };
  return hooks;
}

}  // namespace

TEST_CASE("pad budget closed forms match hand-computed values") {
  // n = 1
  CHECK(signature_bit_length(1) == 291);
  CHECK(bound_signature_bit_length(1) == 355);
  CHECK(framed_blob_bit_length(signature_bit_length(1)) == 451);
  CHECK(receipt_bit_length(1, VerifyMode::PaperOrder) == 772);
  CHECK(receipt_bit_length(1, VerifyMode::Deferred) == 771);
  CHECK(arb_packet_bit_length(1, VerifyMode::PaperOrder, Variant::Base) == 552);
  CHECK(arb_packet_bit_length(1, VerifyMode::Deferred, Variant::Base) == 551);
  CHECK(arb_packet_bit_length(1, VerifyMode::PaperOrder, Variant::Undeniable) == 616);
  CHECK(arb_packet_bit_length(1, VerifyMode::Deferred, Variant::Undeniable) == 615);
  CHECK(required_alice_key_bits(1, Variant::Base) == 291);
  CHECK(required_alice_key_bits(1, Variant::Undeniable) == 646);
  CHECK(required_bob_key_bits(1, VerifyMode::PaperOrder, Variant::Base) == 1324);
  CHECK(required_bob_key_bits(1, VerifyMode::Deferred, Variant::Base) == 1322);
  CHECK(required_bob_key_bits(1, VerifyMode::PaperOrder, Variant::Undeniable) == 1388);
  CHECK(required_bob_key_bits(1, VerifyMode::Deferred, Variant::Undeniable) == 1386);

  // n = 8
  CHECK(required_alice_key_bits(8, Variant::Base) == 2104);
  CHECK(required_alice_key_bits(8, Variant::Undeniable) == 4272);
  CHECK(required_bob_key_bits(8, VerifyMode::Deferred, Variant::Base) == 6761);
  CHECK(required_bob_key_bits(8, VerifyMode::PaperOrder, Variant::Base) == 6777);
  CHECK(required_bob_key_bits(8, VerifyMode::Deferred, Variant::Undeniable) == 6825);
  CHECK(required_bob_key_bits(8, VerifyMode::PaperOrder, Variant::Undeniable) == 6841);
}

TEST_CASE("initial phase allocates triples and enforces the pad budget up front") {
  RandomSource rng(5);
  std::size_t need = required_bob_key_bits(3, VerifyMode::Deferred, Variant::Base);
  InitialSetup setup = initial_phase(3, need, rng);
  CHECK(setup.allocation.registers.size() == 3);
  CHECK(setup.alice_key.bits.size() == need);
  CHECK(setup.bob_key.bits.size() == need);
  CHECK(setup.alice_key.key_id != setup.bob_key.key_id);
  for (const GhzRegister& reg : setup.allocation.registers) {
    CHECK(reg.state.qubit_count() == 3);
    CHECK_FALSE(reg.composed);
    CHECK(fidelity(reg.state, ghz3()) == Approx(1.0).margin(1e-12));
  }

  RandomSource rng2(5);
  CHECK_THROWS_AS(initial_phase(3, need - 1, rng2), PadExhausted);
  CHECK_THROWS_AS(initial_phase(0, need, rng2), std::invalid_argument);
}

TEST_CASE("signing collapses each triple into the branch named by the outcome") {
  // For message |0>, the post-measurement pair (arbitrator, Bob) is |00> on a
  // Psi outcome and |11> on a Phi outcome.
  std::size_t n = 16;
  RandomSource rng(31);
  InitialSetup setup = initial_phase(n, required_bob_key_bits(n, VerifyMode::Deferred, Variant::Base), rng);
  Transcript t;
  MessageString message(n);  // all |0>
  SigningResult result = signing_phase(message, setup.alice_key, setup.allocation, rng, t);

  REQUIRE(result.outcomes.size() == n);
  bool saw_psi = false, saw_phi = false;
  for (std::size_t i = 0; i < n; ++i) {
    const GhzRegister& reg = setup.allocation.registers[i];
    CHECK(reg.state.qubit_count() == 2);
    CHECK(reg.alice == -1);
    CHECK(reg.arbitrator == 0);
    CHECK(reg.bob == 1);
    bool phi = result.outcomes[i] == BellOutcome::PhiPlus || result.outcomes[i] == BellOutcome::PhiMinus;
    (phi ? saw_phi : saw_psi) = true;
    CHECK(std::abs(reg.state[phi ? 3 : 0]) == Approx(1.0).margin(1e-12));
  }
  CHECK(saw_psi);
  CHECK(saw_phi);  // all four outcomes are equally likely; 16 draws see both

  CHECK(result.signature.length() == signature_bit_length(n));
  CHECK(result.signature.pad_key_id == setup.alice_key.key_id);
  CHECK(result.signature.pad_offset == 0);
  CHECK(setup.alice_key.cursor == signature_bit_length(n));
  CHECK(result.envelope.sender == PartyId::Alice);
  CHECK(result.envelope.receiver == PartyId::Bob);
  CHECK(std::holds_alternative<SignedMessagePayload>(result.envelope.payload));
  CHECK(count_events(t, "measurement") == 1);
}

TEST_CASE("honest runs are accepted in every mode and variant") {
  for (VerifyMode mode : {VerifyMode::Deferred, VerifyMode::PaperOrder}) {
    for (Variant variant : {Variant::Base, Variant::Undeniable}) {
      for (std::uint64_t seed : {1ull, 71ull, 20240817ull}) {
        ProtocolConfig config;
        config.n = 5;
        config.seed = seed;
        config.mode = mode;
        config.variant = variant;
        Transcript t = run_protocol(config);
        INFO("mode=" << to_string(mode) << " variant=" << to_string(variant) << " seed=" << seed);
        REQUIRE(t.outcome == RunOutcome::Accepted);
        REQUIRE(t.report.has_value());
        CHECK(t.report->gamma == 1);
        CHECK_FALSE(t.report->reject_reason.has_value());
        REQUIRE(t.report->per_qubit_fidelity.size() == 5);
        for (double f : t.report->per_qubit_fidelity) CHECK(f >= 1.0 - 1e-9);
        std::string text = t.serialize();
        CHECK(text.find("accepted=true gamma=1") != std::string::npos);
        CHECK(text.find("error=-") != std::string::npos);
      }
    }
  }
}

TEST_CASE("honest deferred-base transcript has the expected event skeleton") {
  ProtocolConfig config;
  config.n = 4;
  config.seed = 2024;
  Transcript t = run_protocol(config);
  REQUIRE(t.outcome == RunOutcome::Accepted);

  std::vector<std::string> kinds;
  for (const auto& e : t.events) kinds.push_back(e.kind);
  std::vector<std::string> expected{"config", "phase",    "phase",    "measurement", "envelope",
                                    "phase",  "envelope", "measurement", "envelope", "report"};
  CHECK(kinds == expected);
  for (std::size_t i = 0; i < t.events.size(); ++i) CHECK(t.events[i].seq == i);

  // Envelope order and addressing.
  std::vector<std::pair<std::string, std::string>> routes;
  for (const auto& e : t.events)
    if (e.kind == "envelope") routes.emplace_back(e.sender, e.receiver);
  REQUIRE(routes.size() == 3);
  CHECK(routes[0] == std::make_pair(std::string("Alice"), std::string("Bob")));
  CHECK(routes[1] == std::make_pair(std::string("Bob"), std::string("Arbitrator")));
  CHECK(routes[2] == std::make_pair(std::string("Arbitrator"), std::string("Bob")));

  // Paper order adds Bob's own measurement event.
  ProtocolConfig paper = config;
  paper.mode = VerifyMode::PaperOrder;
  Transcript tp = run_protocol(paper);
  REQUIRE(tp.outcome == RunOutcome::Accepted);
  CHECK(count_events(tp, "measurement") == 3);
  CHECK(count_events(t, "measurement") == 2);
}

TEST_CASE("paper-order mode reports exact consistency fidelities") {
  ProtocolConfig config;
  config.n = 6;
  config.seed = 909;
  config.mode = VerifyMode::PaperOrder;
  Transcript t = run_protocol(config);
  REQUIRE(t.outcome == RunOutcome::Accepted);
  for (double f : t.report->per_qubit_fidelity) CHECK(f == 1.0);
}

TEST_CASE("undeniable variant routes the receipt through Alice and binds it") {
  ProtocolConfig config;
  config.n = 3;
  config.seed = 512;
  config.mode = VerifyMode::Deferred;
  Transcript t = undeniable_variant(config);
  REQUIRE(t.outcome == RunOutcome::Accepted);
  CHECK(t.config.variant == Variant::Undeniable);

  std::vector<std::string> payloads;
  for (const auto& e : t.events)
    if (e.kind == "envelope") payloads.push_back(e.extra);
  REQUIRE(payloads.size() == 4);
  CHECK(payloads[0] == " payload=signed-message");
  CHECK(payloads[1] == " payload=receipt");
  CHECK(payloads[2] == " payload=forwarded-receipt");
  CHECK(payloads[3] == " payload=arb-packet");

  const TranscriptEvent* receipt_event = nullptr;
  for (const auto& e : t.events)
    if (e.extra == " payload=receipt") receipt_event = &e;
  REQUIRE(receipt_event != nullptr);
  CHECK(receipt_event->sender == "Bob");
  CHECK(receipt_event->receiver == "Alice");
}

TEST_CASE("ciphertexts on the wire are encrypted and decrypt to valid payloads") {
  ProtocolConfig config;
  config.n = 4;
  config.seed = 77;

  std::size_t checked = 0;
  ChannelHooks hooks;
  hooks.on_deliver = [&](Envelope& e, const RunSecrets& secrets) {
    if (auto* sm = std::get_if<SignedMessagePayload>(&e.payload)) {
      BitString plain = otp_decrypt(*secrets.alice_key, sm->signature);
      auto payload = decode_signature(plain);
      REQUIRE(payload);
      CHECK(payload->record.size() == 4);
      std::size_t differing = 0;
      for (std::size_t i = 0; i < plain.size(); ++i)
        if (plain[i] != sm->signature.bits[i]) ++differing;
      double frac = static_cast<double>(differing) / plain.size();
      CHECK(frac > 0.3);
      CHECK(frac < 0.7);
      ++checked;
    }
  };
  Transcript t = run_protocol(config, hooks);
  CHECK(t.outcome == RunOutcome::Accepted);
  CHECK(checked == 1);
}

TEST_CASE("flipping a signature header bit yields gamma = 0") {
  ProtocolConfig config;
  config.n = 3;
  config.seed = 41;
  config.message = repeated_message(3, kSixEight);
  Transcript t = run_protocol(config, flip_signature_bit(5));  // inside the count field
  REQUIRE(t.outcome == RunOutcome::Rejected);
  REQUIRE(t.report.has_value());
  CHECK(t.report->gamma == 0);
  CHECK(t.report->reject_reason == RejectReason::GammaZero);
}

TEST_CASE("flipping a record bit yields gamma = 0") {
  ProtocolConfig config;
  config.n = 3;
  config.seed = 42;
  config.message = repeated_message(3, kSixEight);
  // First record entry's basis-tag bit: the decode still succeeds, the
  // arbitrator's bit-exact comparison does not.
  Transcript t = run_protocol(config, flip_signature_bit(32 + 2 * 3));
  REQUIRE(t.outcome == RunOutcome::Rejected);
  CHECK(t.report->gamma == 0);
  CHECK(t.report->reject_reason == RejectReason::GammaZero);
}

TEST_CASE("flipping a pair-outcome bit leaves gamma = 1 but breaks the state check") {
  ProtocolConfig config;
  config.n = 3;
  config.seed = 43;
  config.message = repeated_message(3, kSixEight);
  config.mode = VerifyMode::Deferred;
  Transcript t = run_protocol(config, flip_signature_bit(32));  // first pair code
  REQUIRE(t.outcome == RunOutcome::Rejected);
  CHECK(t.report->gamma == 1);
  CHECK(t.report->reject_reason == RejectReason::StateMismatch);
  // The flip swaps a Psi for a Phi claim at qubit 0, so the repair applies a
  // spurious bit flip whose survival on (0.6, 0.8) is exactly 0.9216.
  REQUIRE(t.report->per_qubit_fidelity.size() == 3);
  CHECK(t.report->per_qubit_fidelity[0] == Approx(0.9216).margin(1e-9));
  CHECK(t.report->per_qubit_fidelity[1] == Approx(1.0).margin(1e-9));

  // Paper order has no live state left to contradict the same flip: the
  // outcome-consistency check cannot see it and the run is accepted. The
  // record check still guards the message itself.
  ProtocolConfig paper = config;
  paper.mode = VerifyMode::PaperOrder;
  Transcript tp = run_protocol(paper, flip_signature_bit(32));
  CHECK(tp.outcome == RunOutcome::Accepted);
}

TEST_CASE("receipt tampering is rejected as a decrypt error") {
  ProtocolConfig config;
  config.n = 2;
  config.seed = 44;
  ChannelHooks hooks;
  hooks.on_deliver = [](Envelope& e, const RunSecrets&) {
    if (auto* r = std::get_if<ReceiptPayload>(&e.payload)) r->blob.bits.at(0) ^= 1u;  // count field
  };
  Transcript t = run_protocol(config, hooks);
  REQUIRE(t.outcome == RunOutcome::Rejected);
  CHECK(t.report->reject_reason == RejectReason::DecryptError);
}

TEST_CASE("flipping the verdict bit of the arbitrator packet is seen as gamma = 0") {
  std::size_t n = 2;
  ProtocolConfig config;
  config.n = n;
  config.seed = 45;
  config.mode = VerifyMode::Deferred;
  ChannelHooks hooks;
  std::size_t gamma_bit = bell_outcomes_bit_length(n) + x_outcomes_bit_length(0) + x_outcomes_bit_length(n);
  hooks.on_deliver = [gamma_bit](Envelope& e, const RunSecrets&) {
    if (auto* a = std::get_if<ArbPacketPayload>(&e.payload)) a->blob.bits.at(gamma_bit) ^= 1u;
  };
  Transcript t = run_protocol(config, hooks);
  REQUIRE(t.outcome == RunOutcome::Rejected);
  CHECK(t.report->gamma == 0);
  CHECK(t.report->reject_reason == RejectReason::GammaZero);
}

TEST_CASE("the bound signature pins the exact receipt ciphertext Alice saw") {
  std::size_t n = 2;
  ProtocolConfig config;
  config.n = n;
  config.seed = 46;
  config.mode = VerifyMode::Deferred;
  config.variant = Variant::Undeniable;

  // An embedded-signature bit inside the receipt plaintext: its flip keeps the
  // receipt decodable and leaves the reported message untouched, so only the
  // digest binding can notice.
  std::size_t inner_bit = x_outcomes_bit_length(0) + 160 + 3;

  SECTION("tamper after Alice: digest mismatch, gamma = 0") {
    ChannelHooks hooks;
    hooks.on_deliver = [inner_bit](Envelope& e, const RunSecrets&) {
      if (auto* f = std::get_if<ForwardedReceiptPayload>(&e.payload)) f->receipt.bits.at(inner_bit) ^= 1u;
    };
    Transcript t = run_protocol(config, hooks);
    REQUIRE(t.outcome == RunOutcome::Rejected);
    CHECK(t.report->gamma == 0);
    CHECK(t.report->reject_reason == RejectReason::GammaZero);
  }
  SECTION("tamper before Alice: absorbed into her attestation") {
    // The flipped field is the receipt's embedded signature copy, which the
    // variant flow never consults; Alice attests to the tampered bytes and
    // every check downstream still holds.
    ChannelHooks hooks;
    hooks.on_deliver = [inner_bit](Envelope& e, const RunSecrets&) {
      if (auto* r = std::get_if<ReceiptPayload>(&e.payload)) r->blob.bits.at(inner_bit) ^= 1u;
    };
    Transcript t = run_protocol(config, hooks);
    CHECK(t.outcome == RunOutcome::Accepted);
  }
  SECTION("the same embedded-signature flip is fatal in the base flow") {
    ProtocolConfig base = config;
    base.variant = Variant::Base;
    ChannelHooks hooks;
    hooks.on_deliver = [inner_bit](Envelope& e, const RunSecrets&) {
      if (auto* r = std::get_if<ReceiptPayload>(&e.payload)) r->blob.bits.at(inner_bit) ^= 1u;
    };
    Transcript t = run_protocol(base, hooks);
    REQUIRE(t.outcome == RunOutcome::Rejected);
    CHECK(t.report->gamma == 0);
  }
}

TEST_CASE("transcripts are deterministic in the config and differ across seeds") {
  ProtocolConfig config;
  config.n = 4;
  config.seed = 10101;
  config.mode = VerifyMode::PaperOrder;
  config.variant = Variant::Undeniable;
  Transcript a = run_protocol(config);
  Transcript b = run_protocol(config);
  CHECK(a.serialize() == b.serialize());
  CHECK(a.outcome == b.outcome);

  ProtocolConfig other = config;
  other.seed = 10102;
  CHECK(run_protocol(other).serialize() != a.serialize());

  ProtocolConfig deferred = config;
  deferred.mode = VerifyMode::Deferred;
  CHECK(run_protocol(deferred).serialize() != a.serialize());
}

TEST_CASE("a key too short for the run fails before any envelope is sent") {
  ProtocolConfig config;
  config.n = 2;
  config.seed = 3;
  config.key_length = 100;
  Transcript t = run_protocol(config);
  CHECK(t.outcome == RunOutcome::Error);
  CHECK(t.error_code == "pad-exhausted");
  CHECK(count_events(t, "envelope") == 0);
  CHECK(count_events(t, "measurement") == 0);
  CHECK(t.serialize().find("error=pad-exhausted") != std::string::npos);
  CHECK_FALSE(t.report.has_value());
}

TEST_CASE("invalid configurations produce the bad-config error") {
  ProtocolConfig zero;
  zero.n = 0;
  Transcript t = run_protocol(zero);
  CHECK(t.outcome == RunOutcome::Error);
  CHECK(t.error_code == "bad-config");

  ProtocolConfig mismatch;
  mismatch.n = 3;
  mismatch.message = repeated_message(2, kSixEight);
  Transcript t2 = run_protocol(mismatch);
  CHECK(t2.outcome == RunOutcome::Error);
  CHECK(t2.error_code == "bad-config");
  CHECK(t2.serialize().find("error=bad-config") != std::string::npos);
}

TEST_CASE("pad discipline: no segment is ever reused, budgets are exact") {
  for (VerifyMode mode : {VerifyMode::Deferred, VerifyMode::PaperOrder}) {
    for (Variant variant : {Variant::Base, Variant::Undeniable}) {
      ProtocolConfig config;
      config.n = 6;
      config.seed = 8080;
      config.mode = mode;
      config.variant = variant;
      Transcript t = run_protocol(config);
      REQUIRE(t.outcome == RunOutcome::Accepted);

      PadAudit audit;
      std::map<std::uint64_t, std::size_t> consumed;
      for (const PadSegment& seg : t.pad_segments) {
        CHECK(audit.add(seg.key_id, seg.offset, seg.length));
        consumed[seg.key_id] += seg.length;
      }
      CHECK(audit.overlap_count() == 0);
      REQUIRE(consumed.size() == 2);

      std::vector<std::size_t> totals;
      for (const auto& [id, total] : consumed) totals.push_back(total);
      std::sort(totals.begin(), totals.end());
      std::size_t alice_total = required_alice_key_bits(config.n, variant);
      std::size_t bob_total = required_bob_key_bits(config.n, mode, variant);
      CHECK(totals[0] == std::min(alice_total, bob_total));
      CHECK(totals[1] == std::max(alice_total, bob_total));
    }
  }
}

TEST_CASE("explicit messages override the random draw and round through verification") {
  ProtocolConfig config;
  config.n = 2;
  config.seed = 606;
  config.message = MessageString{kSixEight, QubitSpec{Amplitude{0.0, 1.0}, Amplitude{0.0, 0.0}}};
  for (VerifyMode mode : {VerifyMode::Deferred, VerifyMode::PaperOrder}) {
    config.mode = mode;
    Transcript t = run_protocol(config);
    REQUIRE(t.outcome == RunOutcome::Accepted);
    CHECK(t.serialize().find("message=explicit") != std::string::npos);
  }
}
