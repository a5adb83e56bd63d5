#pragma once

// Command-line front end for the simulator. Split out of main() so the test
// suite can drive parsing and the subcommands in-process.
//
//   aqs_sim run      one protocol run, transcript to stdout or --out
//   aqs_sim attack   a seeded attack campaign, detection stats row
//   aqs_sim selftest internal physics checks, silent exit 0 on success
//
// Exit codes: 0 accepted / campaign complete / selftest clean, 1 rejected or
// selftest failure, 2 configuration, parse, or pad-budget errors.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aqs/aqs.hpp"

namespace aqs::cli {

struct RunOptions {
  std::size_t n = 8;
  std::uint64_t seed = 0;
  std::string mode = "deferred";
  std::string variant = "base";
  std::string message = "haar";  // "haar" or a path to an amplitude file
  std::string out;               // empty: stdout
  std::string format = "text-lines";
};

struct AttackOptions {
  std::string attack;
  std::size_t trials = 100;
  std::size_t n = 8;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "text-lines";
};

// Serializes options back into argv form; the tests round-trip this through
// the parser to pin flag spellings.
inline std::vector<std::string> to_args(const RunOptions& o) {
  return {"run",           "--n",    std::to_string(o.n), "--seed",    std::to_string(o.seed),
          "--mode",        o.mode,   "--variant",         o.variant,   "--message",
          o.message,       "--format", o.format};
}

inline std::optional<VerifyMode> parse_mode(const std::string& s) {
  if (s == "deferred") return VerifyMode::Deferred;
  if (s == "paper-order") return VerifyMode::PaperOrder;
  return std::nullopt;
}

inline std::optional<Variant> parse_variant(const std::string& s) {
  if (s == "base") return Variant::Base;
  if (s == "undeniable") return Variant::Undeniable;
  return std::nullopt;
}

// Message file: one qubit per line, four decimal reals (re alpha, im alpha,
// re beta, im beta), whitespace separated; blank lines ignored. Throws
// std::runtime_error with a line-numbered message on any problem.
inline MessageString load_message_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open message file: " + path);
  MessageString message;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    double re_a, im_a, re_b, im_b;
    if (!(fields >> re_a)) continue;  // blank line
    if (!(fields >> im_a >> re_b >> im_b))
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected four reals per qubit");
    std::string extra;
    if (fields >> extra)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": trailing fields after amplitudes");
    try {
      message.emplace_back(Amplitude{re_a, im_a}, Amplitude{re_b, im_b});
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (message.empty()) throw std::runtime_error(path + ": no qubits found");
  return message;
}

inline int write_output(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return 0;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write output file: " << out_path << "\n";
    return 2;
  }
  out << text;
  return out.good() ? 0 : 2;
}

inline std::string render_run_table(const Transcript& t) {
  std::ostringstream os;
  auto row = [&os](const std::string& k, const std::string& v) {
    os << k;
    for (std::size_t i = k.size(); i < 16; ++i) os << ' ';
    os << v << "\n";
  };
  row("field", "value");
  row("outcome", to_string(t.outcome));
  row("n", std::to_string(t.config.n));
  row("seed", std::to_string(t.config.seed));
  row("mode", to_string(t.config.mode));
  row("variant", to_string(t.config.variant));
  if (t.report) {
    row("accepted", t.report->accepted ? "true" : "false");
    row("gamma", std::to_string(t.report->gamma));
    if (!t.report->per_qubit_fidelity.empty()) {
      double mn = t.report->per_qubit_fidelity.front();
      for (double f : t.report->per_qubit_fidelity) mn = std::min(mn, f);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.9f", mn);
      row("min_fidelity", buf);
    }
    row("reject_reason", t.report->reject_reason ? to_string(*t.report->reject_reason) : "-");
  }
  if (!t.error_code.empty()) row("error", t.error_code);
  row("events", std::to_string(t.events.size()));
  return os.str();
}

inline int cmd_run(const RunOptions& opts, bool n_was_set) {
  auto mode = parse_mode(opts.mode);
  auto variant = parse_variant(opts.variant);
  if (!mode || !variant) {
    std::cerr << "error: --mode must be deferred|paper-order, --variant base|undeniable\n";
    return 2;
  }
  ProtocolConfig config;
  config.seed = opts.seed;
  config.mode = *mode;
  config.variant = *variant;
  config.n = opts.n;
  if (opts.message != "haar") {
    MessageString m;
    try {
      m = load_message_file(opts.message);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    if (n_was_set && m.size() != opts.n) {
      std::cerr << "error: --n " << opts.n << " does not match message file with " << m.size() << " qubits\n";
      return 2;
    }
    config.n = m.size();
    config.message = std::move(m);
  }
  if (config.n == 0) {
    std::cerr << "error: --n must be at least 1\n";
    return 2;
  }

  Transcript t = run_protocol(config);
  std::string text = opts.format == "table" ? render_run_table(t) : t.serialize();
  int io = write_output(opts.out, text);
  if (io != 0) return io;
  switch (t.outcome) {
    case RunOutcome::Accepted: return 0;
    case RunOutcome::Rejected: return 1;
    case RunOutcome::Error: return 2;
  }
  return 2;
}

inline std::string render_attack_row(const DetectionStats& s) {
  char rate[32];
  std::snprintf(rate, sizeof(rate), "%.4f", s.rate);
  std::ostringstream os;
  os << "attack=" << to_string(s.attack) << " n=" << s.n << " trials=" << s.trials << " detected=" << s.detected
     << " rate=" << rate << " seed=" << s.seed << "\n";
  return os.str();
}

inline std::string render_attack_table(const DetectionStats& s) {
  char rate[32];
  std::snprintf(rate, sizeof(rate), "%.4f", s.rate);
  std::ostringstream os;
  os << "attack                       n     trials  detected  rate    seed\n";
  os << to_string(s.attack);
  for (std::size_t i = std::string(to_string(s.attack)).size(); i < 29; ++i) os << ' ';
  os << s.n << "     " << s.trials << "     " << s.detected << "     " << rate << "  " << s.seed << "\n";
  return os.str();
}

inline int cmd_attack(const AttackOptions& opts) {
  std::optional<AttackKind> kind = parse_attack_kind(opts.attack);
  if (!kind) {
    std::cerr << "error: unknown attack '" << opts.attack << "'; valid names:";
    for (AttackKind a : kAllAttackKinds) std::cerr << " " << to_string(a);
    std::cerr << "\n";
    return 2;
  }
  if (opts.n == 0 || opts.trials == 0) {
    std::cerr << "error: --n and --trials must be at least 1\n";
    return 2;
  }
  DetectionStats stats = run_attack(*kind, opts.trials, opts.n, opts.seed);
  std::string text = opts.format == "table" ? render_attack_table(stats) : render_attack_row(stats);
  return write_output(opts.out, text);
}

inline int cmd_selftest() {
  bool all_ok = true;
  RandomSource rng(20260822);

  // 1. Teleportation repair table, every (pair outcome, x outcome) branch.
  {
    std::vector<QubitSpec> specs;
    for (int i = 0; i < 20; ++i) specs.push_back(haar_random_qubit(rng));
    auto failure = find_correction_failure(pauli_correction, specs, 1.0 - 1e-9);
    if (failure) {
      all_ok = false;
      std::cout << "[selftest] correction-table FAIL at (" << to_string(failure->first) << ", "
                << to_string(failure->second) << ")\n";
    } else {
      std::cout << "[selftest] correction-table ok (20 states x 8 branches)\n";
    }
  }

  // 2. Analytic share marginals against brute-force partial trace.
  {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      QubitSpec q = haar_random_qubit(rng);
      PureState full = compose(q, ghz3());
      for (BellOutcome bell : kAllBellOutcomes) {
        ProjectionResult pr = project_pair(full, 0, 1, bell_state(bell));
        if (!pr.residual) continue;
        worst = std::max(worst, bob_marginal(bell, q).max_abs_diff(reduced_density(*pr.residual, 1)));
      }
    }
    if (worst > 1e-12) {
      all_ok = false;
      std::cout << "[selftest] share-marginals FAIL (max deviation " << worst << ")\n";
    } else {
      std::cout << "[selftest] share-marginals ok (50 states, deviation <= 1e-12)\n";
    }
  }

  // 3. Sampled measurement chain against the exact distribution.
  {
    double worst = 0.0;
    for (int s = 0; s < 3; ++s) {
      QubitSpec q = haar_random_qubit(rng);
      JointDistribution oracle = enumerate_joint_distribution(q);
      JointDistribution empirical;
      const int samples = 20000;
      for (int i = 0; i < samples; ++i) {
        MeasurementChainSample c = sample_measurement_chain(q, rng);
        empirical.at(c.bell, c.bob, c.arb) += 1.0 / samples;
      }
      worst = std::max(worst, oracle.total_variation(empirical));
    }
    if (worst > 0.02) {
      all_ok = false;
      std::cout << "[selftest] chain-sampler FAIL (total variation " << worst << ")\n";
    } else {
      std::cout << "[selftest] chain-sampler ok (3 states x 20000 chains)\n";
    }
  }

  std::cout << (all_ok ? "[selftest] all checks passed\n" : "[selftest] FAILURES present\n");
  return all_ok ? 0 : 1;
}

inline int run_main(int argc, const char* const* argv) {
  CLI::App app{"arbitrated quantum signature protocol simulator"};
  app.require_subcommand(1);

  RunOptions run_opts;
  CLI::App* run = app.add_subcommand("run", "execute one protocol run and print its transcript");
  auto* n_opt = run->add_option("--n", run_opts.n, "number of message qubits");
  run->add_option("--seed", run_opts.seed, "run seed");
  run->add_option("--mode", run_opts.mode, "verification mode: deferred|paper-order");
  run->add_option("--variant", run_opts.variant, "protocol variant: base|undeniable");
  run->add_option("--message", run_opts.message, "'haar' or path to an amplitude file");
  run->add_option("--out", run_opts.out, "write output to this file instead of stdout");
  run->add_option("--format", run_opts.format, "output format: text-lines|table")
      ->check(CLI::IsMember({"text-lines", "table"}));

  AttackOptions attack_opts;
  CLI::App* attack = app.add_subcommand("attack", "run a seeded attack campaign");
  attack->add_option("--attack", attack_opts.attack, "attack name")->required();
  attack->add_option("--trials", attack_opts.trials, "number of trials");
  attack->add_option("--n", attack_opts.n, "number of message qubits per trial");
  attack->add_option("--seed", attack_opts.seed, "campaign seed");
  attack->add_option("--out", attack_opts.out, "write output to this file instead of stdout");
  attack->add_option("--format", attack_opts.format, "output format: text-lines|table")
      ->check(CLI::IsMember({"text-lines", "table"}));

  CLI::App* selftest = app.add_subcommand("selftest", "run internal physics checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message and usage hint
    return 2;
  }

  if (run->parsed()) return cmd_run(run_opts, n_opt->count() > 0);
  if (attack->parsed()) return cmd_attack(attack_opts);
  if (selftest->parsed()) return cmd_selftest();
  return 2;
}

}  // namespace aqs::cli
