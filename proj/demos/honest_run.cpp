// Demo: one honest signing + verification run in each mode, transcripts and
// verdicts printed to stdout.

#include <cstdio>
#include <iostream>

#include "aqs/aqs.hpp"

int main() {
  for (aqs::VerifyMode mode : {aqs::VerifyMode::Deferred, aqs::VerifyMode::PaperOrder}) {
    aqs::ProtocolConfig config;
    config.n = 4;
    config.seed = 2024;
    config.mode = mode;
    aqs::Transcript t = aqs::run_protocol(config);
    std::cout << "=== honest run, mode " << aqs::to_string(mode) << " ===\n";
    std::cout << t.serialize();
    if (t.report) {
      double mn = 1.0;
      for (double f : t.report->per_qubit_fidelity) mn = std::min(mn, f);
      std::printf("verdict: %s  gamma=%d  min fidelity=%.12f\n\n", aqs::to_string(t.outcome), t.report->gamma, mn);
    }
  }
  return 0;
}
