// Demo: every supported attack campaign at modest size, one stats row each.

#include <cstdio>

#include "aqs/aqs.hpp"

int main() {
  std::printf("%-28s %4s %7s %9s %7s\n", "attack", "n", "trials", "detected", "rate");
  for (aqs::AttackKind kind : aqs::kAllAttackKinds) {
    aqs::DetectionStats s = aqs::run_attack(kind, 60, 6, 99);
    std::printf("%-28s %4zu %7zu %9zu %7.4f\n", aqs::to_string(kind), s.n, s.trials, s.detected, s.rate);
  }
  return 0;
}
