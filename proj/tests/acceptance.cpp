// Prints one PASS/FAIL line per mission acceptance criterion; non-zero exit on
// any failure.
#include <iostream>

#include "shipems/selftest.hpp"

int main() {
  int failed = 0;
  for (const auto& r : shipems::selftest::run_acceptance()) {
    std::cout << shipems::selftest::format(r) << '\n';
    failed += r.passed ? 0 : 1;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << failed << " failing\n";
  return failed ? 1 : 0;
}
