// Benchmark driver.  Exit codes: 0 all oracle checks passed, 2 usage
// error, 3 correctness failure (oracle mismatch or counter drift).

#include <exception>
#include <iostream>

#include "sac/bench/options.hpp"
#include "sac/bench/report.hpp"
#include "sac/bench/runner.hpp"

int main(int argc, char** argv) {
  sac::bench::Options opt;
  if (auto rc = sac::bench::parse_args(argc, argv, opt)) return *rc;

  std::vector<sac::bench::Row> rows;
  try {
    rows = sac::bench::run_all(opt);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }

  sac::bench::emit(rows, opt.format, std::cout);
  return 0;
}
