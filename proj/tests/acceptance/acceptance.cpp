// Runs every acceptance criterion at its stated tolerance and prints one
// line per criterion. Exit status is nonzero when any criterion fails.

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "ellpos/checks.hpp"

int main(int argc, char** argv) {
  ellpos::CheckOptions opts;
  opts.workers = 8;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::strcmp(argv[i], "--workers") == 0) opts.workers = std::atoi(argv[i + 1]);
    else if (std::strcmp(argv[i], "--seed") == 0) opts.seed = std::strtoull(argv[i + 1], nullptr, 10);
  }
  const auto report = ellpos::run_all_checks(opts, [](const ellpos::CriterionResult& r) {
    std::printf("%s %s  %s\n", r.id.c_str(), r.passed ? "PASS" : "FAIL", r.summary.c_str());
    std::fflush(stdout);
  });
  return report.passed() ? 0 : 1;
}
