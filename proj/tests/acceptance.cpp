// One PASS/FAIL line per acceptance criterion. Checks that fail are listed
// under their criterion. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <string>

#include "chaincalc/verify.hpp"

using namespace chaincalc;

int main(int argc, char** argv) {
  SuiteOptions opt;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::strcmp(argv[i], "--seed") == 0) opt.seed = std::strtoull(argv[i + 1], nullptr, 10);

  std::cout << "seed " << opt.seed << "\n";
  int failed = 0;
  for (const Suite& s : suites()) {
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult r;
    try {
      r = s.run(opt);
    } catch (const std::exception& e) {
      r = SuiteResult{s.name, s.title};
      r.add({"exception", 0, 0, false, e.what()});
    }
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !r.pass;
    std::cout << "criterion " << std::setw(2) << s.criterion << " " << std::left << std::setw(12) << s.name
              << std::right << (r.pass ? "PASS" : "FAIL") << "  " << r.title << " (" << r.checks.size()
              << " checks, " << std::fixed << std::setprecision(1) << sec << " s)\n";
    std::cout.unsetf(std::ios::floatfield);
    for (const CheckLine& c : r.checks) {
      if (c.pass) continue;
      std::cout << "    failed " << c.name << ": " << std::setprecision(6) << c.value << " (limit " << c.limit
                << ")";
      if (!c.note.empty()) std::cout << "  " << c.note;
      std::cout << "\n";
    }
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failed ? 1 : 0;
}
