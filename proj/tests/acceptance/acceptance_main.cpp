// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero on any failure.
#include "sgdk/verify.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria 1-10"};
  sgdk::acceptance::VerifyOptions opt;
  std::vector<int> only;
  app.add_option("--only", only, "criterion ids to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--qc-seed", opt.qc_model_seed, "QC model generator seed");
  app.add_option("--st-seed", opt.st_model_seed, "ST model generator seed");
  app.add_option("--master-seed", opt.master_seed, "master seed for the runs");
  CLI11_PARSE(app, argc, argv);
  opt.only.insert(only.begin(), only.end());
  const auto results = sgdk::acceptance::run_acceptance(opt, std::cout);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  return sgdk::acceptance::all_passed(results) ? 0 : 1;
}
