#ifndef FEEC_SUITE_HPP
#define FEEC_SUITE_HPP

#include <string>

#include "feec/meshgen.hpp"
#include "feec/projection.hpp"

namespace feec {

struct SuiteConfig {
  int n = 2;
  int m = 2;
  std::string mesh_file; // overrides the structured mesh when set
  int levels = 1;        // nested refinements (structured meshes only)
  int r_min = 1, r_max = 2;
  int k_min = 0, k_max = -1; // -1 = up to n
  unsigned seed = 1234;
  std::string out_dir;
  std::string format = "json"; // json | csv
  bool rational = true;
  std::string corrupt; // "", "orientation", "bubble", "meanzero"
};

struct CheckResult {
  std::string op; // suite stage
  int r = -1, k = -1, level = 0;
  std::string id;
  double max_err = 0.0;
  double tol = 0.0;  // negative tolerance marks a reported constant
  bool pass = true;
};

struct SuiteReport {
  SuiteConfig config;
  std::vector<CheckResult> checks;
  std::map<std::string, double> constants;

  bool pass() const {
    for (const auto& c : checks) {
      if (c.tol >= 0 && !c.pass) return false;
    }
    return true;
  }
  std::string to_json() const;
  std::string to_csv() const;
};

/// Runs the verification stages in order: complex sanity, dimension
/// identities, exact sequences, whitney properties, weight family, extension
/// and patch operators, projections, scaling diagnostics. Returns the
/// accumulated report; exit status of the CLI is derived from pass().
SuiteReport run_suite(const SuiteConfig& config);

/// Writes report files into config.out_dir (when set) and returns the paths.
std::vector<std::string> write_report(const SuiteReport& report);

} // namespace feec

#endif
