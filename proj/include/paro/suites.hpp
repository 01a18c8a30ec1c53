#pragma once

#include <string>
#include <vector>

namespace paro {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string measured;
};

struct SuiteResult {
  std::string name;
  std::vector<CheckResult> checks;

  bool pass() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return !checks.empty();
  }
};

// One runner per acceptance criterion. The CLI exposes the first five under
// `--suite`; the acceptance binary runs all of them.
SuiteResult run_analytic_suite(int workers);        // analytic spectra
SuiteResult run_coulomb_suite(int workers);         // hydrogen, adaptive vs uniform
SuiteResult run_oracle_suite(int workers);          // fixed-mesh baseline equivalence
SuiteResult run_ks_oracle_suite(int workers);       // SCF oracle equivalence
SuiteResult run_theorem_suite(int workers);         // one-iteration error propagation
SuiteResult run_marking_suite();                    // marking strategy properties
SuiteResult run_scaling_suite(int workers);         // step cost scaling
SuiteResult run_determinism_suite(const std::string& scratch_dir);

/// CLI dispatcher for the named suites (analytic, oracle, marking,
/// theorem-a1, scaling); unknown names raise InvalidArgumentError.
SuiteResult run_named_suite(const std::string& name, int workers);

}  // namespace paro
