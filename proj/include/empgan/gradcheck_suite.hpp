// SPDX-License-Identifier: Apache-2.0
//
// Registry of finite-difference checks: every tape operation, the recurrent
// cells and encoders, attention, each generator loss term, the full
// generator objective and the critic loss with its gradient penalty.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "empgan/gradcheck.hpp"

namespace empgan {

struct SuiteOptions {
  GradCheckOptions check{1e-5, 1e-3, 0.0};
  std::size_t hidden = 8;
  std::uint64_t seed = 7;
  std::string filter;  // run only checks whose name contains this
};

struct SuiteResult {
  std::string name;
  GradCheckReport report;
  double seconds = 0.0;
};

std::vector<std::string> gradcheck_names();
std::vector<SuiteResult> run_gradcheck_suite(const SuiteOptions& opts);
/// One line per parameter group: check, parameter, scalars, max rel-err, PASS/FAIL.
std::string format_gradcheck_report(const std::vector<SuiteResult>& results, double tol);

}  // namespace empgan
