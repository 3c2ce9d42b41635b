// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "empgan/tensor.hpp"

namespace empgan {

/// A deterministic scalar program of its parameters.
using TensorProgram = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  /// Added to every analytic gradient entry; used to confirm the checker
  /// actually catches a wrong gradient.
  double inject_fault = 0.0;
};

struct ParamCheck {
  std::string name;
  std::size_t scalars = 0;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool passed = false;
};

/// rel-err = |g_analytic - g_fd| / max(1e-6, |g_analytic| + |g_fd|) with a
/// central difference per scalar. Throws ContractError when two baseline
/// evaluations disagree.
GradCheckReport grad_check(const TensorProgram& fn, std::vector<Tensor> params, const std::vector<std::string>& names,
                           const GradCheckOptions& opts = {});

double relative_error(double analytic, double numeric);

}  // namespace empgan
