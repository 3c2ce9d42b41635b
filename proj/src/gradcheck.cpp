// SPDX-License-Identifier: Apache-2.0
#include "empgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace empgan {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-6, std::abs(analytic) + std::abs(numeric));
}

namespace {

double evaluate(const TensorProgram& fn, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.constant(p));
  Var out = fn(tape, vars);
  if (!out.value().is_scalar()) EMPGAN_THROW(ContractError, "grad_check: program output " << shape_str(out.shape()) << " is not scalar");
  return out.value().item();
}

}  // namespace

GradCheckReport grad_check(const TensorProgram& fn, std::vector<Tensor> params, const std::vector<std::string>& names,
                           const GradCheckOptions& opts) {
  if (names.size() != params.size()) throw ContractError("grad_check: one name per parameter required");
  double base1 = evaluate(fn, params);
  double base2 = evaluate(fn, params);
  if (std::memcmp(&base1, &base2, sizeof(double)) != 0)
    EMPGAN_THROW(ContractError, "grad_check: program is not deterministic (" << base1 << " vs " << base2 << ")");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.leaf(p));
    Var out = fn(tape, vars);
    GradientMap g = tape.backward(out);
    for (const auto& v : vars) analytic.push_back(g.get(v));
  }

  GradCheckReport report;
  report.tol = opts.tol;
  for (std::size_t p = 0; p < params.size(); ++p) {
    ParamCheck pc{names[p], params[p].size(), 0.0, 0};
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      double orig = params[p][i];
      params[p][i] = orig + opts.eps;
      double fp = evaluate(fn, params);
      params[p][i] = orig - opts.eps;
      double fm = evaluate(fn, params);
      params[p][i] = orig;
      double numeric = (fp - fm) / (2.0 * opts.eps);
      double err = relative_error(analytic[p][i] + opts.inject_fault, numeric);
      if (err > pc.max_rel_err) pc.max_rel_err = err, pc.worst_index = i;
    }
    report.max_rel_err = std::max(report.max_rel_err, pc.max_rel_err);
    report.params.push_back(std::move(pc));
  }
  report.passed = report.max_rel_err < opts.tol;
  return report;
}

}  // namespace empgan
