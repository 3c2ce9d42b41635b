// SPDX-License-Identifier: Apache-2.0
#include "empgan/params.hpp"

#include <cmath>

#include "empgan/error.hpp"

namespace empgan {

std::size_t ParamSet::add(std::string name, Tensor init) {
  if (lookup_.count(name)) EMPGAN_THROW(ContractError, "duplicate parameter name '" << name << "'");
  lookup_[name] = values_.size();
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return values_.size() - 1;
}

std::size_t ParamSet::add_uniform(std::string name, Shape shape, double range, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-range, range);
  for (double& v : t.storage()) v = u(rng);
  return add(std::move(name), std::move(t));
}

std::size_t ParamSet::index(const std::string& name) const {
  auto it = lookup_.find(name);
  if (it == lookup_.end()) EMPGAN_THROW(ContractError, "unknown parameter '" << name << "'");
  return it->second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

bool ParamSet::identical(const ParamSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!values_[i].identical(other.values_[i])) return false;
  return true;
}

Binding::Binding(Tape& tape, const ParamSet& params, bool trainable)
    : tape_(&tape), params_(&params), trainable_(trainable), bound_(params.size()) {}

Binding::Binding(Tape& tape, const ParamSet& params, std::vector<Var> vars)
    : tape_(&tape), params_(&params), trainable_(true), bound_(std::move(vars)) {
  if (bound_.size() != params.size())
    EMPGAN_THROW(ContractError, "Binding: " << bound_.size() << " vars for " << params.size() << " parameters");
}

Var Binding::operator()(std::size_t idx) {
  Var& v = bound_.at(idx);
  if (!v.valid()) v = trainable_ ? tape_->leaf((*params_)[idx]) : tape_->constant((*params_)[idx]);
  return v;
}

std::vector<Tensor> Binding::gradients(const GradientMap& grads) const {
  std::vector<Tensor> out;
  out.reserve(bound_.size());
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    const Tensor* g = bound_[i].valid() ? grads.find(bound_[i].id()) : nullptr;
    out.push_back(g ? *g : Tensor((*params_)[i].shape()));
  }
  return out;
}

double global_norm(const std::vector<Tensor>& grads) {
  double ss = 0.0;
  for (const auto& g : grads)
    for (double v : g.storage()) ss += v * v;
  return std::sqrt(ss);
}

void clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double n = global_norm(grads);
  if (!(n > max_norm) || max_norm <= 0.0) return;
  double s = max_norm / n;
  for (auto& g : grads)
    for (double& v : g.storage()) v *= s;
}

}  // namespace empgan
