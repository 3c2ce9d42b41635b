// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "empgan/tensor.hpp"

namespace empgan {

/// Named, ordered collection of trainable tensors.
class ParamSet {
 public:
  std::size_t add(std::string name, Tensor init);
  /// uniform(-range, range) initialisation drawn from `rng`.
  std::size_t add_uniform(std::string name, Shape shape, double range, std::mt19937_64& rng);

  std::size_t size() const { return values_.size(); }
  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return lookup_.count(name) != 0; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const { return names_; }

  Tensor& operator[](std::size_t i) { return values_[i]; }
  const Tensor& operator[](std::size_t i) const { return values_[i]; }
  Tensor& operator[](const std::string& name) { return values_[index(name)]; }
  const Tensor& operator[](const std::string& name) const { return values_[index(name)]; }

  std::vector<Tensor>& values() { return values_; }
  const std::vector<Tensor>& values() const { return values_; }

  std::size_t scalar_count() const;
  bool identical(const ParamSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, std::size_t> lookup_;
};

/// Lazily places parameters of one ParamSet onto a tape. Trainable bindings
/// create leaves (so backward reports their gradients); frozen bindings
/// create constants.
class Binding {
 public:
  Binding(Tape& tape, const ParamSet& params, bool trainable = true);
  /// Uses `vars` (already on `tape`, aligned with `params`) instead of
  /// placing values itself.
  Binding(Tape& tape, const ParamSet& params, std::vector<Var> vars);

  Var operator()(std::size_t idx);
  Tape& tape() const { return *tape_; }
  const ParamSet& params() const { return *params_; }
  bool trainable() const { return trainable_; }

  /// Gradient per parameter, aligned with the ParamSet. Parameters the loss
  /// never touched get zeros.
  std::vector<Tensor> gradients(const GradientMap& grads) const;

 private:
  Tape* tape_;
  const ParamSet* params_;
  bool trainable_;
  std::vector<Var> bound_;
};

double global_norm(const std::vector<Tensor>& grads);
/// Rescales in place when the global L2 norm exceeds `max_norm`.
void clip_global_norm(std::vector<Tensor>& grads, double max_norm);

}  // namespace empgan
