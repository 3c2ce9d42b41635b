// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit tensors and a reverse-mode tape. Every model in the library
// expresses its forward pass through the ops declared here; backward() then
// replays the tape in reverse and accumulates gradients into leaf nodes.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "empgan/error.hpp"

namespace empgan {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Row-major dense array of doubles. Rank 0 (shape {}) is a scalar.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return data_.size() == 1; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double item() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;
  double sum() const;
  double max_abs() const;

  /// Bitwise equality of shape and every value.
  bool identical(const Tensor& other) const;

  /// this += scale * other (shapes must agree).
  void axpy(double scale, const Tensor& other);

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

/// Handle to a node recorded on a tape. Cheap to copy.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Gradients of a scalar loss keyed by leaf node id.
class GradientMap {
 public:
  const Tensor* find(int leaf_id) const;
  /// Gradient for `v`, or zeros of v's shape when the loss never reached it.
  Tensor get(const Var& v) const;
  void set(int leaf_id, Tensor g) { grads_[leaf_id] = std::move(g); }
  std::size_t size() const { return grads_.size(); }

 private:
  std::map<int, Tensor> grads_;
};

/// Records executed operations. Single-threaded; a tape is never shared.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  Var record(Tensor value, std::vector<int> parents, BackwardFn backward);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  const std::vector<int>& parents(int id) const { return nodes_[id].parents; }

  /// Upstream gradient of node `id` during backward.
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  /// Accumulation buffer of node `id` (zero-initialized on first touch), or
  /// nullptr when the node does not require a gradient.
  Tensor* grad_buffer(int id);

  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Each node's backward runs once.
  GradientMap backward(const Var& loss);

  /// Training-mode flag consulted by dropout.
  bool training = false;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<int> parents;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };
  std::vector<Node> nodes_;
};

GradientMap backward(const Var& loss);

enum class Unary { Tanh, Sigmoid, Relu, Softplus };

// ---- elementwise -----------------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
/// 1 - a
Var one_minus(const Var& a);
Var apply_unary(const Var& x, Unary f);
inline Var tanh(const Var& x) { return apply_unary(x, Unary::Tanh); }
inline Var sigmoid(const Var& x) { return apply_unary(x, Unary::Sigmoid); }
inline Var relu(const Var& x) { return apply_unary(x, Unary::Relu); }
inline Var softplus(const Var& x) { return apply_unary(x, Unary::Softplus); }
/// Elementwise product with a constant mask.
Var mask(const Var& x, const Tensor& m);
Var square(const Var& x);

// ---- linear algebra --------------------------------------------------------
/// (m×k)·(k×n), (k)·(k×n) -> (n), (m×k)·(k) -> (m).
Var matmul(const Var& a, const Var& b);
/// x·W + b for vector or row-batched x.
Var affine(const Var& x, const Var& w, const Var& b);
/// Adds vector `v` to every row of matrix `m`.
Var add_rows(const Var& m, const Var& v);

// ---- reductions ------------------------------------------------------------
Var sum(const Var& x);
Var mean(const Var& x);
/// Euclidean norm of all entries; gradient defined as 0 at the origin.
Var norm2(const Var& x);

// ---- structure -------------------------------------------------------------
Var reshape(const Var& x, Shape shape);
/// Concatenate rank-1 tensors.
Var concat(const std::vector<Var>& parts);
/// Concatenate matrices with equal row counts along columns.
Var hconcat(const std::vector<Var>& parts);
/// Stack rank-1 tensors of equal length into rows.
Var stack(const std::vector<Var>& rows);
Var row(const Var& m, std::size_t r);
/// Gather rows of a table (embedding lookup); backward scatter-adds.
Var gather_rows(const Var& table, std::span<const int> ids);
Var slice(const Var& v, std::size_t begin, std::size_t len);
/// Append zero rows until the matrix has `rows` rows (no-op when already tall).
Var pad_rows(const Var& m, std::size_t rows);
Var slice_rows(const Var& m, std::size_t begin, std::size_t count);

// ---- probability -----------------------------------------------------------
Var softmax(const Var& x);
Var log_softmax(const Var& x);
/// -log softmax(logits)[target]
Var cross_entropy(const Var& logits, std::size_t target);
Var pick(const Var& x, std::size_t index);

// ---- convolution -----------------------------------------------------------
/// Result of sliding a full-feature-width kernel over time, kept so a
/// critic can rebuild its input gradient with the activation pattern fixed.
struct ConvTrace {
  std::size_t width = 0;
  std::size_t padded_steps = 0;  // rows after right zero-padding
  Tensor preact;                 // (padded_steps - width + 1) × filters
};

/// relu(window · W + b) for every window of `width` rows. Sequences shorter
/// than `width` are right-padded with zeros. W is (width·d)×F, b is F.
Var conv_over_time(const Var& h, const Var& w, const Var& b, std::size_t width,
                   ConvTrace* trace = nullptr);

/// Columnwise max over rows. Ties route the gradient to the first row.
Var max_pool_over_time(const Var& f, std::vector<std::size_t>* argmax = nullptr);

/// Gradient of sum_f a_f · (window at argmax_f · W[:,f]) w.r.t. the input
/// sequence, returned as a steps×d matrix. Differentiable in W and a.
Var conv_backproject(const Var& w, const Var& a, const std::vector<std::size_t>& argmax,
                     std::size_t width, std::size_t feature_dim, std::size_t padded_steps,
                     std::size_t steps);

// ---- regularization --------------------------------------------------------
/// Inverted dropout; identity unless tape.training and rate > 0.
Var dropout(const Var& x, double rate, std::mt19937_64& rng);

}  // namespace empgan
