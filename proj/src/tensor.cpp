// SPDX-License-Identifier: Apache-2.0
#include "empgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace empgan {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size())
    EMPGAN_THROW(DimensionError, "tensor shape " << shape_str(shape_) << " does not hold "
                                                 << data_.size() << " values");
}

Tensor Tensor::vector(std::vector<double> v) {
  Shape s{v.size()};
  return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) EMPGAN_THROW(DimensionError, "rows() on non-matrix " << shape_str(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) EMPGAN_THROW(DimensionError, "cols() on non-matrix " << shape_str(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) EMPGAN_THROW(DimensionError, "item() on non-scalar " << shape_str(shape_));
  return data_[0];
}

std::span<const double> Tensor::row(std::size_t r) const {
  std::size_t c = cols();
  return {data_.data() + r * c, c};
}

std::span<double> Tensor::row(std::size_t r) {
  std::size_t c = cols();
  return {data_.data() + r * c, c};
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size())
    EMPGAN_THROW(DimensionError, "cannot reshape " << shape_str(shape_) << " to " << shape_str(shape));
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor::identical(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

void Tensor::axpy(double scale, const Tensor& other) {
  if (other.size() != size())
    EMPGAN_THROW(DimensionError, "axpy " << shape_str(shape_) << " vs " << shape_str(other.shape_));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

const Tensor* GradientMap::find(int leaf_id) const {
  auto it = grads_.find(leaf_id);
  return it == grads_.end() ? nullptr : &it->second;
}

Tensor GradientMap::get(const Var& v) const {
  if (const Tensor* g = find(v.id())) return *g;
  return Tensor::zeros_like(v.value());
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true, true});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<int> parents, BackwardFn backward) {
  bool rg = std::any_of(parents.begin(), parents.end(), [&](int p) { return nodes_[p].requires_grad; });
  nodes_.push_back(Node{std::move(value), {}, std::move(parents), rg ? std::move(backward) : BackwardFn{}, rg, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor* Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
  return &n.grad;
}

GradientMap Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw ContractError("backward: loss belongs to a different tape");
  if (!value(loss.id()).is_scalar())
    EMPGAN_THROW(ContractError, "backward: loss must be scalar, got shape " << shape_str(value(loss.id()).shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  GradientMap out;
  if (!nodes_[loss.id()].requires_grad) return out;
  nodes_[loss.id()].grad = Tensor(nodes_[loss.id()].value.shape(), 1.0);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    bool reached = n.grad.shape() == n.value.shape() && n.grad.size() == n.value.size();
    if (!n.requires_grad || n.is_leaf || !reached || !n.backward) continue;
    n.backward(*this, id);
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (!n.is_leaf) continue;
    if (n.grad.shape() == n.value.shape() && n.grad.size() == n.value.size())
      out.set(static_cast<int>(id), n.grad);
    else
      out.set(static_cast<int>(id), Tensor(n.value.shape()));
  }
  return out;
}

GradientMap backward(const Var& loss) { return loss.tape()->backward(loss); }

// ---------------------------------------------------------------------------
// helpers

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw ContractError("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw ContractError("operands recorded on different tapes");
  return tape_of(a);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    EMPGAN_THROW(DimensionError, op << ": shape mismatch " << shape_str(a.shape()) << " vs " << shape_str(b.shape()));
}

void accumulate(Tape& t, int id, const Tensor& g, double s = 1.0) {
  if (Tensor* buf = t.grad_buffer(id)) buf->axpy(s, g);
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// C(m×n) += A(m×k)·B(k×n)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C(m×k) += G(m×n)·B(k×n)ᵀ
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      ci[p] += acc;
    }
  }
}

// C(k×n) += A(m×k)ᵀ·G(m×n)
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  out.axpy(1.0, b.value());
  return t.record(std::move(out), {a.id(), b.id()}, [](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    accumulate(t, t.parents(self)[0], g);
    accumulate(t, t.parents(self)[1], g);
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  out.axpy(-1.0, b.value());
  return t.record(std::move(out), {a.id(), b.id()}, [](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    accumulate(t, t.parents(self)[0], g);
    accumulate(t, t.parents(self)[1], g, -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.record(std::move(out), {a.id(), b.id()}, [](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    int pa = t.parents(self)[0], pb = t.parents(self)[1];
    const Tensor& av = t.value(pa);
    const Tensor& bv = t.value(pb);
    if (Tensor* ga = t.grad_buffer(pa))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    if (Tensor* gb = t.grad_buffer(pb))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
  });
}

Var scale(const Var& a, double c) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.storage()) v *= c;
  return t.record(std::move(out), {a.id()}, [c](Tape& t, int self) {
    accumulate(t, t.parents(self)[0], t.grad(self), c);
  });
}

Var add_scalar(const Var& a, double c) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (double& v : out.storage()) v += c;
  return t.record(std::move(out), {a.id()}, [](Tape& t, int self) {
    accumulate(t, t.parents(self)[0], t.grad(self));
  });
}

Var one_minus(const Var& a) { return add_scalar(scale(a, -1.0), 1.0); }

Var apply_unary(const Var& x, Unary f) {
  Tape& t = tape_of(x);
  Tensor out = x.value();
  for (double& v : out.storage()) {
    switch (f) {
      case Unary::Tanh: v = std::tanh(v); break;
      case Unary::Sigmoid: v = sigmoid_scalar(v); break;
      case Unary::Relu: v = v > 0.0 ? v : 0.0; break;
      case Unary::Softplus: v = softplus_scalar(v); break;
    }
  }
  return t.record(std::move(out), {x.id()}, [f](Tape& t, int self) {
    int p = t.parents(self)[0];
    Tensor* gx = t.grad_buffer(p);
    if (!gx) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    const Tensor& in = t.value(p);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double d = 0.0;
      switch (f) {
        case Unary::Tanh: d = 1.0 - y[i] * y[i]; break;
        case Unary::Sigmoid: d = y[i] * (1.0 - y[i]); break;
        case Unary::Relu: d = in[i] > 0.0 ? 1.0 : 0.0; break;
        case Unary::Softplus: d = sigmoid_scalar(in[i]); break;
      }
      (*gx)[i] += g[i] * d;
    }
  });
}

Var mask(const Var& x, const Tensor& m) {
  Tape& t = tape_of(x);
  require_same_shape("mask", x.value(), m);
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= m[i];
  return t.record(std::move(out), {x.id()}, [m](Tape& t, int self) {
    if (Tensor* gx = t.grad_buffer(t.parents(self)[0])) {
      const Tensor& g = t.grad(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * m[i];
    }
  });
}

Var square(const Var& x) { return mul(x, x); }

// ---------------------------------------------------------------------------
// linear algebra

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  std::size_t m, k, n;
  Shape out_shape;
  if (av.rank() == 2 && bv.rank() == 2) {
    m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    if (bv.dim(0) != k)
      EMPGAN_THROW(DimensionError, "matmul: inner dimensions disagree " << shape_str(av.shape()) << " · "
                                                                       << shape_str(bv.shape()));
    out_shape = {m, n};
  } else if (av.rank() == 1 && bv.rank() == 2) {
    m = 1, k = av.dim(0), n = bv.dim(1);
    if (bv.dim(0) != k)
      EMPGAN_THROW(DimensionError, "matmul: inner dimensions disagree " << shape_str(av.shape()) << " · "
                                                                       << shape_str(bv.shape()));
    out_shape = {n};
  } else if (av.rank() == 2 && bv.rank() == 1) {
    m = av.dim(0), k = av.dim(1), n = 1;
    if (bv.dim(0) != k)
      EMPGAN_THROW(DimensionError, "matmul: inner dimensions disagree " << shape_str(av.shape()) << " · "
                                                                       << shape_str(bv.shape()));
    out_shape = {m};
  } else {
    EMPGAN_THROW(DimensionError, "matmul: unsupported ranks " << shape_str(av.shape()) << " · "
                                                              << shape_str(bv.shape()));
  }
  Tensor out(out_shape);
  gemm_nn(av.storage().data(), bv.storage().data(), out.storage().data(), m, k, n);
  return t.record(std::move(out), {a.id(), b.id()}, [m, k, n](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    int pa = t.parents(self)[0], pb = t.parents(self)[1];
    if (Tensor* ga = t.grad_buffer(pa))
      gemm_nt(g.storage().data(), t.value(pb).storage().data(), ga->storage().data(), m, k, n);
    if (Tensor* gb = t.grad_buffer(pb))
      gemm_tn(t.value(pa).storage().data(), g.storage().data(), gb->storage().data(), m, k, n);
  });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  Var xw = matmul(x, w);
  if (xw.value().rank() == 1) return add(xw, b);
  return add_rows(xw, b);
}

Var add_rows(const Var& m, const Var& v) {
  Tape& t = tape_of(m, v);
  const Tensor& mv = m.value();
  if (mv.rank() != 2 || v.value().rank() != 1 || v.value().dim(0) != mv.dim(1))
    EMPGAN_THROW(DimensionError, "add_rows: " << shape_str(mv.shape()) << " + " << shape_str(v.shape()));
  Tensor out = mv;
  std::size_t r = mv.dim(0), c = mv.dim(1);
  const Tensor& vv = v.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += vv[j];
  return t.record(std::move(out), {m.id(), v.id()}, [r, c](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    accumulate(t, t.parents(self)[0], g);
    if (Tensor* gv = t.grad_buffer(t.parents(self)[1]))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*gv)[j] += g[i * c + j];
  });
}

// ---------------------------------------------------------------------------
// reductions

Var sum(const Var& x) {
  Tape& t = tape_of(x);
  return t.record(Tensor::scalar(x.value().sum()), {x.id()}, [](Tape& t, int self) {
    if (Tensor* gx = t.grad_buffer(t.parents(self)[0])) {
      double g = t.grad(self).item();
      for (double& v : gx->storage()) v += g;
    }
  });
}

Var mean(const Var& x) {
  if (x.size() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Var norm2(const Var& x) {
  Tape& t = tape_of(x);
  double ss = 0.0;
  for (double v : x.value().storage()) ss += v * v;
  double n = std::sqrt(ss);
  return t.record(Tensor::scalar(n), {x.id()}, [n](Tape& t, int self) {
    int p = t.parents(self)[0];
    Tensor* gx = t.grad_buffer(p);
    if (!gx || n == 0.0) return;
    double g = t.grad(self).item() / n;
    gx->axpy(g, t.value(p));
  });
}

// ---------------------------------------------------------------------------
// structure

Var reshape(const Var& x, Shape shape) {
  Tape& t = tape_of(x);
  Tensor out = x.value().reshaped(std::move(shape));
  return t.record(std::move(out), {x.id()}, [](Tape& t, int self) {
    if (Tensor* gx = t.grad_buffer(t.parents(self)[0])) {
      const Tensor& g = t.grad(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    }
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Tape& t = tape_of(parts.front());
  std::vector<double> data;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    tape_of(parts.front(), p);
    if (p.value().rank() != 1) EMPGAN_THROW(DimensionError, "concat expects vectors, got " << shape_str(p.shape()));
    offsets.push_back(data.size());
    data.insert(data.end(), p.value().storage().begin(), p.value().storage().end());
    ids.push_back(p.id());
  }
  Tensor out = Tensor::vector(std::move(data));
  return t.record(std::move(out), std::move(ids), [offsets](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const auto& ps = t.parents(self);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (Tensor* gp = t.grad_buffer(ps[i]))
        for (std::size_t j = 0; j < gp->size(); ++j) (*gp)[j] += g[offsets[i] + j];
    }
  });
}

Var hconcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("hconcat of zero tensors");
  Tape& t = tape_of(parts.front());
  std::size_t rows = parts.front().value().rows();
  std::vector<std::size_t> widths, offsets;
  std::vector<int> ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    tape_of(parts.front(), p);
    if (p.value().rank() != 2 || p.value().rows() != rows)
      EMPGAN_THROW(DimensionError, "hconcat: " << shape_str(parts.front().shape()) << " vs " << shape_str(p.shape()));
    offsets.push_back(total);
    widths.push_back(p.value().cols());
    total += p.value().cols();
    ids.push_back(p.id());
  }
  Tensor out({rows, total});
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& pv = parts[i].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pv.row(r).data(), widths[i], out.row(r).data() + offsets[i]);
  }
  return t.record(std::move(out), std::move(ids), [rows, total, widths, offsets](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const auto& ps = t.parents(self);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      Tensor* gp = t.grad_buffer(ps[i]);
      if (!gp) continue;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < widths[i]; ++j) (*gp)[r * widths[i] + j] += g[r * total + offsets[i] + j];
    }
  });
}

Var stack(const std::vector<Var>& rows) {
  if (rows.empty()) throw DimensionError("stack of zero rows");
  Tape& t = tape_of(rows.front());
  std::size_t width = rows.front().size();
  std::vector<double> data;
  data.reserve(width * rows.size());
  std::vector<int> ids;
  for (const Var& r : rows) {
    tape_of(rows.front(), r);
    if (r.value().rank() != 1 || r.size() != width)
      EMPGAN_THROW(DimensionError, "stack: " << shape_str(rows.front().shape()) << " vs " << shape_str(r.shape()));
    data.insert(data.end(), r.value().storage().begin(), r.value().storage().end());
    ids.push_back(r.id());
  }
  Tensor out({rows.size(), width}, std::move(data));
  return t.record(std::move(out), std::move(ids), [width](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const auto& ps = t.parents(self);
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (Tensor* gp = t.grad_buffer(ps[i]))
        for (std::size_t j = 0; j < width; ++j) (*gp)[j] += g[i * width + j];
  });
}

Var row(const Var& m, std::size_t r) {
  Tape& t = tape_of(m);
  const Tensor& mv = m.value();
  if (mv.rank() != 2 || r >= mv.rows())
    EMPGAN_THROW(DimensionError, "row " << r << " of " << shape_str(mv.shape()));
  auto span = mv.row(r);
  Tensor out = Tensor::vector(std::vector<double>(span.begin(), span.end()));
  std::size_t c = mv.cols();
  return t.record(std::move(out), {m.id()}, [r, c](Tape& t, int self) {
    if (Tensor* gm = t.grad_buffer(t.parents(self)[0])) {
      const Tensor& g = t.grad(self);
      for (std::size_t j = 0; j < c; ++j) (*gm)[r * c + j] += g[j];
    }
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  Tape& t = tape_of(table);
  const Tensor& tv = table.value();
  if (tv.rank() != 2) EMPGAN_THROW(DimensionError, "gather_rows on " << shape_str(tv.shape()));
  if (ids.empty()) throw DimensionError("gather_rows with no ids");
  std::size_t c = tv.cols();
  Tensor out({ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows())
      EMPGAN_THROW(DimensionError, "gather_rows: id " << ids[i] << " outside table " << shape_str(tv.shape()));
    std::copy_n(tv.row(ids[i]).data(), c, out.row(i).data());
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return t.record(std::move(out), {table.id()}, [idv, c](Tape& t, int self) {
    if (Tensor* gt = t.grad_buffer(t.parents(self)[0])) {
      const Tensor& g = t.grad(self);
      for (std::size_t i = 0; i < idv.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) (*gt)[idv[i] * c + j] += g[i * c + j];
    }
  });
}

Var slice(const Var& v, std::size_t begin, std::size_t len) {
  Tape& t = tape_of(v);
  const Tensor& vv = v.value();
  if (vv.rank() != 1 || begin + len > vv.size())
    EMPGAN_THROW(DimensionError, "slice [" << begin << "," << begin + len << ") of " << shape_str(vv.shape()));
  Tensor out = Tensor::vector(std::vector<double>(vv.storage().begin() + begin, vv.storage().begin() + begin + len));
  return t.record(std::move(out), {v.id()}, [begin, len](Tape& t, int self) {
    if (Tensor* gv = t.grad_buffer(t.parents(self)[0])) {
      const Tensor& g = t.grad(self);
      for (std::size_t j = 0; j < len; ++j) (*gv)[begin + j] += g[j];
    }
  });
}

Var pad_rows(const Var& m, std::size_t rows) {
  const Tensor& mv = m.value();
  if (mv.rank() != 2) EMPGAN_THROW(DimensionError, "pad_rows on " << shape_str(mv.shape()));
  if (mv.rows() >= rows) return m;
  Tape& t = tape_of(m);
  Tensor out({rows, mv.cols()});
  std::copy(mv.storage().begin(), mv.storage().end(), out.storage().begin());
  std::size_t n = mv.size();
  return t.record(std::move(out), {m.id()}, [n](Tape& t, int self) {
    if (Tensor* gm = t.grad_buffer(t.parents(self)[0])) {
      const Tensor& g = t.grad(self);
      for (std::size_t i = 0; i < n; ++i) (*gm)[i] += g[i];
    }
  });
}

Var slice_rows(const Var& m, std::size_t begin, std::size_t count) {
  Tape& t = tape_of(m);
  const Tensor& mv = m.value();
  if (mv.rank() != 2 || begin + count > mv.rows() || count == 0)
    EMPGAN_THROW(DimensionError, "slice_rows [" << begin << "," << begin + count << ") of " << shape_str(mv.shape()));
  std::size_t c = mv.cols();
  Tensor out({count, c});
  std::copy_n(mv.storage().begin() + begin * c, count * c, out.storage().begin());
  return t.record(std::move(out), {m.id()}, [begin, count, c](Tape& t, int self) {
    if (Tensor* gm = t.grad_buffer(t.parents(self)[0])) {
      const Tensor& g = t.grad(self);
      for (std::size_t i = 0; i < count * c; ++i) (*gm)[begin * c + i] += g[i];
    }
  });
}

// ---------------------------------------------------------------------------
// probability

Var softmax(const Var& x) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() != 1 || xv.size() == 0)
    EMPGAN_THROW(DimensionError, "softmax expects a non-empty vector, got " << shape_str(xv.shape()));
  double mx = *std::max_element(xv.storage().begin(), xv.storage().end());
  Tensor out = xv;
  double z = 0.0;
  for (double& v : out.storage()) z += (v = std::exp(v - mx));
  for (double& v : out.storage()) v /= z;
  return t.record(std::move(out), {x.id()}, [](Tape& t, int self) {
    Tensor* gx = t.grad_buffer(t.parents(self)[0]);
    if (!gx) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
    for (std::size_t i = 0; i < y.size(); ++i) (*gx)[i] += y[i] * (g[i] - dot);
  });
}

Var log_softmax(const Var& x) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  if (xv.rank() != 1 || xv.size() == 0)
    EMPGAN_THROW(DimensionError, "log_softmax expects a non-empty vector, got " << shape_str(xv.shape()));
  double mx = *std::max_element(xv.storage().begin(), xv.storage().end());
  double z = 0.0;
  for (double v : xv.storage()) z += std::exp(v - mx);
  double lz = mx + std::log(z);
  Tensor out = xv;
  for (double& v : out.storage()) v -= lz;
  return t.record(std::move(out), {x.id()}, [](Tape& t, int self) {
    Tensor* gx = t.grad_buffer(t.parents(self)[0]);
    if (!gx) return;
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    double gs = g.sum();
    for (std::size_t i = 0; i < y.size(); ++i) (*gx)[i] += g[i] - std::exp(y[i]) * gs;
  });
}

Var cross_entropy(const Var& logits, std::size_t target) {
  if (target >= logits.size())
    EMPGAN_THROW(DimensionError, "cross_entropy: target " << target << " outside " << shape_str(logits.shape()));
  return scale(pick(log_softmax(logits), target), -1.0);
}

Var pick(const Var& x, std::size_t index) {
  Tape& t = tape_of(x);
  if (index >= x.size()) EMPGAN_THROW(DimensionError, "pick " << index << " of " << shape_str(x.shape()));
  return t.record(Tensor::scalar(x.value()[index]), {x.id()}, [index](Tape& t, int self) {
    if (Tensor* gx = t.grad_buffer(t.parents(self)[0])) (*gx)[index] += t.grad(self).item();
  });
}

// ---------------------------------------------------------------------------
// convolution

Var conv_over_time(const Var& h, const Var& w, const Var& b, std::size_t width, ConvTrace* trace) {
  Tape& t = tape_of(h, w);
  tape_of(h, b);
  const Tensor& hv = h.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (hv.rank() != 2 || width == 0)
    EMPGAN_THROW(DimensionError, "conv_over_time: input " << shape_str(hv.shape()) << " width " << width);
  std::size_t steps = hv.rows(), d = hv.cols();
  std::size_t padded = std::max(steps, width);
  if (wv.rank() != 2 || wv.rows() != width * d)
    EMPGAN_THROW(DimensionError, "conv_over_time: kernel " << shape_str(wv.shape()) << " does not span width "
                                                           << width << " of input " << shape_str(hv.shape()));
  std::size_t filters = wv.cols();
  if (bv.rank() != 1 || bv.size() != filters)
    EMPGAN_THROW(DimensionError, "conv_over_time: bias " << shape_str(bv.shape()) << " vs kernel "
                                                         << shape_str(wv.shape()));
  std::size_t out_steps = padded - width + 1;
  // Windows of a row-major matrix are contiguous, so each one is a row of a
  // virtual (out_steps × width·d) matrix starting at row s.
  Tensor padded_in({padded, d});
  std::copy(hv.storage().begin(), hv.storage().end(), padded_in.storage().begin());
  Tensor pre({out_steps, filters});
  for (std::size_t s = 0; s < out_steps; ++s) {
    std::copy(bv.storage().begin(), bv.storage().end(), pre.row(s).begin());
    gemm_nn(padded_in.storage().data() + s * d, wv.storage().data(), pre.row(s).data(), 1, width * d, filters);
  }
  Tensor out = pre;
  for (double& v : out.storage()) v = v > 0.0 ? v : 0.0;
  if (trace) *trace = ConvTrace{width, padded, pre};
  return t.record(std::move(out), {h.id(), w.id(), b.id()},
                  [steps, d, padded, width, filters, out_steps, padded_in = std::move(padded_in)](Tape& t, int self) {
                    const Tensor& y = t.value(self);
                    Tensor g = t.grad(self);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      if (!(y[i] > 0.0)) g[i] = 0.0;
                    const auto& ps = t.parents(self);
                    if (Tensor* gh = t.grad_buffer(ps[0])) {
                      Tensor gpad({padded, d});
                      const Tensor& wv = t.value(ps[1]);
                      for (std::size_t s = 0; s < out_steps; ++s)
                        gemm_nt(g.row(s).data(), wv.storage().data(), gpad.storage().data() + s * d, 1, width * d,
                                filters);
                      for (std::size_t i = 0; i < steps * d; ++i) (*gh)[i] += gpad[i];
                    }
                    if (Tensor* gw = t.grad_buffer(ps[1]))
                      for (std::size_t s = 0; s < out_steps; ++s)
                        gemm_tn(padded_in.storage().data() + s * d, g.row(s).data(), gw->storage().data(), 1,
                                width * d, filters);
                    if (Tensor* gb = t.grad_buffer(ps[2]))
                      for (std::size_t s = 0; s < out_steps; ++s)
                        for (std::size_t f = 0; f < filters; ++f) (*gb)[f] += g[s * filters + f];
                  });
}

Var max_pool_over_time(const Var& f, std::vector<std::size_t>* argmax) {
  Tape& t = tape_of(f);
  const Tensor& fv = f.value();
  if (fv.rank() != 2 || fv.rows() == 0)
    EMPGAN_THROW(DimensionError, "max_pool_over_time needs at least one time step, got " << shape_str(fv.shape()));
  std::size_t rows = fv.rows(), cols = fv.cols();
  std::vector<std::size_t> arg(cols, 0);
  Tensor out({cols});
  for (std::size_t c = 0; c < cols; ++c) {
    double best = fv.at(0, c);
    for (std::size_t r = 1; r < rows; ++r)
      if (fv.at(r, c) > best) best = fv.at(r, c), arg[c] = r;
    out[c] = best;
  }
  if (argmax) *argmax = arg;
  return t.record(std::move(out), {f.id()}, [arg, cols](Tape& t, int self) {
    if (Tensor* gf = t.grad_buffer(t.parents(self)[0])) {
      const Tensor& g = t.grad(self);
      for (std::size_t c = 0; c < cols; ++c) (*gf)[arg[c] * cols + c] += g[c];
    }
  });
}

Var conv_backproject(const Var& w, const Var& a, const std::vector<std::size_t>& argmax, std::size_t width,
                     std::size_t feature_dim, std::size_t padded_steps, std::size_t steps) {
  Tape& t = tape_of(w, a);
  const Tensor& wv = w.value();
  const Tensor& av = a.value();
  std::size_t filters = av.size();
  if (wv.rank() != 2 || wv.rows() != width * feature_dim || wv.cols() != filters || argmax.size() != filters)
    EMPGAN_THROW(DimensionError, "conv_backproject: kernel " << shape_str(wv.shape()) << " coefficients "
                                                             << shape_str(av.shape()));
  Tensor out({steps, feature_dim});
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t j = 0; j < width; ++j) {
      std::size_t r = argmax[f] + j;
      if (r >= steps) continue;  // right padding is not part of the input
      for (std::size_t c = 0; c < feature_dim; ++c) out.at(r, c) += wv.at(j * feature_dim + c, f) * av[f];
    }
  }
  (void)padded_steps;
  return t.record(std::move(out), {w.id(), a.id()}, [argmax, width, feature_dim, steps, filters](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    int pw = t.parents(self)[0], pa = t.parents(self)[1];
    const Tensor& wv = t.value(pw);
    const Tensor& av = t.value(pa);
    Tensor* gw = t.grad_buffer(pw);
    Tensor* ga = t.grad_buffer(pa);
    for (std::size_t f = 0; f < filters; ++f) {
      for (std::size_t j = 0; j < width; ++j) {
        std::size_t r = argmax[f] + j;
        if (r >= steps) continue;
        for (std::size_t c = 0; c < feature_dim; ++c) {
          double gv = g.at(r, c);
          if (gw) gw->at(j * feature_dim + c, f) += gv * av[f];
          if (ga) (*ga)[f] += gv * wv.at(j * feature_dim + c, f);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------

Var dropout(const Var& x, double rate, std::mt19937_64& rng) {
  if (!x.tape()->training || rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must lie in [0,1)");
  Tensor m(x.shape());
  std::bernoulli_distribution keep(1.0 - rate);
  double s = 1.0 / (1.0 - rate);
  for (double& v : m.storage()) v = keep(rng) ? s : 0.0;
  return mask(x, m);
}

}  // namespace empgan
