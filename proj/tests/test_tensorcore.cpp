// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "empgan/error.hpp"
#include "empgan/gradcheck.hpp"
#include "testkit.hpp"

using namespace empgan;
using namespace testkit;

TEST_CASE("tensor shape contract") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(Tensor({0, 3}).size() == 0);
}

TEST_CASE("matmul") {
  Tape tape;
  Var eye = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  Var m = tape.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  CHECK(matmul(eye, m).value().identical(m.value()));
  Var col = tape.constant(Tensor::matrix({{0}, {1}}));
  CHECK(matmul(m, col).value().identical(Tensor::matrix({{2}, {4}})));

  std::mt19937_64 rng(3);
  Tensor a = uniform({3, 4}, rng), b = uniform({4, 2}, rng);
  Tensor got = matmul(tape.constant(a), tape.constant(b)).value();
  Mat want = mat_mul(to_mat(a), to_mat(b));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(got.at(i, j) - want[i][j]) < 1e-12);

  CHECK_THROWS_AS(matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2, 3}))), DimensionError);
}

TEST_CASE("unary activations") {
  Tape tape;
  CHECK(tanh(tape.constant(Tensor::scalar(0))).value().item() == 0.0);
  CHECK(sigmoid(tape.constant(Tensor::scalar(0))).value().item() == 0.5);
  CHECK(relu(tape.constant(Tensor::scalar(-1))).value().item() == 0.0);
  Tensor sat = tanh(tape.constant(Tensor::vector({-50, 50}))).value();
  CHECK(sat[0] >= -1.0);
  CHECK(sat[1] <= 1.0);
  CHECK(sat.all_finite());

  Tape t2;
  Var x = t2.leaf(Tensor::scalar(0.3));
  double g = t2.backward(tanh(x)).get(x).item();
  const double eps = 1e-5;
  double fd = (std::tanh(0.3 + eps) - std::tanh(0.3 - eps)) / (2 * eps);
  CHECK(std::abs(g - (1 - std::tanh(0.3) * std::tanh(0.3))) < 1e-15);
  CHECK(relative_error(g, fd) < 1e-6);
}

TEST_CASE("softmax") {
  Tape tape;
  Tensor half = softmax(tape.constant(Tensor::vector({0, 0}))).value();
  CHECK(half[0] == 0.5);
  CHECK(half[1] == 0.5);

  Tensor s = softmax(tape.constant(Tensor::vector({1, 2, 3}))).value();
  Vec want = softmax_oracle({1, 2, 3});
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(s[i] - want[i]) < 1e-12);

  std::mt19937_64 rng(5);
  Tensor x = uniform({6}, rng, -3, 3), y = x;
  for (auto& v : y.storage()) v += 17.25;
  CHECK(max_abs_diff(softmax(tape.constant(x)).value(), softmax(tape.constant(y)).value()) < 1e-12);

  Tensor big = softmax(tape.constant(Tensor::vector({1000, 0, -1000}))).value();
  CHECK(big.all_finite());
  CHECK(big[0] == doctest::Approx(1.0));
}

TEST_CASE("conv_over_time") {
  Tape tape;
  std::mt19937_64 rng(11);
  SUBCASE("width 1 identity") {
    Tensor h = uniform({4, 3}, rng);
    Tensor w({3, 3});
    for (std::size_t i = 0; i < 3; ++i) w.at(i, i) = 1.0;
    Tensor f = conv_over_time(tape.constant(h), tape.constant(w), tape.constant(Tensor({3})), 1).value();
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(f[i] == std::max(0.0, h[i]));
  }
  SUBCASE("zero input") {
    Tensor f = conv_over_time(tape.constant(Tensor({5, 3})), tape.constant(uniform({6, 2}, rng)),
                              tape.constant(Tensor({2})), 2)
                   .value();
    CHECK(f.max_abs() == 0.0);
  }
  SUBCASE("window oracle") {
    Tensor h = uniform({5, 3}, rng), w = uniform({6, 2}, rng), b = uniform({2}, rng);
    Tensor f = conv_over_time(tape.constant(h), tape.constant(w), tape.constant(b), 2).value();
    REQUIRE(f.shape() == Shape{4, 2});
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t k = 0; k < 2; ++k) {
        double acc = b[k];
        for (std::size_t dt = 0; dt < 2; ++dt)
          for (std::size_t j = 0; j < 3; ++j) acc += h.at(t + dt, j) * w.at(dt * 3 + j, k);
        CHECK(std::abs(f.at(t, k) - std::max(0.0, acc)) < 1e-12);
      }
  }
  SUBCASE("short sequence is padded") {
    Tensor f = conv_over_time(tape.constant(uniform({1, 3}, rng)), tape.constant(uniform({9, 2}, rng)),
                              tape.constant(Tensor({2})), 3)
                   .value();
    CHECK(f.shape() == Shape{1, 2});
  }
}

TEST_CASE("max_pool_over_time") {
  Tape tape;
  Tensor one = max_pool_over_time(tape.constant(Tensor::matrix({{4, -1}}))).value();
  CHECK(one.identical(Tensor::vector({4, -1})));
  CHECK(max_pool_over_time(tape.constant(Tensor::matrix({{1, 5}, {3, 2}}))).value().identical(Tensor::vector({3, 5})));

  Var f = tape.leaf(Tensor::matrix({{2, 2}, {2, 2}}));
  Tensor g = tape.backward(sum(max_pool_over_time(f))).get(f);
  CHECK(g.identical(Tensor::matrix({{1, 1}, {0, 0}})));
}

TEST_CASE("backward") {
  std::mt19937_64 rng(2);
  Tensor x0 = uniform({5}, rng);
  {
    Tape tape;
    Var x = tape.leaf(x0);
    CHECK(tape.backward(sum(x)).get(x).identical(Tensor({5}, 1.0)));
  }
  {
    Tape tape;
    Var x = tape.leaf(Tensor::scalar(1.7));
    CHECK(tape.backward(mul(x, x)).get(x).item() == 2 * 1.7);
  }
  {
    // two consumers accumulate
    Tape tape;
    Var x = tape.leaf(x0);
    Tensor g = tape.backward(add(sum(x), sum(scale(x, 3.0)))).get(x);
    CHECK(g.identical(Tensor({5}, 4.0)));
  }
  {
    TensorProgram net = [](Tape&, const std::vector<Var>& p) {
      Var h = tanh(affine(p[0], p[1], p[2]));
      return sum(tanh(affine(h, p[3], p[4])));
    };
    std::vector<Tensor> params{uniform({4}, rng), uniform({4, 5}, rng), uniform({5}, rng), uniform({5, 3}, rng),
                               uniform({3}, rng)};
    auto rep = grad_check(net, params, {"x", "W1", "b1", "W2", "b2"}, {1e-5, 1e-4, 0.0});
    CHECK(rep.passed);
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("grad_check") {
  std::mt19937_64 rng(4);
  TensorProgram linear = [](Tape& t, const std::vector<Var>& p) {
    return sum(mul(p[0], t.constant(Tensor::vector({1, -2, 0.5}))));
  };
  auto lin = grad_check(linear, {Tensor::vector({0.25, 0.5, -1})}, {"x"}, {1e-5, 1e-4, 0.0});
  CHECK(lin.max_rel_err < 1e-10);

  TensorProgram ce = [](Tape&, const std::vector<Var>& p) { return cross_entropy(p[0], 2); };
  Tensor logits = uniform({4}, rng);
  auto rep = grad_check(ce, {logits}, {"logits"}, {1e-5, 1e-4, 0.0});
  CHECK(rep.passed);
  REQUIRE(rep.params.size() == 1);
  CHECK(rep.params[0].name == "logits");

  auto bad = grad_check(ce, {logits}, {"logits"}, {1e-5, 1e-4, 0.1});
  CHECK_FALSE(bad.passed);
}

TEST_CASE("cross_entropy and log_softmax agree") {
  Tape tape;
  Tensor x = Tensor::vector({0.5, -1.0, 2.0});
  double ce = cross_entropy(tape.constant(x), 1).value().item();
  Vec sm = softmax_oracle({0.5, -1.0, 2.0});
  CHECK(std::abs(ce + std::log(sm[1])) < 1e-12);
  CHECK(std::abs(log_softmax(tape.constant(x)).value()[1] + ce) < 1e-12);
}

TEST_CASE("dropout is identity outside training") {
  Tape tape;
  std::mt19937_64 rng(1);
  Tensor x = uniform({10}, rng);
  CHECK(dropout(tape.constant(x), 0.5, rng).value().identical(x));
  tape.training = true;
  Tensor y = dropout(tape.constant(x), 0.5, rng).value();
  for (std::size_t i = 0; i < 10; ++i) CHECK((y[i] == 0.0 || y[i] == 2.0 * x[i]));
}
