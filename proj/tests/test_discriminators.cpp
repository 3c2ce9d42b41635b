// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "empgan/discriminator.hpp"
#include "empgan/gradcheck.hpp"
#include "testkit.hpp"

using namespace empgan;
using namespace testkit;

namespace {

CriticDims small_dims(std::size_t hidden = 3) {
  CriticDims d;
  d.input = 4;
  d.hidden = hidden;
  d.context = 5;
  d.widths = {2, 3};
  d.filters = 4;
  return d;
}

Critic make_critic(std::uint64_t seed, std::size_t hidden = 3, double range = 0.6) {
  std::mt19937_64 rng(seed);
  Critic c(CriticKind::Semantic, small_dims(hidden), rng);
  for (auto& t : c.params.values()) t = uniform(t.shape(), rng, -range, range);
  return c;
}

/// Straight-line forward pass over plain vectors.
double score_oracle(const Critic& c, const Mat& states, const Vec& h_dlg) {
  const std::size_t width = states[0].size();
  Vec pooled;
  for (std::size_t i = 0; i < c.dims.widths.size(); ++i) {
    const std::size_t w = c.dims.widths[i];
    Mat padded = states;
    while (padded.size() < w) padded.push_back(Vec(width, 0.0));
    Mat W = to_mat(c.params[c.conv_w[i]]);
    Vec b = to_vec(c.params[c.conv_b[i]]);
    for (std::size_t k = 0; k < c.dims.filters; ++k) {
      double best = -INFINITY;
      for (std::size_t t = 0; t + w <= padded.size(); ++t) {
        double acc = b[k];
        for (std::size_t dt = 0; dt < w; ++dt)
          for (std::size_t j = 0; j < width; ++j) acc += padded[t + dt][j] * W[dt * width + j][k];
        best = std::max(best, std::max(0.0, acc));
      }
      pooled.push_back(best);
    }
  }
  Vec pre = vadd(vadd(vec_mat(pooled, to_mat(c.params[c.proj_w])), to_vec(c.params[c.proj_b])), h_dlg);
  Mat wd = to_mat(c.params[c.out_w]);
  double s = c.params[c.out_b][0];
  for (std::size_t k = 0; k < pre.size(); ++k) s += std::max(0.0, pre[k]) * wd[k][0];
  return s;
}

class LinearUnit : public ScoreFunction {
 public:
  explicit LinearUnit(Tensor a) : a_(std::move(a)) {}
  Var input_gradient(Tape& tape, const Tensor&) override { return tape.constant(a_); }

 private:
  Tensor a_;
};

class ConstantScore : public ScoreFunction {
 public:
  Var input_gradient(Tape& tape, const Tensor& x) override { return tape.constant(Tensor(x.shape())); }
};

}  // namespace

TEST_CASE("fuse_context") {
  Critic c = make_critic(41);
  std::mt19937_64 rng(1);
  Tensor u = uniform({5}, rng), e = uniform({5}, rng), l = uniform({5}, rng);
  auto fuse = [&](const Critic& cc, double k) {
    Tape tape;
    Binding p(tape, cc.params);
    auto sc = [&](const Tensor& t) {
      Tensor o = t;
      for (auto& v : o.storage()) v *= k;
      return tape.constant(o);
    };
    return fuse_context(p, cc, sc(u), sc(e), sc(l)).value();
  };
  SUBCASE("zero weights") {
    Critic z = c;
    z.params[z.ctx_w] = Tensor(z.params[z.ctx_w].shape());
    CHECK(fuse(z, 1.0).identical(z.params[z.ctx_b]));
  }
  SUBCASE("affine") {
    Tensor f0 = fuse(c, 0.0), f1 = fuse(c, 1.0), f2 = fuse(c, 2.0);
    for (std::size_t i = 0; i < f0.size(); ++i) CHECK(std::abs((f2[i] - f1[i]) - (f1[i] - f0[i])) < 1e-12);
  }
  SUBCASE("matmul oracle") {
    Vec x = to_vec(u);
    for (double v : to_vec(e)) x.push_back(v);
    for (double v : to_vec(l)) x.push_back(v);
    Vec want = vadd(vec_mat(x, to_mat(c.params[c.ctx_w])), to_vec(c.params[c.ctx_b]));
    Tensor got = fuse(c, 1.0);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("build_pair") {
  Critic c = make_critic(42);
  std::mt19937_64 rng(2);
  Tensor cand = uniform({3, 4}, rng), gold = uniform({5, 4}, rng), fb = uniform({2, 4}, rng), fb2 = uniform({4, 4}, rng);
  Tape tape;
  Binding p(tape, c.params);
  Var h = tape.constant(uniform({3}, rng));
  SUBCASE("identical candidate and gold") {
    auto [fn, tn] = build_pair(p, c, {tape.constant(gold), tape.constant(gold), tape.constant(fb)}, h);
    CHECK(fn.states.value().identical(tn.states.value()));
    CHECK(fn.kind == SampleKind::FN);
    CHECK(tn.kind == SampleKind::TN);
  }
  SUBCASE("shared feedback half") {
    auto [fn, tn] = build_pair(p, c, {tape.constant(cand), tape.constant(gold), tape.constant(fb)}, h);
    auto [fn2, tn2] = build_pair(p, c, {tape.constant(cand), tape.constant(gold), tape.constant(fb2)}, h);
    const Tensor &a = fn.states.value(), &b = tn.states.value(), &a2 = fn2.states.value(), &b2 = tn2.states.value();
    CHECK(a.shape() == Shape{5, 6});
    bool changed = false;
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(a.at(r, 3 + k) == b.at(r, 3 + k));
        CHECK(a2.at(r, 3 + k) == b2.at(r, 3 + k));
        CHECK(a.at(r, k) == a2.at(r, k));
        CHECK(b.at(r, k) == b2.at(r, k));
        changed = changed || a.at(r, 3 + k) != a2.at(r, 3 + k);
      }
    CHECK(changed);
    // rows past the candidate length are zero padding
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.at(4, k) == 0.0);
  }
  SUBCASE("zero feedback") {
    auto [fn, tn] = build_pair(p, c, {tape.constant(cand), tape.constant(gold), tape.constant(fb)}, h, true);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t k = 0; k < 3; ++k) CHECK(fn.states.value().at(r, 3 + k) == 0.0);
  }
}

TEST_CASE("critic_score") {
  Critic c = make_critic(43);
  std::mt19937_64 rng(3);
  SUBCASE("W_D = 0") {
    c.params[c.out_w] = Tensor(c.params[c.out_w].shape());
    for (int k = 0; k < 3; ++k) {
      Tape tape;
      Binding p(tape, c.params);
      double s = critic_score(p, c, tape.constant(uniform({4, 6}, rng)), tape.constant(uniform({3}, rng))).value().item();
      CHECK(s == c.params[c.out_b][0]);
    }
  }
  SUBCASE("finite on wide inputs") {
    for (int k = 0; k < 20; ++k) {
      Tape tape;
      Binding p(tape, c.params);
      Var s = critic_score(p, c, tape.constant(uniform({1 + k % 5, 6}, rng, -10, 10)),
                           tape.constant(uniform({3}, rng, -10, 10)));
      CHECK(s.value().all_finite());
    }
  }
  SUBCASE("straight-line oracle") {
    for (std::size_t steps : {1u, 2u, 4u, 7u}) {
      Tensor x = uniform({steps, 6}, rng), h = uniform({3}, rng);
      Tape tape;
      Binding p(tape, c.params);
      double got = critic_score(p, c, tape.constant(x), tape.constant(h)).value().item();
      CHECK(std::abs(got - score_oracle(c, to_mat(x), to_vec(h))) < 1e-12);
    }
  }
}

TEST_CASE("gradient_penalty analytic cases") {
  Tape tape;
  Tensor fn({2, 4}), tn({2, 4}, 1.0);
  Tensor a({2, 4});
  for (std::size_t i = 0; i < 4; ++i) a[i] = 0.5;
  LinearUnit lin(a);
  double gn = -1;
  CHECK(gradient_penalty(lin, tape, fn, tn, 0.3, {10.0, true, false}, &gn).value().item() == 0.0);
  CHECK(gn == 1.0);

  Tensor rows({2, 4});
  rows.at(0, 1) = 1.0;
  rows.at(1, 3) = -1.0;
  LinearUnit per_row(rows);
  CHECK(gradient_penalty(per_row, tape, fn, tn, 0.9, {10.0, true, true}).value().item() == 0.0);

  ConstantScore flat;
  for (double sigma : {10.0, 1.0, 0.25}) {
    CHECK(gradient_penalty(flat, tape, fn, tn, 0.5, {sigma, true, false}).value().item() == sigma);
    CHECK(gradient_penalty(flat, tape, fn, tn, 0.5, {sigma, true, true}).value().item() == sigma);
    CHECK(gradient_penalty(flat, tape, fn, tn, 0.5, {sigma, false, false}).value().item() == -sigma);
  }
}

TEST_CASE("critic input gradient matches finite differences") {
  Critic c = make_critic(44, 2);
  std::mt19937_64 rng(4);
  Tensor x = uniform({2, 4}, rng), h = uniform({2}, rng);
  auto score = [&](const Tensor& s) {
    Tape tape;
    Binding p(tape, c.params, false);
    return critic_score(p, c, tape.constant(s), tape.constant(h)).value().item();
  };
  Tape tape;
  Binding p(tape, c.params, false);
  CriticScoreFunction f(p, c, tape.constant(h));
  Tensor g = f.input_gradient(tape, x).value();
  REQUIRE(g.shape() == x.shape());
  CHECK(g.max_abs() > 0.0);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor up = x, dn = x;
    up[i] += eps;
    dn[i] -= eps;
    double fd = (score(up) - score(dn)) / (2 * eps);
    CHECK(relative_error(g[i], fd) < 1e-4);
  }
}

TEST_CASE("critic_loss") {
  Critic c = make_critic(45);
  std::mt19937_64 rng(5);
  Tensor s1 = uniform({3, 6}, rng), s2 = uniform({4, 6}, rng), h = uniform({3}, rng);
  auto loss = [&](const Critic& cc, const Tensor& fn, const Tensor& tn, double sigma, bool vanilla = false) {
    Tape tape;
    Binding p(tape, cc.params);
    Var hv = tape.constant(h);
    CriticPair pr{{SampleKind::FN, tape.constant(fn), hv}, {SampleKind::TN, tape.constant(tn), hv}};
    return critic_loss(p, cc, {pr}, {0.4}, {sigma, true, false}, vanilla).total.value().item();
  };
  CHECK(loss(c, s1, s1, 0.0) == 0.0);

  Tensor s1p({4, 6});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < 6; ++k) s1p.at(r, k) = s1.at(r, k);
  Critic shifted = c;
  shifted.params[shifted.out_b][0] += 3.5;
  CHECK(std::abs(loss(c, s1p, s2, 0.0) - loss(shifted, s1p, s2, 0.0)) < 1e-12);

  auto sc = [&](const Tensor& s) {
    Tape tape;
    Binding p(tape, c.params);
    return critic_score(p, c, tape.constant(s), tape.constant(h)).value().item();
  };
  double dfn = sc(s1p), dtn = sc(s2);
  CHECK(std::abs(loss(c, s1p, s2, 0.0) - (dfn - dtn)) < 1e-12);
  double vanilla = std::log1p(std::exp(dfn)) + std::log1p(std::exp(-dtn));
  CHECK(std::abs(loss(c, s1p, s2, 0.0, true) - vanilla) < 1e-12);
  CHECK(loss(c, s1p, s2, 10.0) >= dfn - dtn);
}

TEST_CASE("critic-only training separates the toy distributions") {
  auto r = run_toy_critic(3, 200);
  CHECK(r.margin > 0.0);
}
