// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "empgan/error.hpp"
#include "empgan/metrics.hpp"
#include "testkit.hpp"

using namespace empgan;
using namespace testkit;

namespace {

Sentence s(const std::string& text) { return tokenize(text); }

void check_prf(const Prf& got, const std::array<double, 3>& want, double tol) {
  CHECK(std::abs(got.f - want[0]) <= tol);
  CHECK(std::abs(got.p - want[1]) <= tol);
  CHECK(std::abs(got.r - want[2]) <= tol);
}

}  // namespace

TEST_CASE("bleu") {
  CHECK(bleu({s("the cat sat on the mat")}, {s("the cat sat on the mat")}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bleu({Sentence{}}, {s("the cat")}) == 0.0);
  double got = bleu({s("the cat")}, {s("the cat sat")});
  CHECK(std::abs(got - bleu_oracle({s("the cat")}, {s("the cat sat")})) < 1e-9);
  // hand value: p1 = 1, p2 = (1+1)/(1+1), p3 = p4 = 1/1, BP = exp(1 - 3/2)
  CHECK(std::abs(got - std::exp(-0.5)) < 1e-12);
  CHECK_THROWS_AS(bleu({s("a")}, {}), ContractError);
}

TEST_CASE("distinct_n") {
  CHECK(distinct_n({s("a b c")}, 1) == 1.0);
  CHECK(std::abs(distinct_n({s("a a b")}, 1) - 2.0 / 3.0) < 1e-15);
  CHECK(distinct_n({s("a")}, 2) == 0.0);
  CHECK(distinct_n({s("a b"), s("a b")}, 2) == 0.5);
}

TEST_CASE("rouge") {
  check_prf(rouge_n(s("a b c"), s("a b c"), 1), {1, 1, 1}, 0.0);
  check_prf(rouge_n(s("a b c"), s("a b c"), 2), {1, 1, 1}, 0.0);
  check_prf(rouge_n(s("a b"), s("c d"), 1), {0, 0, 0}, 0.0);
  Prf l = rouge_l(s("a b c d"), s("a c d"));
  CHECK(l.f == 6.0 / 7.0);
  CHECK(l.p == 0.75);
  CHECK(l.r == 1.0);
  check_prf(rouge_l(s("x y"), s("x y")), {1, 1, 1}, 0.0);
  check_prf(rouge_l(Sentence{}, s("x y")), {0, 0, 0}, 0.0);
}

TEST_CASE("random pairs against brute-force oracles") {
  std::mt19937_64 rng(61);
  std::vector<Sentence> hyps, refs;
  for (int i = 0; i < 50; ++i) {
    hyps.push_back(random_sentence(rng, 0, 9));
    refs.push_back(random_sentence(rng, 1, 9));
    check_prf(rouge_n(hyps.back(), refs.back(), 1), rouge_n_oracle(hyps.back(), refs.back(), 1), 0.0);
    check_prf(rouge_n(hyps.back(), refs.back(), 2), rouge_n_oracle(hyps.back(), refs.back(), 2), 0.0);
    check_prf(rouge_l(hyps.back(), refs.back()), rouge_l_oracle(hyps.back(), refs.back()), 0.0);
  }
  CHECK(std::abs(bleu(hyps, refs) - bleu_oracle(hyps, refs)) < 1e-9);
  CHECK(std::abs(distinct_n(hyps, 1) - distinct_oracle(hyps, 1)) < 1e-12);
  CHECK(std::abs(distinct_n(hyps, 2) - distinct_oracle(hyps, 2)) < 1e-12);
}

TEST_CASE("report format") {
  EvalReport r;
  r.bleu = 0.1266;
  r.distinct1 = 0.0767;
  std::string t = format_report(r, "EmpGAN");
  CHECK(t.rfind("Model\tBLEU\tD-1\tD-2\tROUGE-1 F", 0) == 0);
  CHECK(t.find("EmpGAN\t12.66\t7.67\t0.00") != std::string::npos);
  auto lines = std::count(t.begin(), t.end(), '\n');
  CHECK(lines == 2);
  auto cols = std::count(t.begin(), t.begin() + static_cast<long>(t.find('\n')), '\t');
  CHECK(cols == 12);
}
