// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures and independent oracles for the unit and acceptance tests.
// Oracles work on plain std::vector data and never call library code.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "empgan/training.hpp"

namespace testkit {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, Mat[r][c]

std::filesystem::path data_path(const std::string& rel);
/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

empgan::Tensor uniform(empgan::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);
empgan::Tensor normal(empgan::Shape shape, std::mt19937_64& rng, double mu, double sd);
double max_abs_diff(const empgan::Tensor& a, const empgan::Tensor& b);

Mat to_mat(const empgan::Tensor& t);
Vec to_vec(const empgan::Tensor& t);

// ---- linear algebra / activations ----
Mat mat_mul(const Mat& a, const Mat& b);
Vec vec_mat(const Vec& x, const Mat& w);
Vec vadd(const Vec& a, const Vec& b);
Vec vmul(const Vec& a, const Vec& b);
double sigm(double x);
Vec vsigm(const Vec& x);
Vec vtanh(const Vec& x);
Vec softmax_oracle(const Vec& x);

// ---- recurrent ----
struct GruWeights {
  Mat wz, wr, wh, uz, ur, uh;
  Vec bz, br, bh;
};
struct LstmWeights {
  Mat w[4], u[4];
  Vec b[4];
};
GruWeights gru_weights(const empgan::ParamSet& ps, const empgan::GruCell& c);
LstmWeights lstm_weights(const empgan::ParamSet& ps, const empgan::LstmCell& c);
Vec gru_oracle(const GruWeights& w, const Vec& x, const Vec& h);
/// Returns (h, c).
std::pair<Vec, Vec> lstm_oracle(const LstmWeights& w, const Vec& x, const Vec& h, const Vec& c);
/// Context rows of the two-level GRU hierarchy.
Mat hierarchy_oracle(const GruWeights& turn, const GruWeights& ctx, const std::vector<Mat>& turns);

// ---- metrics ----
using Sent = std::vector<std::string>;
double bleu_oracle(const std::vector<Sent>& hyps, const std::vector<Sent>& refs, int max_n = 4);
double distinct_oracle(const std::vector<Sent>& hyps, int n);
/// (F, P, R)
std::array<double, 3> rouge_n_oracle(const Sent& hyp, const Sent& ref, int n);
std::array<double, 3> rouge_l_oracle(const Sent& hyp, const Sent& ref);
/// Random sentence over a small alphabet, length in [lo, hi].
Sent random_sentence(std::mt19937_64& rng, std::size_t lo, std::size_t hi, std::size_t alphabet = 6);

// ---- training fixtures ----
struct Fixture {
  empgan::Lexicon lexicon;
  std::vector<empgan::Dialogue> dialogues;
  empgan::Vocabulary vocab, emo_vocab;
  std::vector<empgan::Example> examples;
};
/// Loads a corpus under data/ with the synthetic lexicon.
Fixture load_fixture(const std::string& corpus_rel);

/// Settings that memorise the 8-dialogue fixture.
empgan::TrainConfig overfit_config();
/// Small adversarial configuration for trainer-level tests.
empgan::TrainConfig tiny_adversarial_config(empgan::Variant v);

struct OverfitResult {
  double final_ce = 0.0;
  std::size_t epoch_below = 0;  // first epoch (1-based) with CE < 0.1, 0 if never
  std::size_t exact = 0;
  std::size_t total = 0;
  double seconds = 0.0;
};
OverfitResult run_overfit(std::size_t epochs = 300);

struct ToyCriticResult {
  double margin = 0.0;     // mean D(TN) - D(FN) over the last `window` steps
  double grad_norm = 0.0;  // mean interpolated gradient norm over the same window
  double seconds = 0.0;
};
/// Critic-only training on separable synthetic pairs: candidates ~ N(-0.1, 0.3),
/// gold ~ N(+0.1, 0.3), feedback and contexts ~ N(0, 1).
ToyCriticResult run_toy_critic(std::uint64_t seed, std::size_t steps, double sigma = 10.0, std::size_t window = 50);

}  // namespace testkit
