// SPDX-License-Identifier: Apache-2.0
//
// Interactive critics. A response LSTM encodes the candidate (generated or
// gold) response and the user's feedback; their per-step states are
// concatenated row-wise, convolved over time with several kernel widths,
// max-pooled, projected, and combined with the fused dialogue context:
//
//   D(x) = W_D · relu(P·F(x) + b_P + h_dlg) + b_D
//
// The score is unbounded (Wasserstein critic). Because every piece after the
// LSTM is piecewise linear in x, ∇_x D is rebuilt on the tape with the
// activation pattern frozen, which makes the gradient penalty differentiable
// in the critic weights.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "empgan/config.hpp"
#include "empgan/recurrent.hpp"

namespace empgan {

enum class CriticKind { Semantic, Emotional };

struct CriticDims {
  std::size_t input = 0;    // width of embedded input sequences
  std::size_t hidden = 0;   // LSTM width and h_dlg width
  std::size_t context = 0;  // width of each generator context state
  std::vector<std::size_t> widths = {2, 3, 4};
  std::size_t filters = 100;
};

class Critic {
 public:
  Critic(CriticKind kind, const CriticDims& dims, std::mt19937_64& rng);

  CriticKind kind;
  CriticDims dims;
  ParamSet params;
  LstmCell lstm;
  std::size_t ctx_w = 0, ctx_b = 0;
  std::vector<std::size_t> conv_w, conv_b;
  std::size_t proj_w = 0, proj_b = 0;
  std::size_t out_w = 0, out_b = 0;

  std::string prefix() const { return kind == CriticKind::Semantic ? "sem" : "emo"; }
  /// Width of a sample row: candidate state plus feedback state.
  std::size_t sample_width() const { return 2 * dims.hidden; }
};

enum class SampleKind { FN, TN };

struct CriticSample {
  SampleKind kind = SampleKind::FN;
  Var states;   // T × 2·hidden
  Var context;  // h_dlg
};

/// h_dlg = [utt; emo; lab]·W + b
Var fuse_context(Binding& p, const Critic& c, const Var& utt, const Var& emo, const Var& lab);

struct PairInputs {
  Var candidate;  // T_c × input, hard or soft embeddings
  Var gold;       // T_g × input
  Var feedback;   // T_n × input
};

/// Encodes candidate, gold and feedback, zero-pads every state sequence to
/// the longest, and concatenates [candidate; feedback] and [gold; feedback].
/// With `zero_feedback` the feedback half is zeros.
std::pair<CriticSample, CriticSample> build_pair(Binding& p, const Critic& c, const PairInputs& in, const Var& h_dlg,
                                                 bool zero_feedback = false);

/// Activation pattern of one forward pass, enough to rebuild ∇_x D.
struct ScoreTrace {
  std::vector<ConvTrace> conv;
  std::vector<std::vector<std::size_t>> argmax;
  Tensor outer_preact;  // P·F + b_P + h_dlg
  std::size_t steps = 0;
};

Var critic_score(Binding& p, const Critic& c, const Var& states, const Var& h_dlg, ScoreTrace* trace = nullptr);

/// ∇_x D at the traced point as a differentiable function of the critic's
/// conv, projection and output weights.
Var critic_input_gradient(Binding& p, const Critic& c, const ScoreTrace& trace);

/// Anything that can report a differentiable input gradient at a point.
class ScoreFunction {
 public:
  virtual ~ScoreFunction() = default;
  virtual Var input_gradient(Tape& tape, const Tensor& x) = 0;
};

/// Adapts a Critic (with a fixed h_dlg) to ScoreFunction.
class CriticScoreFunction : public ScoreFunction {
 public:
  CriticScoreFunction(Binding& p, const Critic& c, const Var& h_dlg) : p_(&p), c_(&c), h_dlg_(h_dlg) {}
  Var input_gradient(Tape& tape, const Tensor& x) override;

 private:
  Binding* p_;
  const Critic* c_;
  Var h_dlg_;
};

struct PenaltyOptions {
  double sigma = 10.0;
  bool squared = true;
  bool per_step = false;
};

/// x' = α·fn + (1−α)·tn; σ·(‖∇_{x'} D(x')‖₂ − 1)² (or per-row norms averaged
/// over time when per_step). `grad_norm`, when given, receives ‖∇‖.
Var gradient_penalty(ScoreFunction& critic, Tape& tape, const Tensor& fn, const Tensor& tn, double alpha,
                     const PenaltyOptions& opts, double* grad_norm = nullptr);

struct CriticPair {
  CriticSample fn, tn;
};

struct CriticLoss {
  Var total;
  double mean_fn = 0.0, mean_tn = 0.0;
  double penalty = 0.0;
  double mean_grad_norm = 0.0;
  double margin() const { return mean_tn - mean_fn; }
};

/// Wasserstein: mean_i D(FN_i) − D(TN_i) + mean_i penalty_i.
/// Vanilla: mean_i softplus(D(FN_i)) + softplus(−D(TN_i)) with no penalty.
CriticLoss critic_loss(Binding& p, const Critic& c, const std::vector<CriticPair>& pairs,
                       const std::vector<double>& alphas, const PenaltyOptions& opts, bool vanilla = false);

}  // namespace empgan
