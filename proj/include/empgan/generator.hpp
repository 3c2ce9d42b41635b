// SPDX-License-Identifier: Apache-2.0
//
// The empathetic generator. A semantic hierarchy (utterance GRU -> context
// GRU) and an emotion-word hierarchy run over the dialogue context; a label
// GRU, started from the last emotion-context state, runs over the per-turn
// emotion label embeddings. The decoder attends over the concatenated
// per-turn states g_i = [utt_i; emo_i; lab_i] and is trained with three
// cross-entropy terms: response tokens, next-utterance emotion words, and
// the response label.
#pragma once

#include <optional>
#include <random>
#include <vector>

#include "empgan/config.hpp"
#include "empgan/corpus.hpp"
#include "empgan/recurrent.hpp"

namespace empgan {

struct GeneratorDims {
  std::size_t vocab = 0;
  std::size_t emo_vocab = 0;
  std::size_t hidden = 400;
  std::size_t embed = 300;
  std::size_t emo_embed = 200;
  std::size_t label_embed = 100;

  static GeneratorDims from_config(const TrainConfig& cfg, std::size_t vocab, std::size_t emo_vocab);
};

/// Weights of every generator component, stored in one ParamSet under the
/// "gen/" prefix.
class Generator {
 public:
  Generator(const GeneratorDims& dims, std::mt19937_64& rng);

  GeneratorDims dims;
  ParamSet params;

  std::size_t word_emb = 0, emo_emb = 0, label_emb = 0;
  GruCell utt, ctx;            // semantic hierarchy
  GruCell emo_turn, emo_ctx;   // emotion-word hierarchy
  GruCell label_rnn;           // coarse-grained label encoder
  GruCell decoder, emo_decoder;
  std::size_t att_z = 0, att_ws = 0, att_wd = 0;
  std::size_t out_wo = 0, out_bo = 0, out_wv = 0, out_bv = 0;
  std::size_t emo_out_w = 0, emo_out_b = 0;
  std::size_t lab_w = 0, lab_b = 0;

  /// Names of parameters belonging to the emotion branches.
  std::vector<std::size_t> emotion_branch_params() const;
};

/// Dropout settings for one forward pass; rate is ignored unless the tape is
/// in training mode.
struct ForwardOptions {
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct ContextBundle {
  Var utt;      // M × H
  Var emo;      // M × H
  Var lab;      // M × H
  Var g;        // M × 3H, row i = [utt_i; emo_i; lab_i]
  Var g_proj;   // M × H, g·W_s reused across decode steps
  std::size_t turns() const { return g.value().rows(); }
  Var utt_final() const;
  Var emo_final() const;
  Var lab_final() const;
};

struct DecoderState {
  Var d;
  std::size_t t = 0;
  int prev_token = Vocabulary::kBos;
};

struct StepOutput {
  DecoderState next;
  Var logits;
  Var probs;
  Var attention;  // β over the M context turns
};

Var semantic_understanding(Binding& p, const Generator& gen, const std::vector<std::vector<int>>& context,
                           const ForwardOptions& fo = {});
std::pair<Var, Var> emotion_perception(Binding& p, const Generator& gen,
                                       const std::vector<std::vector<int>>& emotion_words,
                                       const std::vector<int>& labels);
ContextBundle encode_context(Binding& p, const Generator& gen, const Example& ex, const ForwardOptions& fo = {});
ContextBundle make_bundle(Binding& p, const Generator& gen, const Var& utt, const Var& emo, const Var& lab);

/// β' = z·tanh(W_s g_i + W_d d_t), β = softmax(β'), g_t = Σ β_i g_i.
std::pair<Var, Var> empathetic_attention(Binding& p, const Generator& gen, const ContextBundle& bundle, const Var& d_t);

DecoderState initial_state(const ContextBundle& bundle);
StepOutput decode_step(Binding& p, const Generator& gen, const DecoderState& state, const ContextBundle& bundle,
                       const ForwardOptions& fo = {});

/// Auxiliary GRU decoder over the emotion vocabulary, initialised from the
/// final fine-grained emotion state. Returns Σ_t -log o_t[target_t].
Var emotion_word_loss(Binding& p, const Generator& gen, const Var& emo_final, const std::vector<int>& targets);
/// -log softmax(W_l h + b_l)[target]
Var label_loss(Binding& p, const Generator& gen, const Var& lab_final, int target);

struct GeneratorLoss {
  Var total;
  Var response;      // teacher-forced Σ_t -log o_t
  Var emotion;       // Ψ_emo (absent when emotion losses are off)
  Var label;         // Ψ_lab
  Var adversarial;   // critic term as passed in, before λ_adv
  std::size_t response_tokens = 0;
  double value(const Var& v) const { return v.valid() ? v.value().item() : 0.0; }
};

/// Ψ_g for one example, with teacher forcing. When `adversarial` is given
/// the total also includes lambda_adv · adversarial.
GeneratorLoss generator_loss(Binding& p, const Generator& gen, const Example& ex, const ContextBundle& bundle,
                             const TrainConfig& cfg, const ForwardOptions& fo = {},
                             const std::optional<Var>& adversarial = std::nullopt);
GeneratorLoss generator_loss(Binding& p, const Generator& gen, const Example& ex, const TrainConfig& cfg,
                             const ForwardOptions& fo = {});

enum class DecodeMode { Greedy, Sample };

struct Generation {
  std::vector<int> tokens;  // includes the terminating EOS when one was produced
  std::vector<Var> probs;   // per-step distributions over the generic vocabulary
  /// Σ_y P(y)·e(y) per step (steps × embed).
  Var soft_embeddings;
  /// Response tokens without EOS.
  std::vector<int> words() const;
};

/// Free-running decode on the binding's tape; probabilities stay connected
/// to the generator parameters.
Generation run_decoder(Binding& p, const Generator& gen, const ContextBundle& bundle, std::size_t max_len,
                       DecodeMode mode, std::mt19937_64* rng = nullptr, const ForwardOptions& fo = {});

/// Convenience decode on a private tape (evaluation mode).
std::vector<int> generate(const Generator& gen, const Example& context, std::size_t max_len,
                          DecodeMode mode = DecodeMode::Greedy, std::uint64_t seed = 0);

}  // namespace empgan
