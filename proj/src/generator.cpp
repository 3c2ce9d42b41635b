// SPDX-License-Identifier: Apache-2.0
#include "empgan/generator.hpp"

#include <algorithm>

namespace empgan {

GeneratorDims GeneratorDims::from_config(const TrainConfig& cfg, std::size_t vocab, std::size_t emo_vocab) {
  return {vocab, emo_vocab, cfg.hidden, cfg.embed, cfg.emo_embed, cfg.label_embed};
}

Generator::Generator(const GeneratorDims& d, std::mt19937_64& rng) : dims(d) {
  if (d.vocab <= Vocabulary::kReserved || d.emo_vocab < Vocabulary::kReserved)
    EMPGAN_THROW(ConfigError, "generator needs a generic vocabulary beyond the reserved ids (got " << d.vocab << ")");
  const std::size_t h = d.hidden;
  word_emb = params.add_uniform("gen/emb.word", {d.vocab, d.embed}, kInitRange, rng);
  emo_emb = params.add_uniform("gen/emb.emotion", {d.emo_vocab, d.emo_embed}, kInitRange, rng);
  label_emb = params.add_uniform("gen/emb.label", {static_cast<std::size_t>(kNumLabels), d.label_embed}, kInitRange, rng);
  utt = GruCell::create(params, "gen/utt", d.embed, h, rng);
  ctx = GruCell::create(params, "gen/ctx", h, h, rng);
  emo_turn = GruCell::create(params, "gen/emo_turn", d.emo_embed, h, rng);
  emo_ctx = GruCell::create(params, "gen/emo_ctx", h, h, rng);
  label_rnn = GruCell::create(params, "gen/label_rnn", d.label_embed, h, rng);
  att_z = params.add_uniform("gen/att.z", {h}, kInitRange, rng);
  att_ws = params.add_uniform("gen/att.W_s", {3 * h, h}, kInitRange, rng);
  att_wd = params.add_uniform("gen/att.W_d", {h, h}, kInitRange, rng);
  decoder = GruCell::create(params, "gen/dec", d.embed, h, rng);
  out_wo = params.add_uniform("gen/out.W_o", {4 * h, h}, kInitRange, rng);
  out_bo = params.add_uniform("gen/out.b_o", {h}, kInitRange, rng);
  out_wv = params.add_uniform("gen/out.W_v", {h, d.vocab}, kInitRange, rng);
  out_bv = params.add_uniform("gen/out.b_v", {d.vocab}, kInitRange, rng);
  emo_decoder = GruCell::create(params, "gen/emo_dec", d.emo_embed, h, rng);
  emo_out_w = params.add_uniform("gen/emo_out.W", {h, d.emo_vocab}, kInitRange, rng);
  emo_out_b = params.add_uniform("gen/emo_out.b", {d.emo_vocab}, kInitRange, rng);
  lab_w = params.add_uniform("gen/lab_out.W", {h, static_cast<std::size_t>(kNumLabels)}, kInitRange, rng);
  lab_b = params.add_uniform("gen/lab_out.b", {static_cast<std::size_t>(kNumLabels)}, kInitRange, rng);
}

std::vector<std::size_t> Generator::emotion_branch_params() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& n = params.name(i);
    if (n.starts_with("gen/emb.emotion") || n.starts_with("gen/emb.label") || n.starts_with("gen/emo_turn") ||
        n.starts_with("gen/emo_ctx") || n.starts_with("gen/label_rnn"))
      out.push_back(i);
  }
  return out;
}

namespace {

Var apply_dropout(const Var& x, const ForwardOptions& fo) {
  if (!fo.rng || fo.dropout <= 0.0) return x;
  return dropout(x, fo.dropout, *fo.rng);
}

Var sum_scalars(const std::vector<Var>& xs) {
  std::vector<Var> v;
  v.reserve(xs.size());
  for (const auto& x : xs) v.push_back(reshape(x, {1}));
  return sum(concat(v));
}

void check_ids(const std::vector<int>& ids, std::size_t limit, const char* what) {
  if (ids.empty()) EMPGAN_THROW(ContractError, what << ": empty id sequence");
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= limit)
      EMPGAN_THROW(DataError, what << ": id " << id << " outside vocabulary of size " << limit);
}

}  // namespace

Var ContextBundle::utt_final() const { return row(utt, turns() - 1); }
Var ContextBundle::emo_final() const { return row(emo, turns() - 1); }
Var ContextBundle::lab_final() const { return row(lab, turns() - 1); }

Var semantic_understanding(Binding& p, const Generator& gen, const std::vector<std::vector<int>>& context,
                           const ForwardOptions& fo) {
  if (context.empty()) throw ContractError("semantic_understanding: no context turns");
  std::vector<Var> turns;
  for (const auto& ids : context) {
    check_ids(ids, gen.dims.vocab, "semantic_understanding");
    turns.push_back(apply_dropout(gather_rows(p(gen.word_emb), ids), fo));
  }
  return hierarchical_encode(p, gen.utt, gen.ctx, turns);
}

std::pair<Var, Var> emotion_perception(Binding& p, const Generator& gen,
                                       const std::vector<std::vector<int>>& emotion_words,
                                       const std::vector<int>& labels) {
  if (emotion_words.empty() || emotion_words.size() != labels.size())
    EMPGAN_THROW(ContractError, "emotion_perception: " << emotion_words.size() << " emotion-word sequences for "
                                                       << labels.size() << " labels");
  std::vector<Var> turns;
  for (const auto& ids : emotion_words) {
    check_ids(ids, gen.dims.emo_vocab, "emotion_perception");
    turns.push_back(gather_rows(p(gen.emo_emb), ids));
  }
  Var emo = hierarchical_encode(p, gen.emo_turn, gen.emo_ctx, turns);
  for (int l : labels)
    if (l < 0 || l >= kNumLabels) EMPGAN_THROW(DataError, "emotion label id " << l << " outside 0..6");
  Var label_vecs = gather_rows(p(gen.label_emb), labels);
  Var h = row(emo, labels.size() - 1);
  std::vector<Var> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    h = gru_step(p, gen.label_rnn, row(label_vecs, i), h);
    rows.push_back(h);
  }
  return {emo, stack(rows)};
}

ContextBundle make_bundle(Binding& p, const Generator& gen, const Var& utt, const Var& emo, const Var& lab) {
  if (utt.value().rows() != emo.value().rows() || utt.value().rows() != lab.value().rows())
    EMPGAN_THROW(DimensionError, "context stacks disagree: " << shape_str(utt.shape()) << ", " << shape_str(emo.shape())
                                                             << ", " << shape_str(lab.shape()));
  ContextBundle b{utt, emo, lab, hconcat({utt, emo, lab}), Var()};
  b.g_proj = matmul(b.g, p(gen.att_ws));
  return b;
}

ContextBundle encode_context(Binding& p, const Generator& gen, const Example& ex, const ForwardOptions& fo) {
  Var utt = semantic_understanding(p, gen, ex.context, fo);
  auto [emo, lab] = emotion_perception(p, gen, ex.context_emotion, ex.labels);
  return make_bundle(p, gen, utt, emo, lab);
}

std::pair<Var, Var> empathetic_attention(Binding& p, const Generator& gen, const ContextBundle& bundle,
                                         const Var& d_t) {
  Var hidden = tanh(add_rows(bundle.g_proj, matmul(d_t, p(gen.att_wd))));
  Var beta = softmax(matmul(hidden, p(gen.att_z)));
  Var g_t = matmul(beta, bundle.g);
  return {g_t, beta};
}

DecoderState initial_state(const ContextBundle& bundle) { return DecoderState{bundle.utt_final(), 0, Vocabulary::kBos}; }

StepOutput decode_step(Binding& p, const Generator& gen, const DecoderState& state, const ContextBundle& bundle,
                       const ForwardOptions& fo) {
  if (state.prev_token < 0 || static_cast<std::size_t>(state.prev_token) >= gen.dims.vocab)
    EMPGAN_THROW(DataError, "decode_step: previous token " << state.prev_token << " outside vocabulary");
  int prev = state.prev_token;
  Var x = apply_dropout(reshape(gather_rows(p(gen.word_emb), std::span<const int>(&prev, 1)), {gen.dims.embed}), fo);
  Var d = gru_step(p, gen.decoder, x, state.d);
  auto [g_t, beta] = empathetic_attention(p, gen, bundle, d);
  Var d_o = apply_dropout(affine(concat({d, g_t}), p(gen.out_wo), p(gen.out_bo)), fo);
  Var logits = affine(d_o, p(gen.out_wv), p(gen.out_bv));
  StepOutput out;
  out.next = DecoderState{d, state.t + 1, state.prev_token};
  out.logits = logits;
  out.probs = softmax(logits);
  out.attention = beta;
  return out;
}

Var emotion_word_loss(Binding& p, const Generator& gen, const Var& emo_final, const std::vector<int>& targets) {
  check_ids(targets, gen.dims.emo_vocab, "emotion_word_loss");
  std::vector<int> inputs;
  inputs.push_back(Vocabulary::kBos);
  inputs.insert(inputs.end(), targets.begin(), targets.end() - 1);
  Var in = gather_rows(p(gen.emo_emb), inputs);
  Var h = emo_final;
  std::vector<Var> terms;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    h = gru_step(p, gen.emo_decoder, row(in, t), h);
    terms.push_back(cross_entropy(affine(h, p(gen.emo_out_w), p(gen.emo_out_b)), static_cast<std::size_t>(targets[t])));
  }
  return sum_scalars(terms);
}

Var label_loss(Binding& p, const Generator& gen, const Var& lab_final, int target) {
  if (target < 0 || target >= kNumLabels) EMPGAN_THROW(DataError, "label_loss: label id " << target << " outside 0..6");
  return cross_entropy(affine(lab_final, p(gen.lab_w), p(gen.lab_b)), static_cast<std::size_t>(target));
}

GeneratorLoss generator_loss(Binding& p, const Generator& gen, const Example& ex, const ContextBundle& bundle,
                             const TrainConfig& cfg, const ForwardOptions& fo, const std::optional<Var>& adversarial) {
  if (ex.target.size() < 2) throw ContractError("generator_loss: target needs BOS and EOS");
  GeneratorLoss out;
  DecoderState state = initial_state(bundle);
  std::vector<Var> terms;
  for (std::size_t t = 0; t + 1 < ex.target.size(); ++t) {
    state.prev_token = ex.target[t];
    StepOutput step = decode_step(p, gen, state, bundle, fo);
    int gold = ex.target[t + 1];
    if (gold < 0 || static_cast<std::size_t>(gold) >= gen.dims.vocab)
      EMPGAN_THROW(DataError, "generator_loss: target id " << gold << " outside vocabulary");
    terms.push_back(cross_entropy(step.logits, static_cast<std::size_t>(gold)));
    state = step.next;
  }
  out.response_tokens = terms.size();
  out.response = sum_scalars(terms);
  std::vector<Var> parts{out.response};
  if (cfg.emotion_losses) {
    const auto& emo_targets = cfg.emo_target == EmotionWordTarget::Response ? ex.target_emotion : ex.feedback_emotion;
    int label_target = cfg.label_target == LabelTarget::Response ? ex.target_label : ex.labels.back();
    out.emotion = emotion_word_loss(p, gen, bundle.emo_final(), emo_targets);
    out.label = label_loss(p, gen, bundle.lab_final(), label_target);
    parts.push_back(out.emotion);
    parts.push_back(out.label);
  }
  if (adversarial) {
    out.adversarial = *adversarial;
    parts.push_back(scale(*adversarial, cfg.lambda_adv));
  }
  out.total = sum_scalars(parts);
  return out;
}

GeneratorLoss generator_loss(Binding& p, const Generator& gen, const Example& ex, const TrainConfig& cfg,
                             const ForwardOptions& fo) {
  ContextBundle bundle = encode_context(p, gen, ex, fo);
  return generator_loss(p, gen, ex, bundle, cfg, fo);
}

std::vector<int> Generation::words() const {
  std::vector<int> out = tokens;
  if (!out.empty() && out.back() == Vocabulary::kEos) out.pop_back();
  return out;
}

Generation run_decoder(Binding& p, const Generator& gen, const ContextBundle& bundle, std::size_t max_len,
                       DecodeMode mode, std::mt19937_64* rng, const ForwardOptions& fo) {
  if (max_len == 0) throw ContractError("run_decoder: max_len must be at least 1");
  if (mode == DecodeMode::Sample && !rng) throw ContractError("run_decoder: sampling needs an rng");
  Generation out;
  DecoderState state = initial_state(bundle);
  for (std::size_t t = 0; t < max_len; ++t) {
    StepOutput step = decode_step(p, gen, state, bundle, fo);
    const Tensor& pr = step.probs.value();
    int next = 0;
    if (mode == DecodeMode::Greedy) {
      next = static_cast<int>(std::max_element(pr.storage().begin(), pr.storage().end()) - pr.storage().begin());
    } else {
      // inverse-CDF draw on a 53-bit uniform so results do not depend on the
      // standard library's distribution implementations
      double u = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
      double acc = 0.0;
      next = static_cast<int>(pr.size() - 1);
      for (std::size_t i = 0; i < pr.size(); ++i) {
        acc += pr[i];
        if (u < acc) {
          next = static_cast<int>(i);
          break;
        }
      }
    }
    out.tokens.push_back(next);
    out.probs.push_back(step.probs);
    state = step.next;
    state.prev_token = next;
    if (next == Vocabulary::kEos) break;
  }
  out.soft_embeddings = matmul(stack(out.probs), p(gen.word_emb));
  return out;
}

std::vector<int> generate(const Generator& gen, const Example& context, std::size_t max_len, DecodeMode mode,
                          std::uint64_t seed) {
  Tape tape;
  Binding p(tape, gen.params, false);
  std::mt19937_64 rng(seed);
  ContextBundle bundle = encode_context(p, gen, context);
  return run_decoder(p, gen, bundle, max_len, mode, &rng).tokens;
}

}  // namespace empgan
