// SPDX-License-Identifier: Apache-2.0
#include "empgan/discriminator.hpp"

#include <algorithm>
#include <cmath>

namespace empgan {

Critic::Critic(CriticKind k, const CriticDims& d, std::mt19937_64& rng) : kind(k), dims(d) {
  if (d.widths.empty() || d.filters == 0 || d.hidden == 0 || d.input == 0)
    throw ConfigError("critic needs positive sizes and at least one kernel width");
  const std::string pre = prefix();
  lstm = LstmCell::create(params, pre + "/lstm", d.input, d.hidden, rng);
  ctx_w = params.add_uniform(pre + "/ctx.W", {3 * d.context, d.hidden}, kInitRange, rng);
  ctx_b = params.add_uniform(pre + "/ctx.b", {d.hidden}, kInitRange, rng);
  for (std::size_t w : d.widths) {
    std::string n = pre + "/conv" + std::to_string(w);
    conv_w.push_back(params.add_uniform(n + ".W", {w * 2 * d.hidden, d.filters}, kInitRange, rng));
    conv_b.push_back(params.add_uniform(n + ".b", {d.filters}, kInitRange, rng));
  }
  proj_w = params.add_uniform(pre + "/proj.W", {d.widths.size() * d.filters, d.hidden}, kInitRange, rng);
  proj_b = params.add_uniform(pre + "/proj.b", {d.hidden}, kInitRange, rng);
  out_w = params.add_uniform(pre + "/out.W", {d.hidden, 1}, kInitRange, rng);
  out_b = params.add_uniform(pre + "/out.b", {1}, kInitRange, rng);
}

Var fuse_context(Binding& p, const Critic& c, const Var& utt, const Var& emo, const Var& lab) {
  for (const Var* v : {&utt, &emo, &lab})
    if (v->shape() != Shape{c.dims.context})
      EMPGAN_THROW(DimensionError, "fuse_context: expected [" << c.dims.context << "] states, got "
                                                              << shape_str(v->shape()));
  return affine(concat({utt, emo, lab}), p(c.ctx_w), p(c.ctx_b));
}

std::pair<CriticSample, CriticSample> build_pair(Binding& p, const Critic& c, const PairInputs& in, const Var& h_dlg,
                                                 bool zero_feedback) {
  Tape& tape = p.tape();
  Var cand = encode_sequence(p, c.lstm, in.candidate, zeros(tape, c.dims.hidden)).states;
  Var gold = encode_sequence(p, c.lstm, in.gold, zeros(tape, c.dims.hidden)).states;
  std::size_t steps = std::max(cand.value().rows(), gold.value().rows());
  Var fb;
  if (zero_feedback) {
    fb = tape.constant(Tensor({steps, c.dims.hidden}));
  } else {
    fb = encode_sequence(p, c.lstm, in.feedback, zeros(tape, c.dims.hidden)).states;
    steps = std::max(steps, fb.value().rows());
    fb = pad_rows(fb, steps);
  }
  CriticSample fn{SampleKind::FN, hconcat({pad_rows(cand, steps), fb}), h_dlg};
  CriticSample tn{SampleKind::TN, hconcat({pad_rows(gold, steps), fb}), h_dlg};
  return {fn, tn};
}

Var critic_score(Binding& p, const Critic& c, const Var& states, const Var& h_dlg, ScoreTrace* trace) {
  if (states.value().rank() != 2 || states.value().cols() != c.sample_width())
    EMPGAN_THROW(DimensionError, "critic_score: sample " << shape_str(states.shape()) << " but critic expects width "
                                                         << c.sample_width());
  if (h_dlg.shape() != Shape{c.dims.hidden})
    EMPGAN_THROW(DimensionError, "critic_score: context " << shape_str(h_dlg.shape()) << " vs width " << c.dims.hidden);
  std::vector<Var> pooled;
  if (trace) {
    trace->conv.assign(c.dims.widths.size(), {});
    trace->argmax.assign(c.dims.widths.size(), {});
    trace->steps = states.value().rows();
  }
  for (std::size_t i = 0; i < c.dims.widths.size(); ++i) {
    Var f = conv_over_time(states, p(c.conv_w[i]), p(c.conv_b[i]), c.dims.widths[i], trace ? &trace->conv[i] : nullptr);
    pooled.push_back(max_pool_over_time(f, trace ? &trace->argmax[i] : nullptr));
  }
  Var pre = add(affine(concat(pooled), p(c.proj_w), p(c.proj_b)), h_dlg);
  if (trace) trace->outer_preact = pre.value();
  return add(matmul(relu(pre), p(c.out_w)), p(c.out_b));
}

Var critic_input_gradient(Binding& p, const Critic& c, const ScoreTrace& trace) {
  const std::size_t hidden = c.dims.hidden, filters = c.dims.filters, width = c.sample_width();
  Tensor outer_mask(trace.outer_preact.shape());
  for (std::size_t i = 0; i < outer_mask.size(); ++i) outer_mask[i] = trace.outer_preact[i] > 0.0 ? 1.0 : 0.0;
  Var u = mask(reshape(p(c.out_w), {hidden}), outer_mask);
  Var g_pooled = matmul(p(c.proj_w), u);
  Var total;
  for (std::size_t i = 0; i < c.dims.widths.size(); ++i) {
    const ConvTrace& ct = trace.conv[i];
    const auto& arg = trace.argmax[i];
    Tensor inner_mask({filters});
    for (std::size_t f = 0; f < filters; ++f) inner_mask[f] = ct.preact.at(arg[f], f) > 0.0 ? 1.0 : 0.0;
    Var a = mask(slice(g_pooled, i * filters, filters), inner_mask);
    Var contrib = conv_backproject(p(c.conv_w[i]), a, arg, ct.width, width, ct.padded_steps, trace.steps);
    total = total.valid() ? add(total, contrib) : contrib;
  }
  return total;
}

Var CriticScoreFunction::input_gradient(Tape& tape, const Tensor& x) {
  if (&tape != &p_->tape()) throw ContractError("CriticScoreFunction: tape differs from the critic binding");
  ScoreTrace trace;
  critic_score(*p_, *c_, tape.constant(x), h_dlg_, &trace);
  return critic_input_gradient(*p_, *c_, trace);
}

Var gradient_penalty(ScoreFunction& critic, Tape& tape, const Tensor& fn, const Tensor& tn, double alpha,
                     const PenaltyOptions& opts, double* grad_norm) {
  if (fn.shape() != tn.shape())
    EMPGAN_THROW(DimensionError, "gradient_penalty: FN " << shape_str(fn.shape()) << " vs TN " << shape_str(tn.shape()));
  Tensor mixed = fn;
  for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = alpha * fn[i] + (1.0 - alpha) * tn[i];
  Var g = critic.input_gradient(tape, mixed);
  auto shortfall = [&](const Var& norm) {
    Var d = add_scalar(norm, -1.0);
    return opts.squared ? square(d) : d;
  };
  Var n = norm2(g);
  if (grad_norm) *grad_norm = n.value().item();
  Var pen;
  if (opts.per_step && g.value().rank() == 2) {
    std::vector<Var> terms;
    for (std::size_t t = 0; t < g.value().rows(); ++t) terms.push_back(reshape(shortfall(norm2(row(g, t))), {1}));
    pen = mean(concat(terms));
  } else {
    pen = shortfall(n);
  }
  return scale(pen, opts.sigma);
}

CriticLoss critic_loss(Binding& p, const Critic& c, const std::vector<CriticPair>& pairs,
                       const std::vector<double>& alphas, const PenaltyOptions& opts, bool vanilla) {
  if (pairs.empty()) throw ContractError("critic_loss: no sample pairs");
  if (!vanilla && alphas.size() != pairs.size()) throw ContractError("critic_loss: one interpolation weight per pair");
  Tape& tape = p.tape();
  CriticLoss out;
  std::vector<Var> terms;
  const double n = static_cast<double>(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pr = pairs[i];
    Var d_fn = critic_score(p, c, pr.fn.states, pr.fn.context);
    Var d_tn = critic_score(p, c, pr.tn.states, pr.tn.context);
    out.mean_fn += d_fn.value().item() / n;
    out.mean_tn += d_tn.value().item() / n;
    if (vanilla) {
      terms.push_back(reshape(add(softplus(d_fn), softplus(scale(d_tn, -1.0))), {1}));
      continue;
    }
    Var term = sub(d_fn, d_tn);
    CriticScoreFunction f(p, c, pr.tn.context);
    double gn = 0.0;
    Var pen = gradient_penalty(f, tape, pr.fn.states.value(), pr.tn.states.value(), alphas[i], opts, &gn);
    out.penalty += pen.value().item() / n;
    out.mean_grad_norm += gn / n;
    terms.push_back(reshape(add(term, reshape(pen, {1})), {1}));
  }
  out.total = mean(concat(terms));
  return out;
}

}  // namespace empgan
