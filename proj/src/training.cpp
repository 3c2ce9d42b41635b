// SPDX-License-Identifier: Apache-2.0
#include "empgan/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "empgan/error.hpp"

namespace empgan {

namespace {

const char* kOptPrefix = "__opt__/";
const char* kStatePrefix = "__state__/";

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor embed_rows(const Tensor& table, const std::vector<int>& ids) {
  const std::size_t w = table.cols();
  Tensor out({ids.size(), w});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto src = table.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::vector<int> without_bos(const std::vector<int>& target) {
  return std::vector<int>(target.begin() + 1, target.end());
}

Var as_row(const Var& v) { return reshape(v, {1}); }

void save_adam(NamedTensors& out, const std::string& group, const ParamSet& ps, const AdamState& st) {
  for (std::size_t i = 0; i < ps.size(); ++i) {
    out.emplace_back(std::string(kOptPrefix) + "m/" + ps.name(i), st.m[i]);
    out.emplace_back(std::string(kOptPrefix) + "v/" + ps.name(i), st.v[i]);
  }
  out.emplace_back(std::string(kOptPrefix) + "t/" + group, Tensor::scalar(static_cast<double>(st.t)));
}

}  // namespace

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do r = rng();
    while (r >= limit);
    std::swap(order[i - 1], order[r % bound]);
  }
  return order;
}

// ---- Adam -----------------------------------------------------------------

AdamState AdamState::for_params(const ParamSet& ps) {
  AdamState st;
  for (const auto& t : ps.values()) {
    st.m.push_back(Tensor::zeros_like(t));
    st.v.push_back(Tensor::zeros_like(t));
  }
  return st;
}

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t t, const AdamHyper& h) {
  if (grad.shape() != param.shape() || m.shape() != param.shape() || v.shape() != param.shape())
    EMPGAN_THROW(DimensionError, "adam_update: parameter " << shape_str(param.shape()) << ", gradient "
                                                           << shape_str(grad.shape()));
  if (t == 0) throw ContractError("adam_update: step counter starts at 1");
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * grad[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
    const double mh = m[i] / c1, vh = v[i] / c2;
    param[i] -= h.lr * mh / (std::sqrt(vh) + h.eps);
  }
}

void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state, const AdamHyper& h) {
  if (grads.size() != params.size() || state.m.size() != params.size())
    EMPGAN_THROW(ContractError, "adam_step: " << grads.size() << " gradients for " << params.size() << " parameters");
  ++state.t;
  for (std::size_t i = 0; i < params.size(); ++i) adam_update(params[i], grads[i], state.m[i], state.v[i], state.t, h);
}

// ---- logging ----------------------------------------------------------------

std::string log_header() {
  return "step\tepoch\tphase\ttotal\tresponse\temotion\tlabel\tadversarial\tper_token_ce\tsem_loss\temo_loss\t"
         "sem_margin\temo_margin\tsem_grad_norm\temo_grad_norm\twall_s";
}

std::string log_line(const StepRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu\t%zu\t%s\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.3f",
                static_cast<unsigned long long>(r.step), r.epoch, r.phase == Phase::Mle ? "mle" : "adv", r.total,
                r.response, r.emotion, r.label, r.adversarial, r.per_token_ce, r.sem_loss, r.emo_loss, r.sem_margin,
                r.emo_margin, r.sem_grad_norm, r.emo_grad_norm, r.wall_seconds);
  return buf;
}

// ---- Trainer ----------------------------------------------------------------

Trainer::Trainer(TrainConfig cfg, Vocabulary vocab, Vocabulary emo_vocab, Lexicon lexicon, std::vector<Example> train)
    : cfg_(std::move(cfg)),
      vocab_(std::move(vocab)),
      emo_vocab_(std::move(emo_vocab)),
      lexicon_(std::move(lexicon)),
      train_(std::move(train)) {
  cfg_.validate();
  if (train_.empty()) throw DataError("training needs at least one example");
  emo_map_ = emotion_id_map(vocab_, emo_vocab_, lexicon_);
  std::mt19937_64 rng(cfg_.seed);
  gen_ = std::make_unique<Generator>(GeneratorDims::from_config(cfg_, vocab_.size(), emo_vocab_.size()), rng);
  gen_opt_ = AdamState::for_params(gen_->params);
  if (!cfg_.ablation.emp_g_only) {
    CriticDims d;
    d.hidden = cfg_.hidden;
    d.context = cfg_.hidden;
    d.widths = cfg_.conv_widths;
    d.filters = cfg_.conv_filters;
    d.input = cfg_.embed;
    sem_ = std::make_unique<Critic>(CriticKind::Semantic, d, rng);
    sem_opt_ = AdamState::for_params(sem_->params);
    if (!cfg_.ablation.no_emo_critic) {
      d.input = cfg_.emo_embed;
      emo_ = std::make_unique<Critic>(CriticKind::Emotional, d, rng);
      emo_opt_ = AdamState::for_params(emo_->params);
    }
  }
}

std::size_t Trainer::steps_per_epoch() const { return (train_.size() + cfg_.batch - 1) / cfg_.batch; }

bool Trainer::adversarial_phase(std::size_t epoch) const {
  return !cfg_.ablation.emp_g_only && epoch >= cfg_.pretrain_epochs;
}

std::mt19937_64 Trainer::rng_for_step(std::uint64_t step, std::uint64_t stream) const {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<const Example*> Trainer::batch_for_step(std::uint64_t step) const {
  const std::size_t spe = steps_per_epoch();
  const std::uint64_t epoch = step / spe;
  const std::size_t pos = static_cast<std::size_t>(step % spe);
  auto order = seeded_permutation(train_.size(), splitmix64(cfg_.seed ^ splitmix64(epoch)));
  std::vector<const Example*> batch;
  for (std::size_t i = pos * cfg_.batch; i < std::min(train_.size(), (pos + 1) * cfg_.batch); ++i)
    batch.push_back(&train_[order[i]]);
  return batch;
}

ForwardOptions Trainer::forward_options(std::mt19937_64& rng) const { return {cfg_.dropout, &rng}; }

void Trainer::check_finite(double v, const char* component) const {
  if (!std::isfinite(v))
    EMPGAN_THROW(DivergenceError, component << " is " << v << " at step " << step_);
}

StepRecord Trainer::step() {
  auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t s = step_;
  const std::size_t epoch = static_cast<std::size_t>(s / steps_per_epoch());
  auto batch = batch_for_step(s);
  auto rng = rng_for_step(s);
  StepRecord r = adversarial_phase(epoch) ? adversarial_step(batch, rng) : mle_step(batch, rng);
  r.step = s;
  r.epoch = epoch;
  ++step_;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (log) *log << log_line(r) << '\n';
  return r;
}

std::vector<StepRecord> Trainer::run_epoch() {
  std::vector<StepRecord> out;
  const std::size_t e = current_epoch();
  while (current_epoch() == e) out.push_back(step());
  return out;
}

StepRecord Trainer::mle_step(const std::vector<const Example*>& batch, std::mt19937_64& rng) {
  if (batch.empty()) throw ContractError("mle_step: empty batch");
  Tape tape;
  tape.training = true;
  Binding gp(tape, gen_->params);
  ForwardOptions fo = forward_options(rng);
  StepRecord r;
  const double n = static_cast<double>(batch.size());
  std::vector<Var> terms;
  std::size_t tokens = 0;
  double response_sum = 0.0;
  for (const Example* ex : batch) {
    GeneratorLoss l = generator_loss(gp, *gen_, *ex, cfg_, fo);
    terms.push_back(as_row(l.total));
    response_sum += l.value(l.response);
    r.emotion += l.value(l.emotion) / n;
    r.label += l.value(l.label) / n;
    tokens += l.response_tokens;
  }
  Var loss = mean(concat(terms));
  r.total = loss.value().item();
  r.response = response_sum / n;
  r.per_token_ce = tokens ? response_sum / static_cast<double>(tokens) : 0.0;
  check_finite(r.response, "generator response cross-entropy");
  check_finite(r.emotion, "generator emotion-word loss");
  check_finite(r.label, "generator label loss");
  auto grads = gp.gradients(tape.backward(loss));
  check_finite(global_norm(grads), "generator gradient");
  clip_global_norm(grads, cfg_.clip_norm);
  adam_step(gen_->params, grads, gen_opt_, AdamHyper::from_config(cfg_));
  return r;
}

std::vector<int> Trainer::emotion_ids_of(const std::vector<int>& generated) const {
  std::vector<int> ids;
  for (int t : generated)
    if (emo_map_[static_cast<std::size_t>(t)] >= 0) ids.push_back(emo_map_[static_cast<std::size_t>(t)]);
  if (ids.empty()) ids.push_back(Vocabulary::kUnk);
  return ids;
}

Trainer::CriticInputs Trainer::semantic_inputs(const Example& ex, const std::vector<int>& generated) const {
  const Tensor& e = gen_->params[gen_->word_emb];
  return {embed_rows(e, generated), embed_rows(e, without_bos(ex.target)), embed_rows(e, ex.feedback)};
}

Trainer::CriticInputs Trainer::emotional_inputs(const Example& ex, const std::vector<int>& generated) const {
  const Tensor& e = gen_->params[gen_->emo_emb];
  return {embed_rows(e, emotion_ids_of(generated)), embed_rows(e, ex.target_emotion),
          embed_rows(e, ex.feedback_emotion)};
}

void Trainer::rollout(const std::vector<const Example*>& batch, std::vector<std::vector<int>>& generated,
                      std::vector<ContextFinals>& finals) const {
  generated.clear();
  finals.clear();
  for (const Example* ex : batch) {
    Tape tape;
    Binding p(tape, gen_->params, false);
    ContextBundle b = encode_context(p, *gen_, *ex);
    Generation g = run_decoder(p, *gen_, b, cfg_.max_len, DecodeMode::Greedy);
    generated.push_back(g.tokens);
    finals.push_back({b.utt_final().value(), b.emo_final().value(), b.lab_final().value()});
  }
}

CriticLoss Trainer::critic_objective(Binding& p, const Critic& c, const std::vector<CriticInputs>& inputs,
                                     const std::vector<ContextFinals>& finals, std::mt19937_64& rng,
                                     std::vector<Var>* feedback_leaves) const {
  Tape& tape = p.tape();
  std::vector<CriticPair> pairs;
  std::vector<double> alphas;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Var fb = feedback_leaves ? tape.leaf(inputs[i].feedback) : tape.constant(inputs[i].feedback);
    if (feedback_leaves) feedback_leaves->push_back(fb);
    Var h = fuse_context(p, c, tape.constant(finals[i].utt), tape.constant(finals[i].emo),
                         tape.constant(finals[i].lab));
    auto [fn, tn] = build_pair(p, c, {tape.constant(inputs[i].cand), tape.constant(inputs[i].gold), fb}, h,
                               cfg_.ablation.no_feedback);
    pairs.push_back({fn, tn});
    alphas.push_back(uniform01(rng));
  }
  PenaltyOptions po{cfg_.sigma, cfg_.gp_squared, cfg_.gp_per_step};
  return critic_loss(p, c, pairs, alphas, po, cfg_.ablation.vanilla_gan);
}

double Trainer::update_critic(Critic& c, AdamState& st, const std::vector<CriticInputs>& inputs,
                              const std::vector<ContextFinals>& finals, std::mt19937_64& rng, CriticLoss* out) {
  Tape tape;
  tape.training = true;
  Binding p(tape, c.params);
  CriticLoss l = critic_objective(p, c, inputs, finals, rng);
  const std::string what = c.prefix() + " critic loss";
  check_finite(l.total.value().item(), what.c_str());
  auto grads = p.gradients(tape.backward(l.total));
  const std::string gwhat = c.prefix() + " critic gradient";
  check_finite(global_norm(grads), gwhat.c_str());
  clip_global_norm(grads, cfg_.clip_norm);
  adam_step(c.params, grads, st, AdamHyper::from_config(cfg_));
  if (out) *out = l;
  return l.total.value().item();
}

Var Trainer::adversarial_term(Binding& gp, Binding* sem_p, Binding* emo_p, const Example& ex,
                              const ContextBundle& bundle, const ForwardOptions& fo) const {
  Tape& tape = gp.tape();
  Generation g = run_decoder(gp, *gen_, bundle, cfg_.max_len, DecodeMode::Greedy, nullptr, fo);
  // The critic sees the dialogue context as fixed; only the response carries gradient.
  Var utt = tape.constant(bundle.utt_final().value());
  Var emo = tape.constant(bundle.emo_final().value());
  Var lab = tape.constant(bundle.lab_final().value());
  auto score = [&](Binding& cp, const Critic& c, const Var& cand, const Tensor& gold, const Tensor& fb) {
    Var h = fuse_context(cp, c, utt, emo, lab);
    auto pair = build_pair(cp, c, {cand, tape.constant(gold), tape.constant(fb)}, h, cfg_.ablation.no_feedback);
    Var d = critic_score(cp, c, pair.first.states, pair.first.context);
    return cfg_.ablation.vanilla_gan ? softplus(scale(d, -1.0)) : scale(d, -1.0);
  };
  const auto& tokens = g.tokens;
  Var adv = score(*sem_p, *sem_, g.soft_embeddings, semantic_inputs(ex, tokens).gold, semantic_inputs(ex, tokens).feedback);
  if (emo_p) {
    std::vector<int> soft_map(emo_map_.size());
    for (std::size_t i = 0; i < emo_map_.size(); ++i) soft_map[i] = emo_map_[i] >= 0 ? emo_map_[i] : Vocabulary::kUnk;
    Var cand = matmul(stack(g.probs), gather_rows(gp(gen_->emo_emb), soft_map));
    auto ei = emotional_inputs(ex, tokens);
    adv = add(adv, score(*emo_p, *emo_, cand, ei.gold, ei.feedback));
  }
  return reshape(adv, {});
}

StepRecord Trainer::adversarial_step(const std::vector<const Example*>& batch, std::mt19937_64& rng) {
  if (batch.empty()) throw ContractError("adversarial_step: empty batch");
  if (!sem_) return mle_step(batch, rng);
  StepRecord r;
  r.phase = Phase::Adversarial;

  // (a) critic updates on greedy generations vs gold
  std::vector<std::vector<int>> generated;
  std::vector<ContextFinals> finals;
  rollout(batch, generated, finals);
  std::vector<CriticInputs> sem_in, emo_in;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    sem_in.push_back(semantic_inputs(*batch[i], generated[i]));
    if (emo_) emo_in.push_back(emotional_inputs(*batch[i], generated[i]));
  }
  for (std::size_t k = 0; k < cfg_.n_critic; ++k) {
    CriticLoss l;
    r.sem_loss = update_critic(*sem_, sem_opt_, sem_in, finals, rng, &l);
    r.sem_margin = l.margin();
    r.sem_grad_norm = l.mean_grad_norm;
    if (emo_) {
      r.emo_loss = update_critic(*emo_, emo_opt_, emo_in, finals, rng, &l);
      r.emo_margin = l.margin();
      r.emo_grad_norm = l.mean_grad_norm;
    }
  }

  // (b) generator update on Ψ_g + λ·adversarial
  {
    Tape tape;
    tape.training = true;
    Binding gp(tape, gen_->params);
    Binding sp(tape, sem_->params, false);
    std::optional<Binding> ep;
    if (emo_) ep.emplace(tape, emo_->params, false);
    ForwardOptions fo = forward_options(rng);
    const double n = static_cast<double>(batch.size());
    std::vector<Var> terms;
    for (const Example* ex : batch) {
      ContextBundle b = encode_context(gp, *gen_, *ex, fo);
      Var adv = adversarial_term(gp, &sp, ep ? &*ep : nullptr, *ex, b, fo);
      GeneratorLoss l = generator_loss(gp, *gen_, *ex, b, cfg_, fo, adv);
      terms.push_back(as_row(l.total));
      r.adversarial += adv.value().item() / n;
    }
    Var loss = mean(concat(terms));
    r.total = loss.value().item();
    check_finite(r.adversarial, "adversarial generator term");
    check_finite(r.total, "generator adversarial loss");
    auto grads = gp.gradients(tape.backward(loss));
    check_finite(global_norm(grads), "generator adversarial gradient");
    clip_global_norm(grads, cfg_.clip_norm);
    adam_step(gen_->params, grads, gen_opt_, AdamHyper::from_config(cfg_));
  }

  // (c) teacher-forced MLE update
  if (adv_steps_ % cfg_.tf_every == 0) {
    StepRecord m = mle_step(batch, rng);
    r.response = m.response;
    r.emotion = m.emotion;
    r.label = m.label;
    r.per_token_ce = m.per_token_ce;
  }
  ++adv_steps_;
  return r;
}

double Trainer::per_token_ce(const std::vector<Example>& examples) const {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : examples) {
    Tape tape;
    Binding p(tape, gen_->params, false);
    GeneratorLoss l = generator_loss(p, *gen_, ex, cfg_);
    total += l.value(l.response);
    tokens += l.response_tokens;
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

TermProbe Trainer::probe_terms(const std::vector<const Example*>& batch) {
  if (batch.empty()) throw ContractError("probe_terms: empty batch");
  TermProbe out;
  out.sem_vanilla = cfg_.ablation.vanilla_gan;
  auto rng = rng_for_step(step_, 7);
  const ForwardOptions fo{0.0, &rng};
  {
    Tape tape;
    Binding gp(tape, gen_->params);
    std::vector<Var> terms;
    for (const Example* ex : batch) terms.push_back(as_row(generator_loss(gp, *gen_, *ex, cfg_, fo).total));
    out.mle_grad_norm = global_norm(gp.gradients(tape.backward(mean(concat(terms)))));
  }
  if (!sem_) return out;
  {
    Tape tape;
    Binding gp(tape, gen_->params);
    Binding sp(tape, sem_->params, false);
    std::optional<Binding> ep;
    if (emo_) ep.emplace(tape, emo_->params, false);
    std::vector<Var> terms;
    for (const Example* ex : batch) {
      ContextBundle b = encode_context(gp, *gen_, *ex, fo);
      terms.push_back(as_row(scale(adversarial_term(gp, &sp, ep ? &*ep : nullptr, *ex, b, fo), cfg_.lambda_adv)));
    }
    out.adversarial_grad_norm = global_norm(gp.gradients(tape.backward(mean(concat(terms)))));
  }
  std::vector<std::vector<int>> generated;
  std::vector<ContextFinals> finals;
  rollout(batch, generated, finals);
  {
    std::vector<CriticInputs> in;
    for (std::size_t i = 0; i < batch.size(); ++i) in.push_back(semantic_inputs(*batch[i], generated[i]));
    Tape tape;
    Binding p(tape, sem_->params);
    std::vector<Var> fb;
    CriticLoss l = critic_objective(p, *sem_, in, finals, rng, &fb);
    GradientMap g = tape.backward(l.total);
    out.sem_critic_grad_norm = global_norm(p.gradients(g));
    std::vector<Tensor> fg;
    for (const Var& v : fb) fg.push_back(g.get(v));
    out.sem_feedback_grad_norm = global_norm(fg);
    out.sem_penalty = l.penalty;
  }
  if (emo_) {
    std::vector<CriticInputs> in;
    for (std::size_t i = 0; i < batch.size(); ++i) in.push_back(emotional_inputs(*batch[i], generated[i]));
    Tape tape;
    Binding p(tape, emo_->params);
    CriticLoss l = critic_objective(p, *emo_, in, finals, rng);
    out.emo_critic_grad_norm = global_norm(p.gradients(tape.backward(l.total)));
  }
  return out;
}

// ---- checkpoints --------------------------------------------------------------

NamedTensors Trainer::state_tensors() const {
  NamedTensors out;
  out.emplace_back("__meta__/config", text_tensor(cfg_.to_text()));
  out.emplace_back("__meta__/vocab", text_tensor(vocab_.serialize()));
  out.emplace_back("__meta__/emo_vocab", text_tensor(emo_vocab_.serialize()));
  out.emplace_back(std::string(kStatePrefix) + "step", Tensor::scalar(static_cast<double>(step_)));
  out.emplace_back(std::string(kStatePrefix) + "adv_steps", Tensor::scalar(static_cast<double>(adv_steps_)));
  auto add_group = [&](const std::string& group, const ParamSet& ps, const AdamState& st) {
    for (std::size_t i = 0; i < ps.size(); ++i) out.emplace_back(ps.name(i), ps[i]);
    save_adam(out, group, ps, st);
  };
  add_group("gen", gen_->params, gen_opt_);
  if (sem_) add_group("sem", sem_->params, sem_opt_);
  if (emo_) add_group("emo", emo_->params, emo_opt_);
  return out;
}

void Trainer::restore(const NamedTensors& tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) by_name[name] = &t;
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint is missing tensor '" + name + "'", 0);
    if (it->second->shape() != shape)
      EMPGAN_THROW(DimensionError, "checkpoint tensor '" << name << "' has shape " << shape_str(it->second->shape())
                                                         << ", model expects " << shape_str(shape));
    return *it->second;
  };
  auto counter = [&](const std::string& name) {
    return static_cast<std::uint64_t>(fetch(name, Shape{}).item());
  };
  auto load_group = [&](const std::string& group, ParamSet& ps, AdamState& st) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      ps[i] = fetch(ps.name(i), ps[i].shape());
      st.m[i] = fetch(std::string(kOptPrefix) + "m/" + ps.name(i), ps[i].shape());
      st.v[i] = fetch(std::string(kOptPrefix) + "v/" + ps.name(i), ps[i].shape());
    }
    st.t = counter(std::string(kOptPrefix) + "t/" + group);
  };
  auto vit = by_name.find("__meta__/vocab");
  if (vit != by_name.end() && !(Vocabulary::deserialize(tensor_text(*vit->second)) == vocab_))
    throw DataError("checkpoint vocabulary does not match the data vocabulary");
  // stage everything so a bad checkpoint leaves the trainer untouched
  ParamSet gen_params = gen_->params;
  AdamState gen_opt = gen_opt_;
  load_group("gen", gen_params, gen_opt);
  std::optional<ParamSet> sem_params, emo_params;
  AdamState sem_opt = sem_opt_, emo_opt = emo_opt_;
  if (sem_) load_group("sem", sem_params.emplace(sem_->params), sem_opt);
  if (emo_) load_group("emo", emo_params.emplace(emo_->params), emo_opt);
  const std::uint64_t step = counter(std::string(kStatePrefix) + "step");
  const std::uint64_t adv_steps = counter(std::string(kStatePrefix) + "adv_steps");

  gen_->params = std::move(gen_params);
  gen_opt_ = std::move(gen_opt);
  if (sem_) sem_->params = std::move(*sem_params), sem_opt_ = std::move(sem_opt);
  if (emo_) emo_->params = std::move(*emo_params), emo_opt_ = std::move(emo_opt);
  step_ = step;
  adv_steps_ = adv_steps;
}

void Trainer::save(const std::filesystem::path& path) const { save_checkpoint(path, state_tensors()); }

Trainer Trainer::load(const std::filesystem::path& path, const Lexicon& lexicon, std::vector<Example> train) {
  NamedTensors t = load_checkpoint(path);
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& [n, v] : t)
      if (n == name) return v;
    throw CheckpointError("checkpoint " + path.string() + " has no '" + name + "' entry", 0);
  };
  TrainConfig cfg;
  for (const auto& [k, v] : parse_key_values(tensor_text(find("__meta__/config")), path.string())) cfg.set(k, v);
  Trainer tr(cfg, Vocabulary::deserialize(tensor_text(find("__meta__/vocab"))),
             Vocabulary::deserialize(tensor_text(find("__meta__/emo_vocab"))), lexicon, std::move(train));
  tr.restore(t);
  return tr;
}

LoadedModel load_model(const std::filesystem::path& path) {
  NamedTensors t = load_checkpoint(path);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [n, v] : t) by_name[n] = &v;
  auto find = [&](const std::string& name) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint " + path.string() + " has no '" + name + "' entry", 0);
    return *it->second;
  };
  LoadedModel m;
  for (const auto& [k, v] : parse_key_values(tensor_text(find("__meta__/config")), path.string())) m.config.set(k, v);
  m.vocab = Vocabulary::deserialize(tensor_text(find("__meta__/vocab")));
  m.emo_vocab = Vocabulary::deserialize(tensor_text(find("__meta__/emo_vocab")));
  std::mt19937_64 rng(m.config.seed);
  m.generator = std::make_unique<Generator>(GeneratorDims::from_config(m.config, m.vocab.size(), m.emo_vocab.size()), rng);
  ParamSet& ps = m.generator->params;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Tensor& v = find(ps.name(i));
    if (v.shape() != ps[i].shape())
      EMPGAN_THROW(DimensionError, "checkpoint tensor '" << ps.name(i) << "' has shape " << shape_str(v.shape())
                                                         << ", model expects " << shape_str(ps[i].shape()));
    ps[i] = v;
  }
  return m;
}

Generator pretrain_mle(const TrainConfig& cfg, const Vocabulary& vocab, const Vocabulary& emo_vocab,
                       const Lexicon& lexicon, const std::vector<Example>& data, std::vector<double>* epoch_losses) {
  if (data.empty()) throw DataError("pretrain_mle: no training examples");
  TrainConfig c = cfg;
  c.ablation.emp_g_only = true;
  Trainer tr(c, vocab, emo_vocab, lexicon, data);
  for (std::size_t e = 0; e < c.epochs; ++e) {
    double sum = 0.0;
    auto recs = tr.run_epoch();
    for (const auto& r : recs) sum += r.total;
    if (epoch_losses) epoch_losses->push_back(sum / static_cast<double>(recs.size()));
  }
  return tr.generator();
}

}  // namespace empgan
