// SPDX-License-Identifier: Apache-2.0
#include "testkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#ifndef EMPGAN_DATA_DIR
#error "EMPGAN_DATA_DIR must point at the repository data/ directory"
#endif

using namespace empgan;

namespace testkit {

std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(EMPGAN_DATA_DIR) / rel; }

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("empgan_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

Tensor normal(Shape shape, std::mt19937_64& rng, double mu, double sd) {
  std::normal_distribution<double> n(mu, sd);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = n(rng);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

Vec to_vec(const Tensor& t) { return Vec(t.storage().begin(), t.storage().end()); }

Mat mat_mul(const Mat& a, const Mat& b) {
  Mat out(a.size(), Vec(b.empty() ? 0 : b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < out[i].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Vec vec_mat(const Vec& x, const Mat& w) { return mat_mul(Mat{x}, w)[0]; }

Vec vadd(const Vec& a, const Vec& b) {
  Vec o(a);
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += b[i];
  return o;
}

Vec vmul(const Vec& a, const Vec& b) {
  Vec o(a);
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= b[i];
  return o;
}

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec vsigm(const Vec& x) {
  Vec o(x);
  for (auto& v : o) v = sigm(v);
  return o;
}

Vec vtanh(const Vec& x) {
  Vec o(x);
  for (auto& v : o) v = std::tanh(v);
  return o;
}

Vec softmax_oracle(const Vec& x) {
  long double z = 0.0L;
  for (double v : x) z += std::exp(static_cast<long double>(v));
  Vec o(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = static_cast<double>(std::exp(static_cast<long double>(x[i])) / z);
  return o;
}

GruWeights gru_weights(const ParamSet& ps, const GruCell& c) {
  return {to_mat(ps[c.w_z]), to_mat(ps[c.w_r]), to_mat(ps[c.w_h]), to_mat(ps[c.u_z]), to_mat(ps[c.u_r]),
          to_mat(ps[c.u_h]), to_vec(ps[c.b_z]), to_vec(ps[c.b_r]), to_vec(ps[c.b_h])};
}

LstmWeights lstm_weights(const ParamSet& ps, const LstmCell& c) {
  LstmWeights w;
  for (int k = 0; k < 4; ++k) {
    w.w[k] = to_mat(ps[c.w[k]]);
    w.u[k] = to_mat(ps[c.u[k]]);
    w.b[k] = to_vec(ps[c.b[k]]);
  }
  return w;
}

Vec gru_oracle(const GruWeights& w, const Vec& x, const Vec& h) {
  Vec z = vsigm(vadd(vadd(vec_mat(x, w.wz), vec_mat(h, w.uz)), w.bz));
  Vec r = vsigm(vadd(vadd(vec_mat(x, w.wr), vec_mat(h, w.ur)), w.br));
  Vec ht = vtanh(vadd(vadd(vec_mat(x, w.wh), vec_mat(vmul(r, h), w.uh)), w.bh));
  Vec out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = (1.0 - z[i]) * h[i] + z[i] * ht[i];
  return out;
}

std::pair<Vec, Vec> lstm_oracle(const LstmWeights& w, const Vec& x, const Vec& h, const Vec& c) {
  auto pre = [&](int k) { return vadd(vadd(vec_mat(x, w.w[k]), vec_mat(h, w.u[k])), w.b[k]); };
  Vec i = vsigm(pre(0)), f = vsigm(pre(1)), o = vsigm(pre(2)), g = vtanh(pre(3));
  Vec c2(c.size()), h2(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    c2[k] = f[k] * c[k] + i[k] * g[k];
    h2[k] = o[k] * std::tanh(c2[k]);
  }
  return {h2, c2};
}

Mat hierarchy_oracle(const GruWeights& turn, const GruWeights& ctx, const std::vector<Mat>& turns) {
  const std::size_t d_h = turn.uz.size();
  Mat rows;
  Vec hc(d_h, 0.0);
  for (const auto& t : turns) {
    Vec h(d_h, 0.0);
    for (const auto& x : t) h = gru_oracle(turn, x, h);
    hc = gru_oracle(ctx, h, hc);
    rows.push_back(hc);
  }
  return rows;
}

// ---- metrics ----------------------------------------------------------------

namespace {

std::vector<Sent> grams(const Sent& s, int n) {
  std::vector<Sent> out;
  for (int i = 0; i + n <= static_cast<int>(s.size()); ++i) out.emplace_back(s.begin() + i, s.begin() + i + n);
  return out;
}

std::size_t occurrences(const std::vector<Sent>& list, const Sent& g) {
  std::size_t k = 0;
  for (const auto& x : list) k += x == g;
  return k;
}

/// Clipped overlap by scanning each distinct hypothesis n-gram.
std::size_t overlap(const Sent& hyp, const Sent& ref, int n) {
  auto h = grams(hyp, n), r = grams(ref, n);
  std::vector<Sent> seen;
  std::size_t o = 0;
  for (const auto& g : h) {
    if (occurrences(seen, g)) continue;
    seen.push_back(g);
    o += std::min(occurrences(h, g), occurrences(r, g));
  }
  return o;
}

std::array<double, 3> prf(double match, double hyp_total, double ref_total) {
  double p = hyp_total > 0 ? match / hyp_total : 0.0;
  double r = ref_total > 0 ? match / ref_total : 0.0;
  double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  return {f, p, r};
}

}  // namespace

double bleu_oracle(const std::vector<Sent>& hyps, const std::vector<Sent>& refs, int max_n) {
  double c = 0, r = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) c += hyps[i].size(), r += refs[i].size();
  if (c == 0) return 0.0;
  double logsum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    double m = 0, t = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      m += overlap(hyps[i], refs[i], n);
      t += grams(hyps[i], n).size();
    }
    if (n == 1 && m == 0) return 0.0;
    if (n >= 2) m += 1, t += 1;
    logsum += std::log(m / t);
  }
  double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(logsum / max_n);
}

double distinct_oracle(const std::vector<Sent>& hyps, int n) {
  std::vector<Sent> all;
  for (const auto& h : hyps)
    for (auto& g : grams(h, n)) all.push_back(g);
  if (all.empty()) return 0.0;
  std::vector<Sent> uniq;
  for (const auto& g : all)
    if (!occurrences(uniq, g)) uniq.push_back(g);
  return static_cast<double>(uniq.size()) / static_cast<double>(all.size());
}

std::array<double, 3> rouge_n_oracle(const Sent& hyp, const Sent& ref, int n) {
  return prf(overlap(hyp, ref, n), grams(hyp, n).size(), grams(ref, n).size());
}

std::array<double, 3> rouge_l_oracle(const Sent& hyp, const Sent& ref) {
  // full table LCS
  std::vector<std::vector<std::size_t>> L(hyp.size() + 1, std::vector<std::size_t>(ref.size() + 1, 0));
  for (std::size_t i = 1; i <= hyp.size(); ++i)
    for (std::size_t j = 1; j <= ref.size(); ++j)
      L[i][j] = hyp[i - 1] == ref[j - 1] ? L[i - 1][j - 1] + 1 : std::max(L[i - 1][j], L[i][j - 1]);
  return prf(L[hyp.size()][ref.size()], hyp.size(), ref.size());
}

Sent random_sentence(std::mt19937_64& rng, std::size_t lo, std::size_t hi, std::size_t alphabet) {
  std::uniform_int_distribution<std::size_t> len(lo, hi), tok(0, alphabet - 1);
  Sent s(len(rng));
  for (auto& w : s) w = std::string(1, static_cast<char>('a' + tok(rng)));
  return s;
}

// ---- training fixtures ----------------------------------------------------------

Fixture load_fixture(const std::string& corpus_rel) {
  Fixture f;
  f.lexicon = Lexicon::load({data_path("synthetic/lexicon.txt")});
  f.dialogues = load_corpus(data_path(corpus_rel), f.lexicon);
  f.vocab = build_vocab(f.dialogues, VocabMode::Generic);
  f.emo_vocab = build_vocab(f.dialogues, VocabMode::Emotion);
  f.examples = make_examples(f.dialogues, f.vocab, f.emo_vocab);
  return f;
}

TrainConfig overfit_config() {
  TrainConfig c;
  c.hidden = 32;
  c.embed = 16;
  c.emo_embed = 8;
  c.label_embed = 8;
  c.lr = 0.01;
  c.dropout = 0.0;
  c.batch = 8;
  c.epochs = 300;
  c.ablation = ablation_for(Variant::EmpG);
  return c;
}

TrainConfig tiny_adversarial_config(Variant v) {
  TrainConfig c;
  c.hidden = 8;
  c.embed = 8;
  c.emo_embed = 4;
  c.label_embed = 4;
  c.conv_widths = {2, 3};
  c.conv_filters = 4;
  c.batch = 4;
  c.dropout = 0.0;
  c.lr = 1e-3;
  c.epochs = 4;
  c.pretrain_epochs = 1;
  c.n_critic = 1;
  c.max_len = 8;
  c.ablation = ablation_for(v);
  return c;
}

OverfitResult run_overfit(std::size_t epochs) {
  auto t0 = std::chrono::steady_clock::now();
  Fixture fx = load_fixture("fixtures/overfit8.jsonl");
  TrainConfig cfg = overfit_config();
  cfg.epochs = epochs;
  Trainer tr(cfg, fx.vocab, fx.emo_vocab, fx.lexicon, fx.examples);
  OverfitResult res;
  for (std::size_t ep = 1; ep <= epochs; ++ep) {
    tr.run_epoch();
    res.final_ce = tr.per_token_ce(fx.examples);
    if (!res.epoch_below && res.final_ce < 0.1) res.epoch_below = ep;
  }
  res.total = fx.examples.size();
  for (const auto& ex : fx.examples) {
    auto out = generate(tr.generator(), ex, cfg.max_len);
    std::vector<int> gold(ex.target.begin() + 1, ex.target.end());
    res.exact += out == gold;
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

ToyCriticResult run_toy_critic(std::uint64_t seed, std::size_t steps, double sigma, std::size_t window) {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(seed);
  CriticDims d;
  d.input = 4;
  d.hidden = 8;
  d.context = 8;
  d.widths = {2, 3};
  d.filters = 8;
  Critic c(CriticKind::Semantic, d, rng);
  AdamState st = AdamState::for_params(c.params);
  const AdamHyper h{1e-3, 0.5, 0.9, 1e-8};
  const PenaltyOptions pen{sigma, true, false};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ToyCriticResult res;
  window = std::min(window, steps);
  for (std::size_t s = 0; s < steps; ++s) {
    Tape tape;
    Binding p(tape, c.params);
    std::vector<CriticPair> pairs;
    std::vector<double> alphas;
    for (int i = 0; i < 16; ++i) {
      Var u = tape.constant(normal({d.hidden}, rng, 0, 1));
      Var e = tape.constant(normal({d.hidden}, rng, 0, 1));
      Var l = tape.constant(normal({d.hidden}, rng, 0, 1));
      Var h_dlg = fuse_context(p, c, u, e, l);
      PairInputs in{tape.constant(normal({4, 4}, rng, -0.1, 0.3)), tape.constant(normal({4, 4}, rng, 0.1, 0.3)),
                    tape.constant(normal({3, 4}, rng, 0, 1))};
      auto [fn, tn] = build_pair(p, c, in, h_dlg);
      pairs.push_back({fn, tn});
      alphas.push_back(unit(rng));
    }
    CriticLoss loss = critic_loss(p, c, pairs, alphas, pen);
    adam_step(c.params, p.gradients(tape.backward(loss.total)), st, h);
    if (s + window >= steps) {
      res.margin += loss.margin() / static_cast<double>(window);
      res.grad_norm += loss.mean_grad_norm / static_cast<double>(window);
    }
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace testkit
