// SPDX-License-Identifier: Apache-2.0
#include "empgan/gradcheck_suite.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <cstdio>
#include <functional>
#include <random>

#include "empgan/discriminator.hpp"
#include "empgan/generator.hpp"
#include "empgan/params.hpp"
#include "empgan/recurrent.hpp"

namespace empgan {

namespace {

using Runner = std::function<GradCheckReport(const SuiteOptions&, std::mt19937_64&)>;

struct Entry {
  std::string name;
  Runner run;
};

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

// Values bounded away from zero so relu and norm kinks stay out of reach of ε.
Tensor away_from_zero(Shape shape, std::mt19937_64& rng) {
  Tensor t = random_tensor(std::move(shape), rng);
  for (auto& v : t.storage()) v = v < 0 ? v - 0.1 : v + 0.1;
  return t;
}

/// sum(out ⊙ w) with a fixed random w so every output entry matters.
Var weighted(const Var& out, const Tensor& w) {
  Tape& tape = *out.tape();
  return sum(mul(out, tape.constant(w.reshaped(out.shape()))));
}

Runner simple(std::vector<Shape> shapes, std::function<Var(const std::vector<Var>&)> body, bool kink_safe = false) {
  return [shapes, body, kink_safe](const SuiteOptions& o, std::mt19937_64& rng) {
    std::vector<Tensor> params;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      params.push_back(kink_safe ? away_from_zero(shapes[i], rng) : random_tensor(shapes[i], rng));
      names.push_back("x" + std::to_string(i));
    }
    Tape probe;
    std::vector<Var> pv;
    for (const auto& p : params) pv.push_back(probe.constant(p));
    Tensor w = random_tensor(body(pv).shape(), rng);
    TensorProgram fn = [body, w](Tape&, const std::vector<Var>& v) { return weighted(body(v), w); };
    return grad_check(fn, params, names, o.check);
  };
}

/// Checks a subset of a ParamSet plus extra inputs. Unchecked parameters are
/// placed as constants.
GradCheckReport check_params(const ParamSet& ps, const std::vector<std::size_t>& checked,
                             const std::vector<std::pair<std::string, Tensor>>& extra,
                             const std::function<Var(Binding&, const std::vector<Var>&)>& body,
                             const GradCheckOptions& opts) {
  std::vector<Tensor> params;
  std::vector<std::string> names;
  for (std::size_t i : checked) {
    params.push_back(ps[i]);
    names.push_back(ps.name(i));
  }
  for (const auto& [n, t] : extra) {
    params.push_back(t);
    names.push_back(n);
  }
  TensorProgram fn = [&ps, checked, &body](Tape& tape, const std::vector<Var>& v) {
    std::vector<Var> all(ps.size());
    std::vector<bool> given(ps.size(), false);
    for (std::size_t k = 0; k < checked.size(); ++k) {
      all[checked[k]] = v[k];
      given[checked[k]] = true;
    }
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (!given[i]) all[i] = tape.constant(ps[i]);
    Binding p(tape, ps, all);
    std::vector<Var> rest(v.begin() + static_cast<std::ptrdiff_t>(checked.size()), v.end());
    return body(p, rest);
  };
  return grad_check(fn, params, names, opts);
}

std::vector<std::size_t> all_indices(const ParamSet& ps) {
  std::vector<std::size_t> out(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) out[i] = i;
  return out;
}

std::vector<std::size_t> with_prefix(const ParamSet& ps, const std::vector<std::string>& prefixes) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (const auto& pre : prefixes)
      if (ps.name(i).rfind(pre, 0) == 0) {
        out.push_back(i);
        break;
      }
  return out;
}

Example tiny_example() {
  Example ex;
  ex.context = {{4, 5, 6}, {7, 8}};
  ex.context_emotion = {{4}, {5, 6}};
  ex.labels = {1, 4};
  ex.target = {Vocabulary::kBos, 9, 10, 11, Vocabulary::kEos};
  ex.target_tokens = {"w9", "w10", "w11"};
  ex.target_emotion = {4, 7};
  ex.target_label = 4;
  ex.feedback = {5, 9};
  ex.feedback_emotion = {6};
  ex.feedback_label = 6;
  return ex;
}

TrainConfig tiny_config(std::size_t hidden) {
  TrainConfig c;
  c.hidden = hidden;
  c.embed = 6;
  c.emo_embed = 4;
  c.label_embed = 3;
  c.dropout = 0.0;
  return c;
}

Generator tiny_generator(std::size_t hidden, std::mt19937_64& rng) {
  TrainConfig c = tiny_config(hidden);
  return Generator(GeneratorDims::from_config(c, 12, 8), rng);
}

Runner critic_runner(bool vanilla, bool per_step, bool squared) {
  return [=](const SuiteOptions& o, std::mt19937_64& rng) {
    CriticDims d;
    d.input = 5;
    d.hidden = o.hidden;
    d.context = o.hidden;
    d.widths = {2, 3};
    d.filters = 4;
    auto c = std::make_shared<Critic>(CriticKind::Semantic, d, rng);
    for (auto& t : c->params.values()) t = random_tensor(t.shape(), rng, -0.5, 0.5);
    struct Inputs {
      Tensor cand, gold, fb, utt, emo, lab;
    };
    auto in = std::make_shared<std::vector<Inputs>>();
    const std::size_t lens[2][3] = {{3, 4, 2}, {5, 2, 3}};
    for (auto& l : lens)
      in->push_back({random_tensor({l[0], 5}, rng), random_tensor({l[1], 5}, rng), random_tensor({l[2], 5}, rng),
                     random_tensor({o.hidden}, rng), random_tensor({o.hidden}, rng), random_tensor({o.hidden}, rng)});
    std::vector<std::pair<std::string, Tensor>> extra = {{"input.feedback0", (*in)[0].fb}};
    PenaltyOptions po{10.0, squared, per_step};
    auto body = [c, in, po, vanilla](Binding& p, const std::vector<Var>& x) {
      Tape& tape = p.tape();
      std::vector<CriticPair> pairs;
      for (std::size_t i = 0; i < in->size(); ++i) {
        const auto& s = (*in)[i];
        Var fb = i == 0 ? x[0] : tape.constant(s.fb);
        Var h = fuse_context(p, *c, tape.constant(s.utt), tape.constant(s.emo), tape.constant(s.lab));
        auto [fn, tn] = build_pair(p, *c, {tape.constant(s.cand), tape.constant(s.gold), fb}, h);
        pairs.push_back({fn, tn});
      }
      return critic_loss(p, *c, pairs, {0.3, 0.7}, po, vanilla).total;
    };
    return check_params(c->params, all_indices(c->params), extra, body, o.check);
  };
}

std::vector<Entry> registry() {
  std::vector<Entry> r;
  auto reg = [&](std::string name, Runner run) { r.push_back({std::move(name), std::move(run)}); };
  const Shape m34{3, 4};

  reg("op.add", simple({m34, m34}, [](auto& v) { return add(v[0], v[1]); }));
  reg("op.sub", simple({m34, m34}, [](auto& v) { return sub(v[0], v[1]); }));
  reg("op.mul", simple({m34, m34}, [](auto& v) { return mul(v[0], v[1]); }));
  reg("op.scale", simple({m34}, [](auto& v) { return scale(v[0], -2.5); }));
  reg("op.add_scalar", simple({m34}, [](auto& v) { return add_scalar(v[0], 0.75); }));
  reg("op.one_minus", simple({m34}, [](auto& v) { return one_minus(v[0]); }));
  reg("op.square", simple({m34}, [](auto& v) { return square(v[0]); }));
  reg("op.tanh", simple({m34}, [](auto& v) { return tanh(v[0]); }));
  reg("op.sigmoid", simple({m34}, [](auto& v) { return sigmoid(v[0]); }));
  reg("op.relu", simple({m34}, [](auto& v) { return relu(v[0]); }, true));
  reg("op.softplus", simple({m34}, [](auto& v) { return softplus(v[0]); }));
  reg("op.mask", simple({m34}, [](auto& v) {
        Tensor m(Shape{3, 4});
        for (std::size_t i = 0; i < m.size(); i += 2) m[i] = 1.0;
        return mask(v[0], m);
      }));
  reg("op.matmul", simple({{3, 4}, {4, 5}}, [](auto& v) { return matmul(v[0], v[1]); }));
  reg("op.matmul_vec_mat", simple({{4}, {4, 5}}, [](auto& v) { return matmul(v[0], v[1]); }));
  reg("op.matmul_mat_vec", simple({{3, 4}, {4}}, [](auto& v) { return matmul(v[0], v[1]); }));
  reg("op.affine", simple({{4}, {4, 5}, {5}}, [](auto& v) { return affine(v[0], v[1], v[2]); }));
  reg("op.add_rows", simple({m34, {4}}, [](auto& v) { return add_rows(v[0], v[1]); }));
  reg("op.sum", simple({m34}, [](auto& v) { return scale(sum(square(v[0])), 1.0); }));
  reg("op.mean", simple({m34}, [](auto& v) { return mean(square(v[0])); }));
  reg("op.norm2", simple({m34}, [](auto& v) { return norm2(v[0]); }));
  reg("op.reshape", simple({m34}, [](auto& v) { return reshape(v[0], {4, 3}); }));
  reg("op.concat", simple({{3}, {4}}, [](auto& v) { return concat({v[0], v[1]}); }));
  reg("op.hconcat", simple({{3, 2}, m34}, [](auto& v) { return hconcat({v[0], v[1]}); }));
  reg("op.stack", simple({{4}, {4}}, [](auto& v) { return stack({v[0], v[1], v[0]}); }));
  reg("op.row", simple({m34}, [](auto& v) { return row(v[0], 1); }));
  reg("op.gather_rows", simple({{5, 3}}, [](auto& v) {
        static const int ids[] = {0, 2, 2, 4};
        return gather_rows(v[0], ids);
      }));
  reg("op.slice", simple({{6}}, [](auto& v) { return slice(v[0], 1, 3); }));
  reg("op.pad_rows", simple({{2, 3}}, [](auto& v) { return pad_rows(v[0], 4); }));
  reg("op.slice_rows", simple({{4, 3}}, [](auto& v) { return slice_rows(v[0], 1, 2); }));
  reg("op.softmax", simple({{6}}, [](auto& v) { return softmax(v[0]); }));
  reg("op.log_softmax", simple({{6}}, [](auto& v) { return log_softmax(v[0]); }));
  reg("op.cross_entropy", simple({{6}}, [](auto& v) { return cross_entropy(v[0], 2); }));
  reg("op.pick", simple({{6}}, [](auto& v) { return pick(tanh(v[0]), 3); }));
  reg("op.conv_over_time", simple({{5, 3}, {6, 4}, {4}}, [](auto& v) {
        return max_pool_over_time(conv_over_time(v[0], v[1], v[2], 2));
      }));
  reg("op.conv_over_time_short", simple({{1, 3}, {9, 4}, {4}}, [](auto& v) {
        return max_pool_over_time(conv_over_time(v[0], v[1], v[2], 3));
      }));
  reg("op.conv_backproject", simple({{6, 4}, {4}}, [](auto& v) {
        return conv_backproject(v[0], v[1], {0, 2, 1, 3}, 2, 3, 5, 5);
      }));

  reg("rnn.gru_step", [](const SuiteOptions& o, std::mt19937_64& rng) {
    ParamSet ps;
    GruCell cell = GruCell::create(ps, "gru", 3, o.hidden, rng);
    Tensor w = random_tensor({o.hidden}, rng);
    return check_params(ps, all_indices(ps), {{"x", random_tensor({3}, rng)}, {"h_prev", random_tensor({o.hidden}, rng)}},
                        [cell, w](Binding& p, const std::vector<Var>& x) {
                          return weighted(gru_step(p, cell, x[0], x[1]), w);
                        },
                        o.check);
  });
  reg("rnn.lstm_step", [](const SuiteOptions& o, std::mt19937_64& rng) {
    ParamSet ps;
    LstmCell cell = LstmCell::create(ps, "lstm", 3, o.hidden, rng);
    Tensor wh = random_tensor({o.hidden}, rng), wc = random_tensor({o.hidden}, rng);
    return check_params(ps, all_indices(ps),
                        {{"x", random_tensor({3}, rng)},
                         {"h_prev", random_tensor({o.hidden}, rng)},
                         {"c_prev", random_tensor({o.hidden}, rng)}},
                        [cell, wh, wc](Binding& p, const std::vector<Var>& x) {
                          auto [h, c] = lstm_step(p, cell, x[0], x[1], x[2]);
                          return add(weighted(h, wh), weighted(c, wc));
                        },
                        o.check);
  });
  reg("rnn.gru_encoder", [](const SuiteOptions& o, std::mt19937_64& rng) {
    ParamSet ps;
    GruCell cell = GruCell::create(ps, "gru", 3, o.hidden, rng);
    Tensor w = random_tensor({4, o.hidden}, rng);
    return check_params(ps, all_indices(ps), {{"sequence", random_tensor({4, 3}, rng)}},
                        [cell, w](Binding& p, const std::vector<Var>& x) {
                          return weighted(encode_sequence(p, cell, x[0], zeros(p.tape(), cell.d_h)).states, w);
                        },
                        o.check);
  });
  reg("rnn.lstm_encoder", [](const SuiteOptions& o, std::mt19937_64& rng) {
    ParamSet ps;
    LstmCell cell = LstmCell::create(ps, "lstm", 3, o.hidden, rng);
    Tensor w = random_tensor({4, o.hidden}, rng);
    return check_params(ps, all_indices(ps), {{"sequence", random_tensor({4, 3}, rng)}},
                        [cell, w](Binding& p, const std::vector<Var>& x) {
                          return weighted(encode_sequence(p, cell, x[0], zeros(p.tape(), cell.d_h)).states, w);
                        },
                        o.check);
  });
  reg("rnn.hierarchical_encoder", [](const SuiteOptions& o, std::mt19937_64& rng) {
    ParamSet ps;
    GruCell turn = GruCell::create(ps, "turn", 3, o.hidden, rng);
    GruCell ctx = GruCell::create(ps, "ctx", o.hidden, o.hidden, rng);
    Tensor w = random_tensor({3, o.hidden}, rng);
    return check_params(ps, all_indices(ps),
                        {{"turn0", random_tensor({2, 3}, rng)},
                         {"turn1", random_tensor({4, 3}, rng)},
                         {"turn2", random_tensor({1, 3}, rng)}},
                        [turn, ctx, w](Binding& p, const std::vector<Var>& x) {
                          return weighted(hierarchical_encode(p, turn, ctx, x), w);
                        },
                        o.check);
  });

  reg("gen.attention", [](const SuiteOptions& o, std::mt19937_64& rng) {
    auto gen = std::make_shared<Generator>(tiny_generator(o.hidden, rng));
    const std::size_t h = o.hidden;
    Tensor w = random_tensor({3 * h + 3}, rng);
    return check_params(gen->params, {gen->att_z, gen->att_ws, gen->att_wd},
                        {{"utt", random_tensor({3, h}, rng)},
                         {"emo", random_tensor({3, h}, rng)},
                         {"lab", random_tensor({3, h}, rng)},
                         {"d_t", random_tensor({h}, rng)}},
                        [gen, w](Binding& p, const std::vector<Var>& x) {
                          ContextBundle b = make_bundle(p, *gen, x[0], x[1], x[2]);
                          auto [beta, g_t] = empathetic_attention(p, *gen, b, x[3]);
                          return weighted(concat({beta, g_t}), w);
                        },
                        o.check);
  });
  reg("gen.emotion_word_loss", [](const SuiteOptions& o, std::mt19937_64& rng) {
    auto gen = std::make_shared<Generator>(tiny_generator(o.hidden, rng));
    auto idx = with_prefix(gen->params, {"gen/emo_dec", "gen/emo_out", "gen/emb.emotion"});
    return check_params(gen->params, idx, {{"emo_final", random_tensor({o.hidden}, rng)}},
                        [gen](Binding& p, const std::vector<Var>& x) {
                          return emotion_word_loss(p, *gen, x[0], {4, 7, 5});
                        },
                        o.check);
  });
  reg("gen.label_loss", [](const SuiteOptions& o, std::mt19937_64& rng) {
    auto gen = std::make_shared<Generator>(tiny_generator(o.hidden, rng));
    return check_params(gen->params, {gen->lab_w, gen->lab_b}, {{"lab_final", random_tensor({o.hidden}, rng)}},
                        [gen](Binding& p, const std::vector<Var>& x) { return label_loss(p, *gen, x[0], 4); },
                        o.check);
  });
  reg("gen.psi_g", [](const SuiteOptions& o, std::mt19937_64& rng) {
    auto gen = std::make_shared<Generator>(tiny_generator(o.hidden, rng));
    // Larger weights than the training init so gradients are well above the error floor.
    for (auto& t : gen->params.values()) t = random_tensor(t.shape(), rng, -0.5, 0.5);
    TrainConfig cfg = tiny_config(o.hidden);
    Example ex = tiny_example();
    return check_params(gen->params, all_indices(gen->params), {},
                        [gen, cfg, ex](Binding& p, const std::vector<Var>&) {
                          return generator_loss(p, *gen, ex, cfg).total;
                        },
                        o.check);
  });

  reg("critic.loss_d_wgan_gp", critic_runner(false, false, true));
  reg("critic.loss_d_gp_per_step", critic_runner(false, true, true));
  reg("critic.loss_d_gp_hinge", critic_runner(false, false, false));
  reg("critic.loss_d_vanilla", critic_runner(true, false, true));
  return r;
}

}  // namespace

std::vector<std::string> gradcheck_names() {
  std::vector<std::string> out;
  for (const auto& e : registry()) out.push_back(e.name);
  return out;
}

std::vector<SuiteResult> run_gradcheck_suite(const SuiteOptions& opts) {
  std::vector<SuiteResult> out;
  std::uint64_t k = 0;
  for (const auto& e : registry()) {
    ++k;
    if (!opts.filter.empty() && e.name.find(opts.filter) == std::string::npos) continue;
    std::mt19937_64 rng(opts.seed * 1000003ull + k);
    auto t0 = std::chrono::steady_clock::now();
    SuiteResult res{e.name, e.run(opts, rng), 0.0};
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(res));
  }
  return out;
}

std::string format_gradcheck_report(const std::vector<SuiteResult>& results, double tol) {
  std::string out = "check\tparameter\tscalars\tmax_rel_err\tstatus\n";
  char buf[256];
  for (const auto& r : results)
    for (const auto& p : r.report.params) {
      std::snprintf(buf, sizeof buf, "%s\t%s\t%zu\t%.3e\t%s\n", r.name.c_str(), p.name.c_str(), p.scalars,
                    p.max_rel_err, p.max_rel_err < tol ? "PASS" : "FAIL");
      out += buf;
    }
  return out;
}

}  // namespace empgan
