// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "empgan/generator.hpp"
#include "empgan/gradcheck.hpp"
#include "testkit.hpp"

using namespace empgan;
using namespace testkit;

namespace {

constexpr std::size_t kV = 12, kVE = 8, kH = 4;

GeneratorDims small_dims() {
  GeneratorDims d;
  d.vocab = kV;
  d.emo_vocab = kVE;
  d.hidden = kH;
  d.embed = 5;
  d.emo_embed = 3;
  d.label_embed = 3;
  return d;
}

Generator make_gen(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Generator g(small_dims(), rng);
  for (auto& t : g.params.values()) t = uniform(t.shape(), rng, -0.6, 0.6);
  return g;
}

Example example3() {
  Example ex;
  ex.context = {{4, 5, 6}, {7, 8}, {9, 10, 11, 4}};
  ex.context_emotion = {{4, 5}, {Vocabulary::kUnk}, {6}};
  ex.labels = {1, 4, 6};
  ex.target = {Vocabulary::kBos, 5, 7, 9, Vocabulary::kEos};
  ex.target_emotion = {7, 4};
  ex.target_label = 3;
  ex.feedback = {6, 6};
  ex.feedback_emotion = {5};
  ex.feedback_label = 0;
  return ex;
}

Tensor row_of(const Tensor& m, std::size_t r) {
  Tensor out({m.cols()});
  for (std::size_t c = 0; c < m.cols(); ++c) out[c] = m.at(r, c);
  return out;
}

Mat embed(const Tensor& table, const std::vector<int>& ids) {
  Mat out;
  for (int id : ids) out.push_back(to_vec(row_of(table, static_cast<std::size_t>(id))));
  return out;
}

void zero_param(Generator& g, std::size_t idx) { g.params[idx] = Tensor(g.params[idx].shape()); }

}  // namespace

TEST_CASE("semantic_understanding") {
  Generator g = make_gen(31);
  SUBCASE("one token, one turn") {
    Tape tape;
    Binding p(tape, g.params);
    Tensor rows = semantic_understanding(p, g, {{7}}).value();
    Vec x = to_vec(row_of(g.params[g.word_emb], 7));
    Vec t = gru_oracle(gru_weights(g.params, g.utt), x, Vec(kH, 0.0));
    Vec c = gru_oracle(gru_weights(g.params, g.ctx), t, Vec(kH, 0.0));
    for (std::size_t i = 0; i < kH; ++i) CHECK(std::abs(rows.at(0, i) - c[i]) < 1e-12);
  }
  SUBCASE("causality") {
    Tape tape;
    Binding p(tape, g.params);
    Tensor a = semantic_understanding(p, g, {{4, 5}, {6}, {7, 8}}).value();
    Tensor b = semantic_understanding(p, g, {{4, 5}, {6}, {9, 9, 9}}).value();
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < kH; ++c) CHECK(a.at(r, c) == b.at(r, c));
    CHECK(max_abs_diff(row_of(a, 2), row_of(b, 2)) > 0.0);
  }
  SUBCASE("step oracle") {
    Example ex = example3();
    Tape tape;
    Binding p(tape, g.params);
    Tensor rows = semantic_understanding(p, g, ex.context).value();
    std::vector<Mat> turns;
    for (const auto& ids : ex.context) turns.push_back(embed(g.params[g.word_emb], ids));
    Mat want = hierarchy_oracle(gru_weights(g.params, g.utt), gru_weights(g.params, g.ctx), turns);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < kH; ++c) CHECK(std::abs(rows.at(r, c) - want[r][c]) < 1e-12);
  }
}

TEST_CASE("emotion_perception") {
  Generator g = make_gen(32);
  SUBCASE("zero label GRU") {
    for (std::size_t i : {g.label_rnn.w_z, g.label_rnn.w_r, g.label_rnn.w_h, g.label_rnn.u_z, g.label_rnn.u_r,
                          g.label_rnn.u_h, g.label_rnn.b_z, g.label_rnn.b_r, g.label_rnn.b_h})
      zero_param(g, i);
    Tape tape;
    Binding p(tape, g.params);
    auto [emo, lab] = emotion_perception(p, g, {{4, 5}}, {2});
    for (std::size_t c = 0; c < kH; ++c) CHECK(lab.value().at(0, c) == 0.5 * emo.value().at(0, c));
  }
  SUBCASE("labels only reach the label stack") {
    Tape tape;
    Binding p(tape, g.params);
    auto [e1, l1] = emotion_perception(p, g, {{4}, {5}}, {1, 4});
    auto [e2, l2] = emotion_perception(p, g, {{4}, {5}}, {4, 1});
    CHECK(e1.value().identical(e2.value()));
    CHECK(max_abs_diff(l1.value(), l2.value()) > 0.0);
  }
  SUBCASE("example dialogue label rows") {
    using L = EmotionLabel;
    std::vector<int> labels{int(L::Neutral), int(L::Sadness), int(L::Surprise), int(L::Sadness)};
    CHECK(g.params[g.label_emb].shape() == Shape{7, 3});
    Tape tape;
    Binding p(tape, g.params);
    Tensor rows = gather_rows(p(g.label_emb), labels).value();
    REQUIRE(rows.rows() == 4);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(row_of(rows, i).identical(row_of(g.params[g.label_emb], static_cast<std::size_t>(labels[i]))));
    CHECK(row_of(rows, 1).identical(row_of(rows, 3)));
  }
}

TEST_CASE("empathetic_attention") {
  Generator g = make_gen(33);
  std::mt19937_64 rng(5);
  SUBCASE("single turn") {
    Tape tape;
    Binding p(tape, g.params);
    ContextBundle b = make_bundle(p, g, tape.constant(uniform({1, kH}, rng)), tape.constant(uniform({1, kH}, rng)),
                                  tape.constant(uniform({1, kH}, rng)));
    auto [gt, beta] = empathetic_attention(p, g, b, tape.constant(uniform({kH}, rng)));
    CHECK(beta.value().identical(Tensor::vector({1.0})));
    CHECK(gt.value().identical(row_of(b.g.value(), 0)));
  }
  SUBCASE("z = 0") {
    zero_param(g, g.att_z);
    Tape tape;
    Binding p(tape, g.params);
    ContextBundle b = make_bundle(p, g, tape.constant(uniform({5, kH}, rng)), tape.constant(uniform({5, kH}, rng)),
                                  tape.constant(uniform({5, kH}, rng)));
    Tensor beta = empathetic_attention(p, g, b, tape.constant(uniform({kH}, rng))).second.value();
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(beta[i] - 0.2) < 1e-15);
  }
  SUBCASE("direct formula") {
    Tensor u = uniform({3, kH}, rng), e = uniform({3, kH}, rng), l = uniform({3, kH}, rng), d = uniform({kH}, rng);
    Tape tape;
    Binding p(tape, g.params);
    ContextBundle b = make_bundle(p, g, tape.constant(u), tape.constant(e), tape.constant(l));
    auto [gt, beta] = empathetic_attention(p, g, b, tape.constant(d));

    Mat ws = to_mat(g.params[g.att_ws]), wd = to_mat(g.params[g.att_wd]);
    Vec z = to_vec(g.params[g.att_z]);
    Vec dproj = vec_mat(to_vec(d), wd);
    std::vector<Vec> gi(3);
    Vec scores(3);
    for (std::size_t i = 0; i < 3; ++i) {
      for (const Tensor* part : {&u, &e, &l})
        for (std::size_t c = 0; c < kH; ++c) gi[i].push_back(part->at(i, c));
      Vec hid = vtanh(vadd(vec_mat(gi[i], ws), dproj));
      for (std::size_t c = 0; c < kH; ++c) scores[i] += z[c] * hid[c];
    }
    Vec wb = softmax_oracle(scores);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(beta.value()[i] - wb[i]) < 1e-12);
    for (std::size_t c = 0; c < 3 * kH; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 3; ++i) acc += wb[i] * gi[i][c];
      CHECK(std::abs(gt.value()[c] - acc) < 1e-12);
    }
  }
}

TEST_CASE("decode_step") {
  Generator g = make_gen(34);
  Example ex = example3();
  SUBCASE("valid distribution") {
    Tape tape;
    Binding p(tape, g.params);
    ContextBundle b = encode_context(p, g, ex);
    StepOutput s = decode_step(p, g, initial_state(b), b);
    const Tensor& pr = s.probs.value();
    CHECK(pr.size() == kV);
    double total = 0.0;
    for (double v : pr.storage()) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(std::abs(s.attention.value().sum() - 1.0) < 1e-12);
  }
  SUBCASE("W_v = 0") {
    zero_param(g, g.out_wv);
    zero_param(g, g.out_bv);
    Tape tape;
    Binding p(tape, g.params);
    GeneratorLoss l = generator_loss(p, g, ex, TrainConfig{});
    CHECK(std::abs(l.value(l.response) / static_cast<double>(l.response_tokens) - std::log(double(kV))) < 1e-12);
  }
}

TEST_CASE("emotion_word_loss") {
  Generator g = make_gen(35);
  Tensor fin = Tensor::vector({0.1, -0.2, 0.3, 0.05});
  SUBCASE("uniform single step") {
    zero_param(g, g.emo_out_w);
    zero_param(g, g.emo_out_b);
    Tape tape;
    Binding p(tape, g.params);
    double v = emotion_word_loss(p, g, tape.constant(fin), {5}).value().item();
    CHECK(std::abs(v - std::log(double(kVE))) < 1e-12);
  }
  SUBCASE("nonnegative") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 20; ++k) {
      Tape tape;
      Binding p(tape, g.params);
      std::vector<int> tgt{static_cast<int>(4 + k % 4), static_cast<int>(1 + k % 7)};
      CHECK(emotion_word_loss(p, g, tape.constant(uniform({kH}, rng)), tgt).value().item() >= 0.0);
    }
  }
  SUBCASE("gradient w.r.t. emotion embeddings") {
    Example ex = example3();
    TensorProgram prog = [&](Tape& t, const std::vector<Var>& v) {
      std::vector<Var> vars;
      for (std::size_t i = 0; i < g.params.size(); ++i) vars.push_back(i == g.emo_emb ? v[0] : t.constant(g.params[i]));
      Binding p(t, g.params, vars);
      auto [emo, lab] = emotion_perception(p, g, ex.context_emotion, ex.labels);
      return emotion_word_loss(p, g, row(emo, 2), ex.target_emotion);
    };
    auto rep = grad_check(prog, {g.params[g.emo_emb]}, {"gen/emb.emotion"}, {1e-5, 1e-4, 0.0});
    CHECK(rep.passed);
  }
}

TEST_CASE("label_loss") {
  Generator g = make_gen(36);
  Tensor fin = Tensor::vector({0.4, -0.1, 0.2, 0.3});
  zero_param(g, g.lab_w);
  SUBCASE("uniform") {
    zero_param(g, g.lab_b);
    Tape tape;
    Binding p(tape, g.params);
    CHECK(std::abs(label_loss(p, g, tape.constant(fin), 3).value().item() - std::log(7.0)) < 1e-12);
  }
  SUBCASE("saturated") {
    Tensor b({7});
    b[2] = 50.0;
    g.params[g.lab_b] = b;
    Tape tape;
    Binding p(tape, g.params);
    CHECK(label_loss(p, g, tape.constant(fin), 2).value().item() < 1e-6);
  }
  SUBCASE("gradient reaches label embeddings") {
    Generator g2 = make_gen(37);
    Tape tape;
    Binding p(tape, g2.params);
    auto [emo, lab] = emotion_perception(p, g2, {{4}, {5}}, {1, 3});
    auto grads = p.gradients(tape.backward(label_loss(p, g2, row(lab, 1), 4)));
    CHECK(grads[g2.label_emb].max_abs() > 0.0);
  }
}

TEST_CASE("generator_loss") {
  Generator g = make_gen(38);
  Example ex = example3();
  TrainConfig on;
  Tape tape;
  Binding p(tape, g.params);
  GeneratorLoss l = generator_loss(p, g, ex, on);
  double r = l.value(l.response), e = l.value(l.emotion), lab = l.value(l.label);
  CHECK(r >= 0.0);
  CHECK(e >= 0.0);
  CHECK(lab >= 0.0);
  CHECK(l.response_tokens == ex.target.size() - 1);
  CHECK(l.total.value().item() == (r + e) + lab);

  TrainConfig off;
  off.emotion_losses = false;
  GeneratorLoss l2 = generator_loss(p, g, ex, off);
  CHECK(l2.value(l2.response) == r);
  CHECK_FALSE(l2.emotion.valid());
  CHECK(std::abs((l.total.value().item() - l2.total.value().item()) - (e + lab)) < 1e-12);

  Var adv = tape.constant(Tensor::scalar(-0.75));
  on.lambda_adv = 2.0;
  ContextBundle b = encode_context(p, g, ex);
  GeneratorLoss l3 = generator_loss(p, g, ex, b, on, {}, adv);
  CHECK(std::abs(l3.total.value().item() - (r + e + lab - 1.5)) < 1e-12);
}

TEST_CASE("generate") {
  Generator g = make_gen(39);
  Example ex = example3();
  CHECK(generate(g, ex, 1).size() == 1);
  auto a = generate(g, ex, 6), b = generate(g, ex, 6);
  CHECK(a == b);
  auto s1 = generate(g, ex, 6, DecodeMode::Sample, 42), s2 = generate(g, ex, 6, DecodeMode::Sample, 42);
  CHECK(s1 == s2);
  CHECK(s1.size() <= 6);

  Tape tape;
  Binding p(tape, g.params);
  std::mt19937_64 rng(1);
  Generation gen = run_decoder(p, g, encode_context(p, g, ex), 4, DecodeMode::Greedy, &rng);
  CHECK(gen.soft_embeddings.value().shape() == Shape{gen.tokens.size(), 5});
  Tensor e0 = row_of(gen.soft_embeddings.value(), 0);
  Tensor want({5});
  for (std::size_t v = 0; v < kV; ++v)
    for (std::size_t c = 0; c < 5; ++c) want[c] += gen.probs[0].value()[v] * g.params[g.word_emb].at(v, c);
  CHECK(max_abs_diff(e0, want) < 1e-12);
}
