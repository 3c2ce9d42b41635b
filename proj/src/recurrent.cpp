// SPDX-License-Identifier: Apache-2.0
#include "empgan/recurrent.hpp"

namespace empgan {

Var zeros(Tape& tape, std::size_t n) { return tape.constant(Tensor({n})); }

GruCell GruCell::create(ParamSet& ps, const std::string& prefix, std::size_t d_in, std::size_t d_h,
                        std::mt19937_64& rng) {
  GruCell c;
  c.d_in = d_in;
  c.d_h = d_h;
  c.w_z = ps.add_uniform(prefix + ".W_z", {d_in, d_h}, kInitRange, rng);
  c.w_r = ps.add_uniform(prefix + ".W_r", {d_in, d_h}, kInitRange, rng);
  c.w_h = ps.add_uniform(prefix + ".W_h", {d_in, d_h}, kInitRange, rng);
  c.u_z = ps.add_uniform(prefix + ".U_z", {d_h, d_h}, kInitRange, rng);
  c.u_r = ps.add_uniform(prefix + ".U_r", {d_h, d_h}, kInitRange, rng);
  c.u_h = ps.add_uniform(prefix + ".U_h", {d_h, d_h}, kInitRange, rng);
  c.b_z = ps.add_uniform(prefix + ".b_z", {d_h}, kInitRange, rng);
  c.b_r = ps.add_uniform(prefix + ".b_r", {d_h}, kInitRange, rng);
  c.b_h = ps.add_uniform(prefix + ".b_h", {d_h}, kInitRange, rng);
  return c;
}

LstmCell LstmCell::create(ParamSet& ps, const std::string& prefix, std::size_t d_in, std::size_t d_h,
                          std::mt19937_64& rng) {
  static const char* gate[4] = {"i", "f", "o", "g"};
  LstmCell c;
  c.d_in = d_in;
  c.d_h = d_h;
  for (int k = 0; k < 4; ++k) {
    c.w[k] = ps.add_uniform(prefix + ".W_" + gate[k], {d_in, d_h}, kInitRange, rng);
    c.u[k] = ps.add_uniform(prefix + ".U_" + gate[k], {d_h, d_h}, kInitRange, rng);
    c.b[k] = ps.add_uniform(prefix + ".b_" + gate[k], {d_h}, kInitRange, rng);
  }
  return c;
}

namespace {

void check_step_shapes(const char* what, std::size_t d_in, std::size_t d_h, const Var& x, const Var& h) {
  if (x.shape() != Shape{d_in} || h.shape() != Shape{d_h})
    EMPGAN_THROW(DimensionError, what << ": cell is " << d_in << "->" << d_h << " but got x " << shape_str(x.shape())
                                      << " and h " << shape_str(h.shape()));
}

Var gate(Binding& p, std::size_t w, std::size_t u, std::size_t b, const Var& x, const Var& h) {
  return add(add(matmul(x, p(w)), matmul(h, p(u))), p(b));
}

}  // namespace

Var gru_step(Binding& p, const GruCell& cell, const Var& x, const Var& h_prev) {
  check_step_shapes("gru_step", cell.d_in, cell.d_h, x, h_prev);
  Var z = sigmoid(gate(p, cell.w_z, cell.u_z, cell.b_z, x, h_prev));
  Var r = sigmoid(gate(p, cell.w_r, cell.u_r, cell.b_r, x, h_prev));
  Var cand = tanh(add(add(matmul(x, p(cell.w_h)), matmul(mul(r, h_prev), p(cell.u_h))), p(cell.b_h)));
  return add(mul(one_minus(z), h_prev), mul(z, cand));
}

std::pair<Var, Var> lstm_step(Binding& p, const LstmCell& cell, const Var& x, const Var& h_prev, const Var& c_prev) {
  check_step_shapes("lstm_step", cell.d_in, cell.d_h, x, h_prev);
  if (c_prev.shape() != Shape{cell.d_h})
    EMPGAN_THROW(DimensionError, "lstm_step: cell state " << shape_str(c_prev.shape()) << " vs hidden " << cell.d_h);
  Var i = sigmoid(gate(p, cell.w[0], cell.u[0], cell.b[0], x, h_prev));
  Var f = sigmoid(gate(p, cell.w[1], cell.u[1], cell.b[1], x, h_prev));
  Var o = sigmoid(gate(p, cell.w[2], cell.u[2], cell.b[2], x, h_prev));
  Var g = tanh(gate(p, cell.w[3], cell.u[3], cell.b[3], x, h_prev));
  Var c = add(mul(f, c_prev), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

EncoderOutput encode_sequence(Binding& p, const GruCell& cell, const Var& embeddings, const Var& h0) {
  if (embeddings.value().rank() != 2 || embeddings.value().rows() == 0)
    EMPGAN_THROW(ContractError, "encode_sequence: empty or non-matrix input " << shape_str(embeddings.shape()));
  std::vector<Var> states;
  Var h = h0;
  for (std::size_t t = 0; t < embeddings.value().rows(); ++t) {
    h = gru_step(p, cell, row(embeddings, t), h);
    states.push_back(h);
  }
  return {stack(states), h};
}

EncoderOutput encode_sequence(Binding& p, const LstmCell& cell, const Var& embeddings, const Var& h0) {
  if (embeddings.value().rank() != 2 || embeddings.value().rows() == 0)
    EMPGAN_THROW(ContractError, "encode_sequence: empty or non-matrix input " << shape_str(embeddings.shape()));
  std::vector<Var> states;
  Var h = h0;
  Var c = zeros(p.tape(), cell.d_h);
  for (std::size_t t = 0; t < embeddings.value().rows(); ++t) {
    std::tie(h, c) = lstm_step(p, cell, row(embeddings, t), h, c);
    states.push_back(h);
  }
  return {stack(states), h};
}

Var hierarchical_encode(Binding& p, const GruCell& turn_cell, const GruCell& context_cell,
                        const std::vector<Var>& turns) {
  if (turns.empty()) throw ContractError("hierarchical_encode: no turns");
  Tape& tape = p.tape();
  std::vector<Var> rows;
  Var ctx = zeros(tape, context_cell.d_h);
  for (const Var& turn : turns) {
    Var final = encode_sequence(p, turn_cell, turn, zeros(tape, turn_cell.d_h)).final;
    ctx = gru_step(p, context_cell, final, ctx);
    rows.push_back(ctx);
  }
  return stack(rows);
}

}  // namespace empgan
