// SPDX-License-Identifier: Apache-2.0
//
// GRU/LSTM cells whose weights live in a ParamSet, plus the flat and
// hierarchical sequence encoders built from them. Row-vector convention:
// gates are computed as x·W + h·U + b with W (d_in×d_h) and U (d_h×d_h).
#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "empgan/params.hpp"

namespace empgan {

inline constexpr double kInitRange = 0.08;

struct GruCell {
  std::size_t d_in = 0, d_h = 0;
  std::size_t w_z = 0, w_r = 0, w_h = 0;
  std::size_t u_z = 0, u_r = 0, u_h = 0;
  std::size_t b_z = 0, b_r = 0, b_h = 0;

  static GruCell create(ParamSet& ps, const std::string& prefix, std::size_t d_in, std::size_t d_h,
                        std::mt19937_64& rng);
};

struct LstmCell {
  std::size_t d_in = 0, d_h = 0;
  // gate order: input, forget, output, candidate
  std::size_t w[4]{}, u[4]{}, b[4]{};

  static LstmCell create(ParamSet& ps, const std::string& prefix, std::size_t d_in, std::size_t d_h,
                         std::mt19937_64& rng);
};

struct EncoderOutput {
  Var states;  // T × d_h
  Var final;   // d_h, equal to the last row of states
};

/// z=σ(xW_z+hU_z+b_z), r=σ(xW_r+hU_r+b_r), h̃=tanh(xW_h+(r⊙h)U_h+b_h),
/// h'=(1−z)⊙h+z⊙h̃
Var gru_step(Binding& p, const GruCell& cell, const Var& x, const Var& h_prev);

std::pair<Var, Var> lstm_step(Binding& p, const LstmCell& cell, const Var& x, const Var& h_prev, const Var& c_prev);

/// Left-to-right GRU over the rows of `embeddings` starting from `h0`.
EncoderOutput encode_sequence(Binding& p, const GruCell& cell, const Var& embeddings, const Var& h0);
EncoderOutput encode_sequence(Binding& p, const LstmCell& cell, const Var& embeddings, const Var& h0);

/// Encodes each turn with `turn_cell` (from zeros) and feeds the turn finals
/// through `context_cell`; row i of the result is the context state after turn i.
Var hierarchical_encode(Binding& p, const GruCell& turn_cell, const GruCell& context_cell,
                        const std::vector<Var>& turns);

Var zeros(Tape& tape, std::size_t n);

}  // namespace empgan
