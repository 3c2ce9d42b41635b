// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace empgan {

using Sentence = std::vector<std::string>;

struct Prf {
  double f = 0.0, p = 0.0, r = 0.0;
};

struct EvalReport {
  double bleu = 0.0;
  double distinct1 = 0.0, distinct2 = 0.0;
  Prf rouge1, rouge2, rouge_l;
};

/// Corpus BLEU: geometric mean of clipped n-gram precisions (n = 1..max_n)
/// times the brevity penalty. Orders n >= 2 use add-one smoothing.
double bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references, int max_n = 4);

/// Unique n-grams over all hypotheses divided by the total n-gram count.
double distinct_n(const std::vector<Sentence>& hypotheses, int n);

Prf rouge_n(const Sentence& hypothesis, const Sentence& reference, int n);
Prf rouge_l(const Sentence& hypothesis, const Sentence& reference);

/// ROUGE scores are per-example means.
EvalReport evaluate(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

/// Tab-separated table: header row then one row, values as percentages with
/// two decimals (7.67 means 0.0767).
std::string format_report(const EvalReport& r, const std::string& model = "model");

}  // namespace empgan
