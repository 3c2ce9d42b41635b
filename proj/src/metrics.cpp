// SPDX-License-Identifier: Apache-2.0
#include "empgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "empgan/error.hpp"

namespace empgan {

namespace {

using NGram = std::vector<std::string>;

std::map<NGram, std::size_t> ngram_counts(const Sentence& s, int n) {
  std::map<NGram, std::size_t> out;
  if (static_cast<int>(s.size()) < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[NGram(s.begin() + i, s.begin() + i + n)];
  return out;
}

std::size_t clipped_overlap(const std::map<NGram, std::size_t>& hyp, const std::map<NGram, std::size_t>& ref) {
  std::size_t o = 0;
  for (const auto& [g, c] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) o += std::min(c, it->second);
  }
  return o;
}

Prf make_prf(double overlap, double hyp_total, double ref_total) {
  Prf r;
  r.p = hyp_total > 0 ? overlap / hyp_total : 0.0;
  r.r = ref_total > 0 ? overlap / ref_total : 0.0;
  r.f = r.p + r.r > 0 ? 2.0 * r.p * r.r / (r.p + r.r) : 0.0;
  return r;
}

}  // namespace

double bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, int max_n) {
  if (hyps.size() != refs.size())
    EMPGAN_THROW(ContractError, "bleu: " << hyps.size() << " hypotheses for " << refs.size() << " references");
  if (refs.empty()) throw ContractError("bleu: no references");
  if (max_n < 1) throw ContractError("bleu: max_n must be positive");
  std::size_t hyp_len = 0, ref_len = 0;
  std::vector<double> match(max_n, 0.0), total(max_n, 0.0);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += hyps[i].size();
    ref_len += refs[i].size();
    for (int n = 1; n <= max_n; ++n) {
      auto h = ngram_counts(hyps[i], n);
      auto r = ngram_counts(refs[i], n);
      match[n - 1] += static_cast<double>(clipped_overlap(h, r));
      if (static_cast<int>(hyps[i].size()) >= n) total[n - 1] += static_cast<double>(hyps[i].size() - n + 1);
    }
  }
  if (hyp_len == 0 || match[0] == 0.0) return 0.0;
  double log_p = 0.0;
  for (int n = 0; n < max_n; ++n) {
    double m = match[n], t = total[n];
    if (n > 0) m += 1.0, t += 1.0;
    log_p += std::log(m / t) / max_n;
  }
  double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_p);
}

double distinct_n(const std::vector<Sentence>& hyps, int n) {
  if (n < 1) throw ContractError("distinct_n: n must be positive");
  std::set<NGram> unique;
  std::size_t total = 0;
  for (const auto& h : hyps) {
    if (static_cast<int>(h.size()) < n) continue;
    for (std::size_t i = 0; i + n <= h.size(); ++i) {
      unique.insert(NGram(h.begin() + i, h.begin() + i + n));
      ++total;
    }
  }
  return total ? static_cast<double>(unique.size()) / static_cast<double>(total) : 0.0;
}

Prf rouge_n(const Sentence& hyp, const Sentence& ref, int n) {
  if (n < 1) throw ContractError("rouge_n: n must be positive");
  auto h = ngram_counts(hyp, n);
  auto r = ngram_counts(ref, n);
  double ht = hyp.size() >= static_cast<std::size_t>(n) ? static_cast<double>(hyp.size() - n + 1) : 0.0;
  double rt = ref.size() >= static_cast<std::size_t>(n) ? static_cast<double>(ref.size() - n + 1) : 0.0;
  return make_prf(static_cast<double>(clipped_overlap(h, r)), ht, rt);
}

Prf rouge_l(const Sentence& hyp, const Sentence& ref) {
  std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j)
      cur[j] = hyp[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return make_prf(static_cast<double>(prev[ref.size()]), static_cast<double>(hyp.size()),
                  static_cast<double>(ref.size()));
}

EvalReport evaluate(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  EvalReport r;
  r.bleu = bleu(hyps, refs);
  r.distinct1 = distinct_n(hyps, 1);
  r.distinct2 = distinct_n(hyps, 2);
  const double n = static_cast<double>(hyps.size());
  auto acc = [n](Prf& into, const Prf& x) {
    into.f += x.f / n;
    into.p += x.p / n;
    into.r += x.r / n;
  };
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    acc(r.rouge1, rouge_n(hyps[i], refs[i], 1));
    acc(r.rouge2, rouge_n(hyps[i], refs[i], 2));
    acc(r.rouge_l, rouge_l(hyps[i], refs[i]));
  }
  return r;
}

std::string format_report(const EvalReport& r, const std::string& model) {
  std::string out =
      "Model\tBLEU\tD-1\tD-2\tROUGE-1 F\tROUGE-1 P\tROUGE-1 R\tROUGE-2 F\tROUGE-2 P\tROUGE-2 R\tROUGE-L F\tROUGE-L P\t"
      "ROUGE-L R\n";
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  out += model;
  for (double v : {r.bleu, r.distinct1, r.distinct2, r.rouge1.f, r.rouge1.p, r.rouge1.r, r.rouge2.f, r.rouge2.p,
                   r.rouge2.r, r.rouge_l.f, r.rouge_l.p, r.rouge_l.r})
    out += "\t" + pct(v);
  return out + "\n";
}

}  // namespace empgan
