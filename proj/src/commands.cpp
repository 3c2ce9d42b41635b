// SPDX-License-Identifier: Apache-2.0
#include "empgan/commands.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "empgan/error.hpp"
#include "empgan/training.hpp"

namespace empgan {

namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) s += (i ? " " : "") + words[i];
  return s;
}

Vocabulary read_vocab(const fs::path& p) {
  std::string body;
  for (const auto& l : read_artifact_lines(p)) body += l + "\n";
  return Vocabulary::deserialize(body);
}

std::vector<std::size_t> read_manifest(const fs::path& p, std::size_t corpus_size) {
  std::vector<std::size_t> out;
  std::size_t k = 0;
  for (const auto& l : read_artifact_lines(p)) {
    ++k;
    if (l.empty()) continue;
    std::size_t n = 0;
    try {
      n = std::stoul(l);
    } catch (const std::exception&) {
      EMPGAN_THROW(DataError, p.string() << ":" << k << ": expected a dialogue number, got '" << l << "'");
    }
    if (n < 1 || n > corpus_size)
      EMPGAN_THROW(DataError, p.string() << ":" << k << ": dialogue " << n << " outside 1.." << corpus_size);
    out.push_back(n - 1);
  }
  return out;
}

std::vector<Dialogue> pick(const std::vector<Dialogue>& all, const std::vector<std::size_t>& idx) {
  std::vector<Dialogue> out;
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

void check_vocab_match(const Vocabulary& ckpt, const Vocabulary& data, const std::string& where) {
  if (ckpt == data) return;
  std::size_t k = 0;
  while (k < ckpt.size() && k < data.size() && ckpt.token(static_cast<int>(k)) == data.token(static_cast<int>(k))) ++k;
  EMPGAN_THROW(DataError, "vocabulary mismatch: checkpoint has " << ckpt.size() << " tokens, " << where << " has "
                                                                 << data.size() << " (first difference at id " << k
                                                                 << ")");
}

}  // namespace

std::string config_header(const RunConfig& rc) {
  std::string out;
  std::istringstream in(rc.to_text());
  std::string line;
  while (std::getline(in, line)) out += "#\t" + line + "\n";
  return out;
}

std::vector<std::string> read_artifact_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) EMPGAN_THROW(DataError, "cannot open " << path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("#\t", 0) == 0) continue;
    out.push_back(line);
  }
  return out;
}

void write_artifact(const fs::path& path, const RunConfig& rc, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) EMPGAN_THROW(ConfigError, "cannot write " << path);
  out << config_header(rc) << body;
  if (!out) EMPGAN_THROW(ConfigError, "short write to " << path);
}

Lexicon load_lexicon(const RunConfig& rc) {
  std::vector<fs::path> files{rc.path("lexicon")};
  auto adj = rc.paths.find("adjectives");
  if (adj != rc.paths.end() && !adj->second.empty()) files.emplace_back(adj->second);
  return Lexicon::load(files);
}

// ---- prepare ----------------------------------------------------------------

PrepareStats cmd_prepare(const RunConfig& rc) {
  Lexicon lex = load_lexicon(rc);
  auto corpus = load_corpus(rc.path("corpus"), lex);
  fs::path out = rc.path("out_dir");
  fs::create_directories(out);

  PrepareStats st;
  st.dialogues = corpus.size();
  for (const auto& d : corpus)
    for (const auto& t : d.turns) {
      ++st.turns;
      st.emotion_words += t.emotion_words.size();
      ++st.labels[static_cast<std::size_t>(t.label)];
    }
  st.split = split_dataset(corpus.size(), rc.train.seed);
  auto train = pick(corpus, st.split.train);
  Vocabulary vocab = build_vocab(train, VocabMode::Generic, rc.train.min_count);
  Vocabulary emo = build_vocab(train, VocabMode::Emotion, rc.train.min_count);
  st.vocab = vocab.size();
  st.emo_vocab = emo.size();

  auto manifest = [](const std::vector<std::size_t>& idx) {
    std::string s;
    for (std::size_t i : idx) s += std::to_string(i + 1) + "\n";
    return s;
  };
  write_artifact(out / "train.txt", rc, manifest(st.split.train));
  write_artifact(out / "valid.txt", rc, manifest(st.split.valid));
  write_artifact(out / "test.txt", rc, manifest(st.split.test));
  write_artifact(out / "vocab.txt", rc, vocab.serialize());
  write_artifact(out / "emo_vocab.txt", rc, emo.serialize());

  std::ostringstream s;
  s << "dialogues\t" << st.dialogues << "\n"
    << "turns\t" << st.turns << "\n"
    << "emotion_words\t" << st.emotion_words << "\n"
    << "train\t" << st.split.train.size() << "\n"
    << "valid\t" << st.split.valid.size() << "\n"
    << "test\t" << st.split.test.size() << "\n"
    << "vocab\t" << st.vocab << "\n"
    << "emo_vocab\t" << st.emo_vocab << "\n";
  for (EmotionLabel l : all_labels()) s << "label." << label_name(l) << "\t" << st.labels[static_cast<std::size_t>(l)] << "\n";
  write_artifact(out / "stats.txt", rc, s.str());
  return st;
}

// ---- train --------------------------------------------------------------------

TrainSummary cmd_train(const RunConfig& rc, std::ostream* progress) {
  Lexicon lex = load_lexicon(rc);
  auto corpus = load_corpus(rc.path("corpus"), lex);
  fs::path data = rc.path("data_dir");
  fs::path out = rc.path("out_dir");
  fs::create_directories(out);
  Vocabulary vocab = read_vocab(data / "vocab.txt");
  Vocabulary emo = read_vocab(data / "emo_vocab.txt");
  auto train = make_examples(pick(corpus, read_manifest(data / "train.txt", corpus.size())), vocab, emo);
  auto valid = make_examples(pick(corpus, read_manifest(data / "valid.txt", corpus.size())), vocab, emo);
  if (train.empty()) throw DataError("no training examples in " + (data / "train.txt").string());

  auto resume = rc.paths.find("resume");
  const bool resuming = resume != rc.paths.end() && !resume->second.empty();
  Trainer tr = resuming ? Trainer::load(resume->second, lex, train) : Trainer(rc.train, vocab, emo, lex, train);
  if (resuming) check_vocab_match(tr.vocab(), vocab, (data / "vocab.txt").string());

  std::ofstream log(out / "train.log", resuming ? std::ios::app : std::ios::trunc);
  if (!resuming) log << config_header(rc) << log_header() << "\n";
  tr.log = &log;

  TrainSummary sum;
  sum.best = out / "best.ckpt";
  sum.last = out / "last.ckpt";
  const auto& eval_set = valid.empty() ? train : valid;
  sum.best_valid_ce = tr.per_token_ce(eval_set);
  if (!resuming || !fs::exists(sum.best)) tr.save(sum.best);
  const std::size_t epochs = rc.train.epochs;
  while (tr.current_epoch() < epochs) {
    auto recs = tr.run_epoch();
    double ce = tr.per_token_ce(eval_set);
    sum.last_train_ce = recs.back().per_token_ce;
    if (progress)
      *progress << "epoch " << tr.current_epoch() << "/" << epochs << " steps " << tr.global_step() << " valid_ce " << ce
                << "\n";
    if (ce < sum.best_valid_ce) {
      sum.best_valid_ce = ce;
      tr.save(sum.best);
    }
    tr.save(sum.last);
  }
  if (!fs::exists(sum.last)) tr.save(sum.last);
  sum.steps = tr.global_step();
  return sum;
}

// ---- generate ---------------------------------------------------------------

std::size_t cmd_generate(const RunConfig& rc, DecodeMode mode) {
  LoadedModel m = load_model(rc.path("checkpoint"));
  auto data = rc.paths.find("data_dir");
  if (data != rc.paths.end() && !data->second.empty()) {
    fs::path v = fs::path(data->second) / "vocab.txt";
    check_vocab_match(m.vocab, read_vocab(v), v.string());
  }
  Lexicon lex;
  if (rc.paths.count("lexicon")) lex = load_lexicon(rc);
  auto contexts = load_corpus(rc.path("context"), lex, 1);
  const std::size_t max_len = rc.train.max_len;
  std::string body;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    Example ex = context_example(contexts[i], m.vocab, m.emo_vocab);
    auto ids = generate(*m.generator, ex, max_len, mode, rc.train.seed + i);
    if (!ids.empty() && ids.back() == Vocabulary::kEos) ids.pop_back();
    body += join(m.vocab.decode(ids)) + "\n";
  }
  fs::path out = rc.path("out");
  if (contexts.empty()) {
    std::ofstream(out, std::ios::trunc);
    return 0;
  }
  write_artifact(out, rc, body);
  return contexts.size();
}

// ---- evaluate -----------------------------------------------------------------

EvalReport cmd_evaluate(const RunConfig& rc) {
  auto hyp_lines = read_artifact_lines(rc.path("hyp"));
  auto ref_lines = read_artifact_lines(rc.path("ref"));
  if (hyp_lines.size() != ref_lines.size())
    EMPGAN_THROW(ContractError, "evaluate: " << hyp_lines.size() << " hypotheses but " << ref_lines.size()
                                             << " references");
  std::vector<Sentence> hyps, refs;
  for (const auto& l : hyp_lines) hyps.push_back(tokenize(l));
  for (const auto& l : ref_lines) refs.push_back(tokenize(l));
  EvalReport r = evaluate(hyps, refs);
  auto out = rc.paths.find("out");
  if (out != rc.paths.end() && !out->second.empty()) write_artifact(out->second, rc, format_report(r));
  return r;
}

// ---- gradcheck ----------------------------------------------------------------

bool cmd_gradcheck(const SuiteOptions& opts, std::ostream& out) {
  auto results = run_gradcheck_suite(opts);
  out << format_gradcheck_report(results, opts.check.tol);
  bool ok = !results.empty();
  double worst = 0.0, seconds = 0.0;
  for (const auto& r : results) {
    ok = ok && r.report.max_rel_err < opts.check.tol;
    worst = std::max(worst, r.report.max_rel_err);
    seconds += r.seconds;
  }
  out << "# checks " << results.size() << " max_rel_err " << worst << " tol " << opts.check.tol << " seconds "
      << seconds << " " << (ok ? "PASS" : "FAIL") << "\n";
  return ok;
}

}  // namespace empgan
