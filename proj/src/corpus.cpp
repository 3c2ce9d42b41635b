// SPDX-License-Identifier: Apache-2.0
#include "empgan/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "empgan/error.hpp"

namespace empgan {

namespace {
constexpr std::array<std::string_view, kNumLabels> kLabelNames = {"Anger",   "Disgust",  "Fear",   "Happiness",
                                                                  "Sadness", "Surprise", "Neutral"};
}

std::string_view label_name(EmotionLabel label) { return kLabelNames.at(static_cast<int>(label)); }

EmotionLabel parse_label(std::string_view name) {
  std::string lower = to_lower(name);
  for (int i = 0; i < kNumLabels; ++i)
    if (to_lower(kLabelNames[i]) == lower) return static_cast<EmotionLabel>(i);
  EMPGAN_THROW(DataError, "unknown emotion label '" << name << "'");
}

const std::array<EmotionLabel, kNumLabels>& all_labels() {
  static const std::array<EmotionLabel, kNumLabels> labels = {
      EmotionLabel::Anger,   EmotionLabel::Disgust,  EmotionLabel::Fear,   EmotionLabel::Happiness,
      EmotionLabel::Sadness, EmotionLabel::Surprise, EmotionLabel::Neutral};
  return labels;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(to_lower(tok));
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon

Lexicon::Lexicon(const std::vector<std::string>& words) {
  for (const auto& w : words)
    if (!w.empty()) words_.insert(to_lower(w));
}

Lexicon Lexicon::load(const std::vector<std::filesystem::path>& files) {
  Lexicon lex;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) EMPGAN_THROW(DataError, "cannot open lexicon file " << f);
    std::string line;
    while (std::getline(in, line)) {
      auto toks = tokenize(line);
      if (toks.empty() || toks.front().starts_with('#')) continue;
      lex.words_.insert(toks.front());
    }
  }
  return lex;
}

void Lexicon::merge(const Lexicon& other) { words_.insert(other.words_.begin(), other.words_.end()); }

bool Lexicon::contains(std::string_view word) const { return words_.find(word) != words_.end(); }

std::vector<std::string> extract_emotion_words(const std::vector<std::string>& tokens, const Lexicon& lexicon) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    std::string lower = to_lower(t);
    if (lexicon.contains(lower)) out.push_back(std::move(lower));
  }
  return out;
}

// ---------------------------------------------------------------------------
// corpus files

Dialogue parse_dialogue(std::string_view json_line, const Lexicon& lexicon, std::size_t line_no,
                        std::size_t min_turns) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_line);
  } catch (const json::exception& e) {
    EMPGAN_THROW(DataError, "line " << line_no << ": malformed dialogue: " << e.what());
  }
  if (!j.is_object() || !j.contains("turns") || !j["turns"].is_array())
    EMPGAN_THROW(DataError, "line " << line_no << ": dialogue object must have a 'turns' array");
  Dialogue d;
  std::size_t k = 0;
  for (const auto& jt : j["turns"]) {
    ++k;
    if (!jt.is_object() || !jt.contains("text") || !jt["text"].is_string() || !jt.contains("label") ||
        !jt["label"].is_string())
      EMPGAN_THROW(DataError, "line " << line_no << ", turn " << k << ": needs string fields 'text' and 'label'");
    Turn t;
    t.tokens = tokenize(jt["text"].get<std::string>());
    if (t.tokens.empty()) EMPGAN_THROW(DataError, "line " << line_no << ", turn " << k << ": empty text");
    try {
      t.label = parse_label(jt["label"].get<std::string>());
    } catch (const DataError& e) {
      EMPGAN_THROW(DataError, "line " << line_no << ", turn " << k << ": " << e.what());
    }
    if (jt.contains("emotion_words") && !jt["emotion_words"].is_null()) {
      if (!jt["emotion_words"].is_array())
        EMPGAN_THROW(DataError, "line " << line_no << ", turn " << k << ": 'emotion_words' must be a list");
      for (const auto& w : jt["emotion_words"]) {
        if (!w.is_string()) EMPGAN_THROW(DataError, "line " << line_no << ", turn " << k << ": non-string emotion word");
        std::string lw = to_lower(w.get<std::string>());
        if (std::find(t.tokens.begin(), t.tokens.end(), lw) == t.tokens.end())
          EMPGAN_THROW(DataError, "line " << line_no << ", turn " << k << ": emotion word '" << lw
                                          << "' does not occur in the turn");
        t.emotion_words.push_back(std::move(lw));
      }
    } else {
      t.emotion_words = extract_emotion_words(t.tokens, lexicon);
    }
    d.turns.push_back(std::move(t));
  }
  if (d.turns.size() < min_turns)
    EMPGAN_THROW(DataError, "line " << line_no << ": dialogue has " << d.turns.size() << " turns, at least "
                                    << min_turns << " required");
  return d;
}

std::string dialogue_to_json(const Dialogue& d) {
  using nlohmann::json;
  json turns = json::array();
  for (const auto& t : d.turns) {
    std::string text;
    for (const auto& tok : t.tokens) text += (text.empty() ? "" : " ") + tok;
    turns.push_back({{"text", text}, {"emotion_words", t.emotion_words}, {"label", std::string(label_name(t.label))}});
  }
  return json{{"turns", turns}}.dump();
}

std::vector<Dialogue> load_corpus(const std::filesystem::path& path, const Lexicon& lexicon, std::size_t min_turns) {
  std::ifstream in(path);
  if (!in) EMPGAN_THROW(DataError, "cannot open corpus file " << path);
  std::vector<Dialogue> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_dialogue(line, lexicon, line_no, min_turns));
    } catch (const DataError& e) {
      EMPGAN_THROW(DataError, path.string() << ": " << e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// splits

Split split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 12) EMPGAN_THROW(ConfigError, "split_dataset needs at least 12 dialogues, got " << n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Fisher-Yates with rejection sampling so the permutation does not depend
  // on the standard library's distribution implementation.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uint64_t bound = i + 1;
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do r = rng();
    while (r >= limit);
    std::swap(order[i], order[r % bound]);
  }
  std::size_t held = n / 12;
  Split s;
  s.train.assign(order.begin(), order.end() - 2 * held);
  s.valid.assign(order.end() - 2 * held, order.end() - held);
  s.test.assign(order.end() - held, order.end());
  return s;
}

// ---------------------------------------------------------------------------
// vocabulary

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  tokens_ = {"<pad>", "<unk>", "<bos>", "<eos>"};
  for (const auto& t : tokens) {
    if (ids_.count(t) || t == "<pad>" || t == "<unk>" || t == "<bos>" || t == "<eos>")
      EMPGAN_THROW(DataError, "duplicate vocabulary token '" << t << "'");
    tokens_.push_back(t);
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_[tokens_[i]] = static_cast<int>(i);
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    EMPGAN_THROW(DataError, "token id " << id << " outside vocabulary of size " << tokens_.size());
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const { return ids_.find(token) != ids_.end(); }

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) out += t + "\n";
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> toks;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (n++ < kReserved) continue;
    toks.push_back(line);
  }
  if (n < kReserved) throw DataError("vocabulary file is missing the reserved tokens");
  return Vocabulary(toks);
}

Vocabulary build_vocab(const std::vector<Dialogue>& corpus, VocabMode mode, std::size_t min_count) {
  if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& d : corpus)
    for (const auto& t : d.turns)
      for (const auto& w : mode == VocabMode::Generic ? t.tokens : t.emotion_words) ++counts[w];
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> toks;
  for (const auto& [w, c] : items)
    if (c >= min_count) toks.push_back(w);
  return Vocabulary(toks);
}

// ---------------------------------------------------------------------------
// examples

std::vector<int> encode_emotion_words(const Vocabulary& emo_vocab, const std::vector<std::string>& words) {
  if (words.empty()) return {Vocabulary::kUnk};
  return emo_vocab.encode(words);
}

std::optional<Example> make_example(const Dialogue& d, std::size_t m, const Vocabulary& vocab,
                                    const Vocabulary& emo_vocab, ExampleStats* stats) {
  if (m < 1 || d.turns.size() < m + 2) {
    if (stats) ++stats->skipped;
    return std::nullopt;
  }
  Example ex;
  for (std::size_t i = 0; i < m; ++i) {
    const Turn& t = d.turns[i];
    ex.context.push_back(vocab.encode(t.tokens));
    ex.context_emotion.push_back(encode_emotion_words(emo_vocab, t.emotion_words));
    ex.labels.push_back(static_cast<int>(t.label));
  }
  const Turn& gold = d.turns[m];
  ex.target.push_back(Vocabulary::kBos);
  for (int id : vocab.encode(gold.tokens)) ex.target.push_back(id);
  ex.target.push_back(Vocabulary::kEos);
  ex.target_tokens = gold.tokens;
  ex.target_emotion = encode_emotion_words(emo_vocab, gold.emotion_words);
  ex.target_label = static_cast<int>(gold.label);
  const Turn& fb = d.turns[m + 1];
  ex.feedback = vocab.encode(fb.tokens);
  ex.feedback_emotion = encode_emotion_words(emo_vocab, fb.emotion_words);
  ex.feedback_label = static_cast<int>(fb.label);
  if (stats) ++stats->built;
  return ex;
}

Example context_example(const Dialogue& d, const Vocabulary& vocab, const Vocabulary& emo_vocab) {
  if (d.turns.empty()) throw DataError("context_example: dialogue has no turns");
  Example ex;
  for (const Turn& t : d.turns) {
    ex.context.push_back(vocab.encode(t.tokens));
    ex.context_emotion.push_back(encode_emotion_words(emo_vocab, t.emotion_words));
    ex.labels.push_back(static_cast<int>(t.label));
  }
  ex.target = {Vocabulary::kBos, Vocabulary::kEos};
  ex.target_emotion = {Vocabulary::kUnk};
  ex.feedback = {Vocabulary::kUnk};
  ex.feedback_emotion = {Vocabulary::kUnk};
  ex.target_label = ex.feedback_label = static_cast<int>(EmotionLabel::Neutral);
  return ex;
}

std::vector<Example> make_examples(const std::vector<Dialogue>& dialogues, const Vocabulary& vocab,
                                   const Vocabulary& emo_vocab, ExampleStats* stats) {
  std::vector<Example> out;
  for (const auto& d : dialogues) {
    if (d.turns.size() < 3) {
      if (stats) ++stats->skipped;
      continue;
    }
    for (std::size_t m = 1; m + 2 <= d.turns.size(); ++m)
      if (auto ex = make_example(d, m, vocab, emo_vocab, stats)) out.push_back(std::move(*ex));
  }
  return out;
}

std::vector<int> emotion_id_map(const Vocabulary& vocab, const Vocabulary& emo_vocab, const Lexicon& lexicon) {
  std::vector<int> out(vocab.size(), -1);
  for (std::size_t i = Vocabulary::kReserved; i < vocab.size(); ++i)
    if (lexicon.contains(vocab.token(static_cast<int>(i)))) out[i] = emo_vocab.id(vocab.token(static_cast<int>(i)));
  return out;
}

}  // namespace empgan
