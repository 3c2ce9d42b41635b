// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace empgan {

enum class EmotionLabel : int { Anger = 0, Disgust, Fear, Happiness, Sadness, Surprise, Neutral };
inline constexpr int kNumLabels = 7;

std::string_view label_name(EmotionLabel label);
/// Accepts the category names case-insensitively; throws DataError otherwise.
EmotionLabel parse_label(std::string_view name);
const std::array<EmotionLabel, kNumLabels>& all_labels();

struct Turn {
  std::vector<std::string> tokens;
  std::vector<std::string> emotion_words;
  EmotionLabel label = EmotionLabel::Neutral;
};

struct Dialogue {
  std::vector<Turn> turns;
};

/// Lowercase, deduplicated word set (emotion lexicon plus adjective list).
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(const std::vector<std::string>& words);

  /// One word per line, '#' starts a comment line. Files are merged by union.
  static Lexicon load(const std::vector<std::filesystem::path>& files);
  void merge(const Lexicon& other);
  bool contains(std::string_view word) const;
  std::size_t size() const { return words_.size(); }
  const std::set<std::string, std::less<>>& words() const { return words_; }

 private:
  std::set<std::string, std::less<>> words_;
};

std::string to_lower(std::string_view s);
/// Whitespace split of a pre-tokenized line, lowercased.
std::vector<std::string> tokenize(std::string_view text);

/// Lexicon members among `tokens` in original order, duplicates kept.
std::vector<std::string> extract_emotion_words(const std::vector<std::string>& tokens, const Lexicon& lexicon);

/// Parses one corpus line: {"turns":[{"text":..,"emotion_words":[..],"label":..}]}.
/// `line_no` is only used in error messages.
Dialogue parse_dialogue(std::string_view json_line, const Lexicon& lexicon, std::size_t line_no = 0,
                        std::size_t min_turns = 3);
std::string dialogue_to_json(const Dialogue& d);
std::vector<Dialogue> load_corpus(const std::filesystem::path& path, const Lexicon& lexicon,
                                  std::size_t min_turns = 3);

struct Split {
  std::vector<std::size_t> train, valid, test;  // indices into the input
};

/// Seeded shuffle, then 10/12 : 1/12 : 1/12 with the remainder in train.
Split split_dataset(std::size_t num_dialogues, std::uint64_t seed);

enum class VocabMode { Generic, Emotion };

class Vocabulary {
 public:
  static constexpr int kPad = 0, kUnk = 1, kBos = 2, kEos = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();
  /// Tokens after the reserved ids, in id order.
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int id(std::string_view token) const;  // UNK when absent
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Id order, one token per line (reserved ids included).
  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);
  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> ids_;
};

/// Frequency-descending then lexicographic after the reserved ids.
/// Emotion mode counts only each turn's emotion words.
Vocabulary build_vocab(const std::vector<Dialogue>& corpus, VocabMode mode, std::size_t min_count = 1);

struct Example {
  std::vector<std::vector<int>> context;          // M turns of generic ids
  std::vector<std::vector<int>> context_emotion;  // M emotion-word id sequences (never empty)
  std::vector<int> labels;                        // M label ids
  std::vector<int> target;                        // BOS y_1..y_T EOS
  std::vector<std::string> target_tokens;
  std::vector<int> target_emotion;                // emotion words of U_{M+1} (never empty)
  int target_label = 0;
  std::vector<int> feedback;                      // U_{M+2} ids
  std::vector<int> feedback_emotion;              // never empty
  int feedback_label = 0;
};

struct ExampleStats {
  std::size_t built = 0;
  std::size_t skipped = 0;
};

/// Emotion-word ids with the empty sequence replaced by a single UNK placeholder.
std::vector<int> encode_emotion_words(const Vocabulary& emo_vocab, const std::vector<std::string>& words);

/// Context U_1..U_M, target U_{M+1}, feedback U_{M+2}. Returns nullopt (and
/// bumps stats.skipped) when the dialogue is too short.
std::optional<Example> make_example(const Dialogue& d, std::size_t m, const Vocabulary& vocab,
                                    const Vocabulary& emo_vocab, ExampleStats* stats = nullptr);

/// Every prefix length M = 1..L-2 of every dialogue.
std::vector<Example> make_examples(const std::vector<Dialogue>& dialogues, const Vocabulary& vocab,
                                   const Vocabulary& emo_vocab, ExampleStats* stats = nullptr);

/// Every turn of `d` as context, for generation. Target and feedback are
/// placeholders.
Example context_example(const Dialogue& d, const Vocabulary& vocab, const Vocabulary& emo_vocab);

/// For each generic id: -1 when the token is not a lexicon word, otherwise its
/// emotion-vocabulary id (UNK for lexicon words outside the vocabulary).
std::vector<int> emotion_id_map(const Vocabulary& vocab, const Vocabulary& emo_vocab, const Lexicon& lexicon);

}  // namespace empgan
