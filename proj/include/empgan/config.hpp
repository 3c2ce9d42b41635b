// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace empgan {

enum class LabelTarget { Response, LastContextTurn };
enum class EmotionWordTarget { Response, Feedback };

/// The five model variants reachable through ablation flags.
enum class Variant { EmpG, EmpD, EmpWDNext, EmpWD, EmpGAN };

struct Ablation {
  bool emp_g_only = false;     // no critics, no adversarial term
  bool vanilla_gan = false;    // sigmoid + log-loss critic, no gradient penalty
  bool no_feedback = false;    // feedback encoding replaced by zeros
  bool no_emo_critic = false;  // semantic critic only

  bool operator==(const Ablation&) const = default;
};

Ablation ablation_for(Variant v);
Variant variant_of(const Ablation& a);
std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct TrainConfig {
  // model sizes
  std::size_t hidden = 400;
  std::size_t embed = 300;
  std::size_t emo_embed = 200;
  std::size_t label_embed = 100;
  std::vector<std::size_t> conv_widths = {2, 3, 4};
  std::size_t conv_filters = 100;

  // optimisation
  std::size_t batch = 32;
  double dropout = 0.4;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  double clip_norm = 5.0;
  std::size_t epochs = 30;
  std::size_t pretrain_epochs = 20;
  std::uint64_t seed = 1;

  // adversarial schedule
  std::size_t n_critic = 5;
  double sigma = 10.0;
  double lambda_adv = 1.0;
  std::size_t tf_every = 1;
  bool gp_squared = true;
  bool gp_per_step = false;
  Ablation ablation;

  // generator objective
  bool emotion_losses = true;
  LabelTarget label_target = LabelTarget::Response;
  EmotionWordTarget emo_target = EmotionWordTarget::Response;
  std::size_t max_len = 30;

  // data
  std::size_t min_count = 1;

  /// Applies one `key value` setting; throws ConfigError on unknown keys or
  /// unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Throws ConfigError when a value is out of range.
  void validate() const;
  /// Resolved settings as `key = value` lines, sorted by key.
  std::string to_text() const;
  static std::vector<std::string> keys();
};

/// TrainConfig plus the file locations a command needs.
struct RunConfig {
  TrainConfig train;
  std::map<std::string, std::string> paths;  // corpus, lexicon, adjectives, data_dir, out_dir, ...

  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
  std::string path(const std::string& key) const;
  static std::vector<std::string> path_keys();
};

/// Flat `key = value` file, '#' comments, blank lines ignored.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                   const std::string& origin = "<config>");
RunConfig load_run_config(const std::filesystem::path& file);

}  // namespace empgan
