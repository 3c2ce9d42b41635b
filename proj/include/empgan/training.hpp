// SPDX-License-Identifier: Apache-2.0
//
// Optimisation and the adversarial schedule. A run is a sequence of global
// steps; step s trains on batch (s mod steps_per_epoch) of epoch
// (s / steps_per_epoch), and every random draw in that step comes from a
// generator seeded with (seed, s). Resuming from a checkpoint written after
// step k therefore replays steps k+1.. exactly.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "empgan/checkpoint.hpp"
#include "empgan/config.hpp"
#include "empgan/corpus.hpp"
#include "empgan/discriminator.hpp"
#include "empgan/generator.hpp"

namespace empgan {

struct AdamState {
  std::vector<Tensor> m, v;
  std::uint64_t t = 0;

  static AdamState for_params(const ParamSet& ps);
};

struct AdamHyper {
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  static AdamHyper from_config(const TrainConfig& c) { return {c.lr, c.beta1, c.beta2, c.eps_adam}; }
};

/// One bias-corrected Adam update of a single tensor; `t` is the 1-based step.
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t t, const AdamHyper& h);
/// Advances state.t and updates every parameter.
void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state, const AdamHyper& h);

enum class Phase { Mle, Adversarial };

struct StepRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  Phase phase = Phase::Mle;
  double total = 0.0;       // mean Ψ_g (with adversarial term in phase b)
  double response = 0.0;    // mean teacher-forced response CE
  double emotion = 0.0;
  double label = 0.0;
  double adversarial = 0.0;
  double per_token_ce = 0.0;
  double sem_loss = 0.0, emo_loss = 0.0;
  double sem_margin = 0.0, emo_margin = 0.0;
  double sem_grad_norm = 0.0, emo_grad_norm = 0.0;
  double wall_seconds = 0.0;
};

std::string log_header();
std::string log_line(const StepRecord& r);

/// Gradient norms of individual objective terms on one batch, used to check
/// which pieces each model variant actually trains.
struct TermProbe {
  double mle_grad_norm = 0.0;          // ‖∂Ψ_g(MLE)/∂θ_gen‖
  double adversarial_grad_norm = 0.0;  // ‖∂(λ·adv)/∂θ_gen‖
  double sem_critic_grad_norm = 0.0;   // ‖∂loss_d/∂θ_sem‖
  double emo_critic_grad_norm = 0.0;
  double sem_feedback_grad_norm = 0.0; // ‖∂loss_d/∂ feedback embeddings‖ (semantic critic)
  double sem_penalty = 0.0;            // gradient-penalty value in loss_d
  bool sem_vanilla = false;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, Vocabulary vocab, Vocabulary emo_vocab, Lexicon lexicon, std::vector<Example> train);

  const TrainConfig& config() const { return cfg_; }
  Generator& generator() { return *gen_; }
  const Generator& generator() const { return *gen_; }
  Critic* semantic() { return sem_.get(); }
  Critic* emotional() { return emo_.get(); }
  const Vocabulary& vocab() const { return vocab_; }
  const Vocabulary& emo_vocab() const { return emo_vocab_; }
  const std::vector<Example>& train_examples() const { return train_; }

  std::size_t steps_per_epoch() const;
  std::uint64_t global_step() const { return step_; }
  std::size_t current_epoch() const { return static_cast<std::size_t>(step_ / steps_per_epoch()); }
  bool adversarial_phase(std::size_t epoch) const;

  /// Runs the next global step.
  StepRecord step();
  /// Runs steps until the epoch counter advances.
  std::vector<StepRecord> run_epoch();

  StepRecord mle_step(const std::vector<const Example*>& batch, std::mt19937_64& rng);
  StepRecord adversarial_step(const std::vector<const Example*>& batch, std::mt19937_64& rng);

  std::vector<const Example*> batch_for_step(std::uint64_t step) const;
  std::mt19937_64 rng_for_step(std::uint64_t step, std::uint64_t stream = 0) const;

  /// Mean per-token response cross-entropy in evaluation mode.
  double per_token_ce(const std::vector<Example>& examples) const;

  TermProbe probe_terms(const std::vector<const Example*>& batch);

  NamedTensors state_tensors() const;
  void restore(const NamedTensors& tensors);
  void save(const std::filesystem::path& path) const;
  /// Rebuilds a trainer (config and vocabularies come from the checkpoint).
  static Trainer load(const std::filesystem::path& path, const Lexicon& lexicon, std::vector<Example> train);

  std::ostream* log = nullptr;

 private:
  struct CriticInputs {
    Tensor cand, gold, feedback;  // embedded sequences
  };
  struct ContextFinals {
    Tensor utt, emo, lab;
  };

  CriticInputs semantic_inputs(const Example& ex, const std::vector<int>& generated) const;
  CriticInputs emotional_inputs(const Example& ex, const std::vector<int>& generated) const;
  std::vector<int> emotion_ids_of(const std::vector<int>& generated) const;
  /// Greedy generations and context finals with the current generator.
  void rollout(const std::vector<const Example*>& batch, std::vector<std::vector<int>>& generated,
               std::vector<ContextFinals>& finals) const;
  CriticLoss critic_objective(Binding& p, const Critic& c, const std::vector<CriticInputs>& inputs,
                              const std::vector<ContextFinals>& finals, std::mt19937_64& rng,
                              std::vector<Var>* feedback_leaves = nullptr) const;
  double update_critic(Critic& c, AdamState& st, const std::vector<CriticInputs>& inputs,
                       const std::vector<ContextFinals>& finals, std::mt19937_64& rng, CriticLoss* out);
  Var adversarial_term(Binding& gp, Binding* sem_p, Binding* emo_p, const Example& ex, const ContextBundle& bundle,
                       const ForwardOptions& fo) const;
  ForwardOptions forward_options(std::mt19937_64& rng) const;
  void check_finite(double v, const char* component) const;

  TrainConfig cfg_;
  Vocabulary vocab_, emo_vocab_;
  Lexicon lexicon_;
  std::vector<Example> train_;
  std::vector<int> emo_map_;
  std::unique_ptr<Generator> gen_;
  std::unique_ptr<Critic> sem_, emo_;
  AdamState gen_opt_, sem_opt_, emo_opt_;
  std::uint64_t step_ = 0;
  std::uint64_t adv_steps_ = 0;
};

/// Generator weights, config and vocabularies from a training checkpoint.
struct LoadedModel {
  TrainConfig config;
  Vocabulary vocab, emo_vocab;
  std::unique_ptr<Generator> generator;
};
LoadedModel load_model(const std::filesystem::path& path);

/// MLE-only training for `cfg.epochs` epochs (the EmpG objective). Per-epoch
/// mean losses are appended to `epoch_losses` when given.
Generator pretrain_mle(const TrainConfig& cfg, const Vocabulary& vocab, const Vocabulary& emo_vocab,
                       const Lexicon& lexicon, const std::vector<Example>& data,
                       std::vector<double>* epoch_losses = nullptr);

/// Deterministic Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace empgan
