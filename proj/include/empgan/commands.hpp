// SPDX-License-Identifier: Apache-2.0
//
// The command-line operations as library calls. Every text artifact starts
// with the resolved configuration as "#\t" header lines; readers skip them.
#pragma once

#include <array>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "empgan/config.hpp"
#include "empgan/corpus.hpp"
#include "empgan/generator.hpp"
#include "empgan/gradcheck_suite.hpp"
#include "empgan/metrics.hpp"

namespace empgan {

std::string config_header(const RunConfig& rc);
/// Lines of a text artifact without its header.
std::vector<std::string> read_artifact_lines(const std::filesystem::path& path);
void write_artifact(const std::filesystem::path& path, const RunConfig& rc, const std::string& body);

/// Lexicon file plus the optional adjective list.
Lexicon load_lexicon(const RunConfig& rc);

struct PrepareStats {
  std::size_t dialogues = 0;
  std::size_t turns = 0;
  std::size_t emotion_words = 0;
  std::array<std::size_t, kNumLabels> labels{};
  Split split;
  std::size_t vocab = 0, emo_vocab = 0;
};

/// Reads corpus + lexicon, writes train/valid/test manifests (1-based
/// dialogue numbers), vocab.txt, emo_vocab.txt and stats.txt into out_dir.
PrepareStats cmd_prepare(const RunConfig& rc);

struct TrainSummary {
  std::size_t steps = 0;
  double best_valid_ce = 0.0;
  double last_train_ce = 0.0;
  std::filesystem::path best, last;
};

/// Trains on a prepared data_dir; writes best.ckpt, last.ckpt and train.log
/// into out_dir. `resume` continues from a checkpoint.
TrainSummary cmd_train(const RunConfig& rc, std::ostream* progress = nullptr);

/// One response per context line of `context`; returns the number written.
std::size_t cmd_generate(const RunConfig& rc, DecodeMode mode = DecodeMode::Greedy);

EvalReport cmd_evaluate(const RunConfig& rc);

/// Runs the registered gradient checks; writes the per-parameter report.
bool cmd_gradcheck(const SuiteOptions& opts, std::ostream& out);

}  // namespace empgan
