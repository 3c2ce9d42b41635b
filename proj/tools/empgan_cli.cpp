// SPDX-License-Identifier: Apache-2.0
//
//   empgan prepare   --corpus C --lexicon L [--adjectives A] --out_dir D [--seed S]
//   empgan train     --corpus C --lexicon L --data_dir D --out_dir O [--key value ...]
//   empgan generate  --checkpoint K --context F --out O [--mode greedy|sample]
//   empgan evaluate  --hyp H --ref R [--out O]
//   empgan gradcheck [--hidden 8] [--tol 1e-3] [--inject_fault X] [--filter S]
//
// Every command accepts --config FILE (key = value lines); any other
// --key value pair overrides the file. EMPGAN_LOG=quiet|info|debug sets
// verbosity on stderr.
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "empgan/commands.hpp"
#include "empgan/error.hpp"

using namespace empgan;

namespace {

enum class Verbosity { Quiet, Info, Debug };

Verbosity verbosity() {
  const char* v = std::getenv("EMPGAN_LOG");
  if (!v) return Verbosity::Info;
  std::string s = v;
  if (s == "quiet" || s == "0") return Verbosity::Quiet;
  if (s == "debug" || s == "2") return Verbosity::Debug;
  return Verbosity::Info;
}

std::string normalize_key(std::string k) {
  while (!k.empty() && k.front() == '-') k.erase(k.begin());
  for (auto& c : k)
    if (c == '-') c = '_';
  return k;
}

/// Applies the config file, then --key value overrides.
RunConfig resolve(const std::string& config_file, const std::vector<std::string>& extras) {
  RunConfig rc = config_file.empty() ? RunConfig{} : load_run_config(config_file);
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0) EMPGAN_THROW(ConfigError, "unexpected argument '" << a << "'");
    std::string key, value;
    auto eq = a.find('=');
    if (eq != std::string::npos) {
      key = normalize_key(a.substr(0, eq));
      value = a.substr(eq + 1);
    } else {
      key = normalize_key(a);
      if (i + 1 >= extras.size()) EMPGAN_THROW(ConfigError, "option --" << key << " needs a value");
      value = extras[++i];
    }
    rc.set(key, value);
  }
  rc.train.validate();
  return rc;
}

void log_config(const RunConfig& rc) {
  if (verbosity() != Verbosity::Quiet) std::cerr << "resolved config:\n" << config_header(rc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empathetic dialogue generation with interactive adversarial training"};
  app.require_subcommand(1);
  std::string config_file;

  auto sub = [&](const char* name, const char* desc) {
    auto* s = app.add_subcommand(name, desc);
    s->add_option("--config", config_file, "key = value configuration file");
    s->allow_extras();
    return s;
  };
  auto* prepare = sub("prepare", "split the corpus and build vocabularies");
  auto* train = sub("train", "MLE pretraining then adversarial training");
  auto* gen = sub("generate", "generate one response per context line");
  std::string mode = "greedy";
  gen->add_option("--mode", mode, "greedy or sample")->check(CLI::IsMember({"greedy", "sample"}));
  auto* eval = sub("evaluate", "BLEU, Distinct and ROUGE report");
  auto* gc = sub("gradcheck", "finite-difference check of every registered gradient");
  SuiteOptions so;
  gc->add_option("--hidden", so.hidden, "hidden width for model checks");
  gc->add_option("--tol", so.check.tol, "maximum relative error");
  gc->add_option("--eps", so.check.eps, "central-difference step");
  gc->add_option("--inject_fault,--inject-fault", so.check.inject_fault, "offset added to analytic gradients");
  gc->add_option("--filter", so.filter, "run checks whose name contains this");
  gc->add_option("--seed", so.seed, "seed for random inputs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      RunConfig rc = resolve(config_file, prepare->remaining());
      log_config(rc);
      auto st = cmd_prepare(rc);
      if (verbosity() != Verbosity::Quiet)
        std::cerr << "prepared " << st.dialogues << " dialogues: " << st.split.train.size() << "/"
                  << st.split.valid.size() << "/" << st.split.test.size() << ", vocab " << st.vocab << ", emotion vocab "
                  << st.emo_vocab << "\n";
    } else if (train->parsed()) {
      RunConfig rc = resolve(config_file, train->remaining());
      log_config(rc);
      auto sum = cmd_train(rc, verbosity() == Verbosity::Quiet ? nullptr : &std::cerr);
      if (verbosity() != Verbosity::Quiet)
        std::cerr << "trained " << sum.steps << " steps, best valid CE " << sum.best_valid_ce << "\n";
    } else if (gen->parsed()) {
      RunConfig rc = resolve(config_file, gen->remaining());
      log_config(rc);
      std::size_t n = cmd_generate(rc, mode == "sample" ? DecodeMode::Sample : DecodeMode::Greedy);
      if (verbosity() != Verbosity::Quiet) std::cerr << "generated " << n << " responses\n";
    } else if (eval->parsed()) {
      RunConfig rc = resolve(config_file, eval->remaining());
      log_config(rc);
      std::cout << format_report(cmd_evaluate(rc));
    } else if (gc->parsed()) {
      if (!gc->remaining().empty()) EMPGAN_THROW(ConfigError, "unexpected argument '" << gc->remaining().front() << "'");
      return cmd_gradcheck(so, std::cout) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
