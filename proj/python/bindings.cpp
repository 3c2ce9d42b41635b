// SPDX-License-Identifier: Apache-2.0
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <sstream>

#include "empgan/commands.hpp"
#include "empgan/error.hpp"

namespace py = pybind11;
using namespace empgan;

namespace {

RunConfig to_config(const std::map<std::string, py::object>& options) {
  RunConfig rc;
  for (const auto& [k, v] : options) rc.set(k, py::str(v));
  rc.train.validate();
  return rc;
}

py::dict prf(const Prf& p) {
  py::dict d;
  d["f"] = p.f;
  d["p"] = p.p;
  d["r"] = p.r;
  return d;
}

py::dict report(const EvalReport& r) {
  py::dict d;
  d["bleu"] = r.bleu;
  d["distinct1"] = r.distinct1;
  d["distinct2"] = r.distinct2;
  d["rouge1"] = prf(r.rouge1);
  d["rouge2"] = prf(r.rouge2);
  d["rouge_l"] = prf(r.rouge_l);
  return d;
}

}  // namespace

PYBIND11_MODULE(_empgan, m) {
  m.doc() = "EmpGAN core: metrics, data preparation, training and generation";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);

  m.def("tokenize", [](const std::string& s) { return tokenize(s); }, py::arg("text"));
  m.def(
      "extract_emotion_words",
      [](const std::vector<std::string>& tokens, const std::vector<std::string>& lexicon) {
        return extract_emotion_words(tokens, Lexicon(lexicon));
      },
      py::arg("tokens"), py::arg("lexicon"));
  m.def(
      "split_dataset",
      [](std::size_t n, std::uint64_t seed) {
        Split s = split_dataset(n, seed);
        return py::make_tuple(s.train, s.valid, s.test);
      },
      py::arg("num_dialogues"), py::arg("seed"));

  m.def("bleu", &bleu, py::arg("hypotheses"), py::arg("references"), py::arg("max_n") = 4);
  m.def("distinct_n", &distinct_n, py::arg("hypotheses"), py::arg("n"));
  m.def(
      "rouge_n", [](const Sentence& h, const Sentence& r, int n) { return prf(rouge_n(h, r, n)); },
      py::arg("hypothesis"), py::arg("reference"), py::arg("n"));
  m.def(
      "rouge_l", [](const Sentence& h, const Sentence& r) { return prf(rouge_l(h, r)); }, py::arg("hypothesis"),
      py::arg("reference"));
  m.def(
      "evaluate", [](const std::vector<Sentence>& h, const std::vector<Sentence>& r) { return report(evaluate(h, r)); },
      py::arg("hypotheses"), py::arg("references"));

  m.def(
      "prepare",
      [](const std::map<std::string, py::object>& options) {
        PrepareStats st = cmd_prepare(to_config(options));
        py::dict d;
        d["dialogues"] = st.dialogues;
        d["turns"] = st.turns;
        d["emotion_words"] = st.emotion_words;
        d["train"] = st.split.train;
        d["valid"] = st.split.valid;
        d["test"] = st.split.test;
        d["vocab"] = st.vocab;
        d["emo_vocab"] = st.emo_vocab;
        return d;
      },
      py::arg("options"));
  m.def(
      "train",
      [](const std::map<std::string, py::object>& options) {
        RunConfig rc = to_config(options);
        TrainSummary s;
        {
          py::gil_scoped_release release;
          s = cmd_train(rc);
        }
        py::dict d;
        d["steps"] = s.steps;
        d["best_valid_ce"] = s.best_valid_ce;
        d["last_train_ce"] = s.last_train_ce;
        d["best"] = s.best;
        d["last"] = s.last;
        return d;
      },
      py::arg("options"));
  m.def(
      "generate",
      [](const std::map<std::string, py::object>& options, const std::string& mode) {
        if (mode != "greedy" && mode != "sample") throw ConfigError("mode must be 'greedy' or 'sample'");
        return cmd_generate(to_config(options), mode == "sample" ? DecodeMode::Sample : DecodeMode::Greedy);
      },
      py::arg("options"), py::arg("mode") = "greedy");
  m.def(
      "evaluate_files", [](const std::map<std::string, py::object>& options) { return report(cmd_evaluate(to_config(options))); },
      py::arg("options"));
  m.def(
      "gradcheck",
      [](const std::string& filter, std::size_t hidden, double tol, double inject_fault) {
        SuiteOptions o;
        o.filter = filter;
        o.hidden = hidden;
        o.check.tol = tol;
        o.check.inject_fault = inject_fault;
        std::ostringstream out;
        bool ok = cmd_gradcheck(o, out);
        return py::make_tuple(ok, out.str());
      },
      py::arg("filter") = "", py::arg("hidden") = 8, py::arg("tol") = 1e-3, py::arg("inject_fault") = 0.0);
  m.def("read_artifact_lines", &read_artifact_lines, py::arg("path"));
}
