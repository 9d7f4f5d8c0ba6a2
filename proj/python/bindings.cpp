#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>

#include "speechgrade/analysis.hpp"
#include "speechgrade/checkpoint.hpp"
#include "speechgrade/corpus.hpp"
#include "speechgrade/errors.hpp"
#include "speechgrade/metrics.hpp"
#include "speechgrade/text.hpp"
#include "speechgrade/training.hpp"

namespace py = pybind11;
using namespace sg;

namespace {

// Checkpoint-backed handle bundling the model with its preprocessing.
struct LoadedModel {
  Checkpoint ckpt;
  ScoringModel model;
  Preprocessor prep;

  explicit LoadedModel(const std::string& path)
      : ckpt(load_checkpoint(path)), model(ckpt.materialize()), prep(ckpt) {}
};

py::dict eval_to_dict(const EvalResult& r) {
  py::dict d;
  d["qwk"] = r.qwk;
  d["mse_raw"] = r.mse_raw;
  d["mse_rounded"] = r.mse_rounded;
  if (r.qwk_thresholded) d["qwk_thresholded"] = *r.qwk_thresholded;
  py::list responses;
  for (const auto& e : r.responses) {
    py::dict x;
    x["id"] = e.id;
    x["human"] = e.human;
    x["normalized"] = e.prediction.normalized;
    x["rescaled"] = e.prediction.rescaled;
    x["rounded_grade"] = e.prediction.rounded_grade;
    if (e.thresholded_grade >= 0) x["thresholded_grade"] = e.thresholded_grade;
    responses.append(std::move(x));
  }
  d["responses"] = std::move(responses);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "speechgrade: multimodal attention-fusion speech scoring";

  py::register_exception<UndefinedKappaError>(m, "UndefinedKappaError");

  // metrics
  m.def("qwk", &qwk, py::arg("human"), py::arg("predicted"),
        py::arg("n_classes"),
        "Quadratic weighted kappa between two integer grade vectors.");
  m.def("mse", &mse, py::arg("y_true"), py::arg("y_pred"));
  m.def("round_default", &round_default, py::arg("raw"), py::arg("n_classes"));
  m.def(
      "apply_thresholds",
      [](double raw, const std::vector<double>& cuts) {
        ThresholdSet t;
        t.cuts = cuts;
        return apply_thresholds(raw, t);
      },
      py::arg("raw"), py::arg("cuts"));
  m.def(
      "optimize_thresholds",
      [](const std::vector<double>& raw, const std::vector<int>& human,
         std::size_t n_classes) {
        return optimize_thresholds(raw, human, n_classes).cuts;
      },
      py::arg("raw_scores"), py::arg("human_grades"), py::arg("n_classes"),
      "Coordinate-ascent threshold calibration maximizing QWK.");

  // text frontend
  m.def("tokenize", &tokenize, py::arg("transcript"));

  // synthetic corpus
  m.def(
      "synth_corpus",
      [](const std::string& out_dir, std::size_t classes, std::size_t per_class,
         std::uint64_t seed, bool audio_signal, bool text_signal) {
        SynthSpec spec;
        spec.n_classes = classes;
        spec.per_class = per_class;
        spec.seed = seed;
        spec.audio_informative = audio_signal;
        spec.text_informative = text_signal;
        SynthResult r = generate_synthetic_corpus(spec, out_dir);
        py::dict d;
        d["records"] = r.records.size();
        d["labels"] = r.scale.labels();
        d["manifest"] = out_dir + "/manifest.tsv";
        return d;
      },
      py::arg("out_dir"), py::arg("classes") = 3, py::arg("per_class") = 40,
      py::arg("seed") = 42, py::arg("audio_signal") = true,
      py::arg("text_signal") = true);

  // training + evaluation against manifests
  m.def(
      "train_model",
      [](const std::string& manifest_path, const std::string& kind_name,
         const std::string& ckpt_out, std::uint64_t seed,
         const std::string& preset, std::size_t max_epochs, double lr,
         double dropout, std::size_t batch_size, std::size_t patience) {
        Manifest man = read_manifest(manifest_path);
        if (!man.scale)
          throw ContractError("manifest has no scale directive");
        auto kind = parse_model_kind(kind_name);
        if (!kind)
          throw ParameterError("unknown model kind \"" + kind_name + "\"");
        CorpusSplits splits = stratified_split(man.records, {}, seed);
        TrainConfig tc;
        tc.seed = seed;
        tc.split_seed = seed;
        tc.max_epochs = max_epochs;
        tc.learning_rate = lr;
        tc.dropout = dropout;
        tc.batch_size = batch_size;
        tc.patience = std::min(patience, max_epochs);
        tc.model = preset == "compact" ? ModelConfig::compact()
                                       : ModelConfig::paper();
        TrainOutcome out = train(*kind, splits.train, splits.val, *man.scale,
                                 tc);
        save_checkpoint(out.checkpoint, ckpt_out);
        py::dict d;
        d["selected_epoch"] = out.report.selected_epoch;
        d["best_val_qwk"] = out.report.best_val_qwk;
        d["epochs_run"] = out.report.epochs.size();
        d["checkpoint"] = ckpt_out;
        return d;
      },
      py::arg("manifest"), py::arg("kind"), py::arg("ckpt_out"),
      py::arg("seed") = 42, py::arg("preset") = "compact",
      py::arg("max_epochs") = 50, py::arg("lr") = 1e-3,
      py::arg("dropout") = 0.3, py::arg("batch_size") = 16,
      py::arg("patience") = 5);

  py::class_<LoadedModel>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
      .def_property_readonly(
          "kind", [](const LoadedModel& s) { return model_kind_name(s.model.kind()); })
      .def_property_readonly(
          "grade_labels",
          [](const LoadedModel& s) { return s.ckpt.scale.labels(); })
      .def(
          "evaluate",
          [](const LoadedModel& s, const std::string& manifest_path,
             const std::string& split, int threads) {
            std::vector<ResponseRecord> records =
                load_manifest(manifest_path, s.ckpt.scale);
            CorpusSplits splits = resolve_splits(records, s.ckpt.split_seed);
            const std::vector<ResponseRecord>* subset = &splits.test;
            std::vector<ResponseRecord> all;
            if (split == "train") subset = &splits.train;
            else if (split == "val") subset = &splits.val;
            else if (split == "all") {
              all = records;
              subset = &all;
            }
            return eval_to_dict(
                evaluate(s.model, s.prep, *subset, nullptr, threads));
          },
          py::arg("manifest"), py::arg("split") = "test", py::arg("threads") = 1)
      .def(
          "attention_split",
          [](const LoadedModel& s, const std::string& manifest_path,
             const std::string& split) {
            std::vector<ResponseRecord> records =
                load_manifest(manifest_path, s.ckpt.scale);
            CorpusSplits splits = resolve_splits(records, s.ckpt.split_seed);
            const std::vector<ResponseRecord>* subset =
                split == "train" ? &splits.train
                : split == "val" ? &splits.val
                                 : &splits.test;
            py::list rows;
            for (const auto& row : attention_split_report(
                     s.model, s.prep, *subset, GroupBy::HumanGrade)) {
              py::dict d;
              d["group"] = row.group;
              d["text_pct"] = row.text_pct;
              d["audio_pct"] = row.audio_pct;
              d["count"] = row.count;
              rows.append(std::move(d));
            }
            return rows;
          },
          py::arg("manifest"), py::arg("split") = "test");
}
