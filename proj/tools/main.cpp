#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "speechgrade/analysis.hpp"
#include "speechgrade/checkpoint.hpp"
#include "speechgrade/corpus.hpp"
#include "speechgrade/errors.hpp"
#include "speechgrade/log.hpp"
#include "speechgrade/metrics.hpp"
#include "speechgrade/training.hpp"

namespace fs = std::filesystem;
using namespace sg;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

// Flat key=value config file; command-line flags win.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::map<std::string, std::string> kv;
  if (path.empty()) return kv;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(line_no) +
                       ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

struct TrainFlags {
  std::string manifest;
  std::string model = "MMAF";
  std::string out;
  std::string config_file;
  std::string report_path;
  std::string embeddings;
  std::string preset = "paper";
  std::string prompt_filter;
  std::string scale_spec;
  std::uint64_t seed = 42;
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::size_t patience = 5;
  bool patience_explicit = false;
  double dropout = 0.3;
};

GradeScale resolve_scale(const Manifest& m, const std::string& scale_spec) {
  if (!scale_spec.empty()) {
    std::vector<std::string> labels;
    std::string cur;
    for (char c : scale_spec) {
      if (c == '|') {
        labels.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    labels.push_back(cur);
    return GradeScale(labels);
  }
  if (m.scale) return *m.scale;
  throw ContractError(
      "manifest has no scale directive; pass --scale \"L0|L1|...\"");
}

ModelConfig resolve_preset(const std::string& preset) {
  if (preset == "paper") return ModelConfig::paper();
  if (preset == "compact") return ModelConfig::compact();
  throw ParameterError("unknown preset \"" + preset +
                       "\" (expected paper or compact)");
}

const std::vector<ResponseRecord>& pick_split(const CorpusSplits& splits,
                                              const std::string& name,
                                              std::vector<ResponseRecord>& all) {
  if (name == "train") return splits.train;
  if (name == "val") return splits.val;
  if (name == "test") return splits.test;
  if (name == "all") {
    all = splits.train;
    all.insert(all.end(), splits.val.begin(), splits.val.end());
    all.insert(all.end(), splits.test.begin(), splits.test.end());
    return all;
  }
  throw ParameterError("unknown split \"" + name + "\"");
}

ThresholdSet read_threshold_file(const std::string& path,
                                 std::size_t n_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open threshold file: " + path);
  ThresholdSet t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      t.cuts.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw ParseError("threshold file line " + std::to_string(line_no) +
                       ": not a number");
    }
  }
  t.validate(n_classes);
  return t;
}

void write_threshold_file(const std::string& path, const ThresholdSet& t) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write threshold file: " + path);
  out.precision(17);
  for (double c : t.cuts) out << c << "\n";
  if (!out) throw IoError("failed writing threshold file: " + path);
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out << body;
  if (!out) throw IoError("failed writing file: " + path);
}

// Thresholds for the ablation's "with TO" column: a supplied file wins,
// otherwise fit on the clean validation split.
ThresholdSet ablation_thresholds(const std::string& thresholds_file,
                                 const ScoringModel& model,
                                 const Preprocessor& prep,
                                 const CorpusSplits& splits, int threads) {
  if (!thresholds_file.empty())
    return read_threshold_file(thresholds_file, model.n_grades());
  EvalResult val = evaluate(model, prep, splits.val, nullptr, threads);
  std::vector<double> raw;
  std::vector<int> human;
  for (const auto& r : val.responses) {
    raw.push_back(r.prediction.rescaled);
    human.push_back(r.human);
  }
  return optimize_thresholds(raw, human, model.n_grades());
}

int run_synth(const SynthSpec& spec, const std::string& out_dir) {
  SynthResult result = generate_synthetic_corpus(spec, out_dir);
  std::cout << "seed=" << spec.seed << "\n";
  std::cout << "records=" << result.records.size() << "\n";
  std::cout << "manifest=" << (fs::path(out_dir) / "manifest.tsv").string()
            << "\n";
  return 0;
}

int run_train(const TrainFlags& f, const CLI::App* cmd) {
  const auto cfg_file = read_config_file(f.config_file);
  TrainFlags flags = f;
  // config-file values fill in only the flags not given on the command line
  auto maybe = [&](const char* key, const char* flag, auto setter) {
    auto it = cfg_file.find(key);
    if (it != cfg_file.end() && cmd->count(flag) == 0) setter(it->second);
  };
  maybe("lr", "--lr", [&](const std::string& v) { flags.lr = std::stod(v); });
  maybe("batch_size", "--batch-size",
        [&](const std::string& v) { flags.batch_size = std::stoull(v); });
  maybe("epochs", "--epochs",
        [&](const std::string& v) { flags.epochs = std::stoull(v); });
  maybe("patience", "--patience", [&](const std::string& v) {
    flags.patience = std::stoull(v);
    flags.patience_explicit = true;
  });
  maybe("dropout", "--dropout",
        [&](const std::string& v) { flags.dropout = std::stod(v); });
  maybe("preset", "--preset",
        [&](const std::string& v) { flags.preset = v; });
  maybe("embeddings", "--embeddings",
        [&](const std::string& v) { flags.embeddings = v; });
  maybe("seed", "--seed",
        [&](const std::string& v) { flags.seed = std::stoull(v); });
  // a shorter run implies a shorter default patience
  if (!flags.patience_explicit && flags.patience > flags.epochs)
    flags.patience = flags.epochs;

  const auto kind = parse_model_kind(flags.model);
  if (!kind)
    throw ParameterError("unknown model kind \"" + flags.model +
                         "\" (expected A, T, or MMAF)");

  Manifest manifest = read_manifest(flags.manifest);
  GradeScale scale = resolve_scale(manifest, flags.scale_spec);
  std::vector<ResponseRecord> records =
      load_manifest(flags.manifest, scale);

  if (!flags.prompt_filter.empty()) {
    std::vector<ResponseRecord> filtered;
    for (const auto& r : records)
      if (r.prompt == flags.prompt_filter) filtered.push_back(r);
    if (filtered.empty())
      throw ContractError("no records for prompt \"" + flags.prompt_filter +
                          "\"");
    records = std::move(filtered);
  } else {
    std::set<std::string> prompts;
    for (const auto& r : records) prompts.insert(r.prompt);
    if (prompts.size() > 1)
      log_warn("training across " + std::to_string(prompts.size()) +
               " prompts; models are normally fit per prompt (--prompt)");
  }

  CorpusSplits splits = resolve_splits(records, flags.seed);

  TrainConfig tc;
  tc.learning_rate = flags.lr;
  tc.batch_size = flags.batch_size;
  tc.max_epochs = flags.epochs;
  tc.patience = flags.patience;
  tc.dropout = flags.dropout;
  tc.seed = flags.seed;
  tc.split_seed = flags.seed;
  tc.model = resolve_preset(flags.preset);
  tc.embeddings_path = flags.embeddings;

  std::cout << "seed=" << flags.seed << "\n";
  std::cout << "train=" << splits.train.size() << " val=" << splits.val.size()
            << " test=" << splits.test.size() << "\n";

  TrainOutcome outcome = train(*kind, splits.train, splits.val, scale, tc);
  save_checkpoint(outcome.checkpoint, flags.out);

  const std::string report_path =
      flags.report_path.empty() ? flags.out + ".report" : flags.report_path;
  write_text_file(report_path, outcome.report.to_lines());

  std::cout << "selected_epoch=" << outcome.report.selected_epoch << "\n";
  std::cout << "best_val_qwk=" << fmt(outcome.report.best_val_qwk) << "\n";
  std::cout << "checkpoint=" << flags.out << "\n";
  std::cout << "report=" << report_path << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& manifest_path,
             const std::string& split, const std::string& thresholds_file,
             std::optional<std::uint64_t> seed_override,
             const std::string& format, int threads) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  ScoringModel model = ckpt.materialize();
  Preprocessor prep(ckpt);
  std::vector<ResponseRecord> records =
      load_manifest(manifest_path, ckpt.scale);
  CorpusSplits splits =
      resolve_splits(records, seed_override.value_or(ckpt.split_seed));
  std::vector<ResponseRecord> all;
  const std::vector<ResponseRecord>& subset = pick_split(splits, split, all);

  ThresholdSet thresholds;
  bool have_thresholds = false;
  if (!thresholds_file.empty()) {
    thresholds = read_threshold_file(thresholds_file, ckpt.scale.size());
    have_thresholds = true;
  }
  EvalResult result = evaluate(model, prep, subset,
                               have_thresholds ? &thresholds : nullptr, threads);

  std::ostringstream out;
  if (format == "lines") {
    out << "qwk " << fmt(result.qwk) << "\n";
    out << "mse_raw " << fmt(result.mse_raw) << "\n";
    out << "mse_rounded " << fmt(result.mse_rounded) << "\n";
    if (result.qwk_thresholded)
      out << "qwk_thresholded " << fmt(*result.qwk_thresholded) << "\n";
  } else {
    out << "split=" << split << " responses=" << result.responses.size()
        << "\n";
    out << "QWK (default rounding): " << fmt(result.qwk) << "\n";
    out << "MSE (raw rescaled):     " << fmt(result.mse_raw) << "\n";
    out << "MSE (rounded grades):   " << fmt(result.mse_rounded) << "\n";
    if (result.qwk_thresholded)
      out << "QWK (thresholded):      " << fmt(*result.qwk_thresholded)
          << "\n";
  }
  std::cout << out.str();
  return 0;
}

int run_calibrate(const std::string& ckpt_path,
                  const std::string& manifest_path, const std::string& out_path,
                  std::optional<std::uint64_t> seed_override, int threads) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  ScoringModel model = ckpt.materialize();
  Preprocessor prep(ckpt);
  std::vector<ResponseRecord> records =
      load_manifest(manifest_path, ckpt.scale);
  CorpusSplits splits =
      resolve_splits(records, seed_override.value_or(ckpt.split_seed));

  EvalResult val = evaluate(model, prep, splits.val, nullptr, threads);
  std::vector<double> raw;
  std::vector<int> human;
  for (const auto& r : val.responses) {
    raw.push_back(r.prediction.rescaled);
    human.push_back(r.human);
  }
  ThresholdSet cuts = optimize_thresholds(raw, human, ckpt.scale.size());

  std::vector<int> cut_grades;
  for (double r : raw) cut_grades.push_back(apply_thresholds(r, cuts));
  const double after = qwk(human, cut_grades, ckpt.scale.size());

  write_threshold_file(out_path, cuts);
  std::cout << "val_qwk_before=" << fmt(val.qwk) << "\n";
  std::cout << "val_qwk_after=" << fmt(after) << "\n";
  std::cout << "thresholds=" << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "speechgrade: multimodal attention-fusion scoring of spoken responses"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  SynthSpec synth_spec;
  std::string synth_out;
  synth->add_option("--classes", synth_spec.n_classes, "grade count")
      ->check(CLI::Range(std::size_t{2}, std::size_t{16}))
      ->capture_default_str();
  synth->add_option("--per-class", synth_spec.per_class, "records per grade")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--seed", synth_spec.seed, "rng seed")
      ->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--duration", synth_spec.base_duration_s,
                    "grade-0 mean duration, seconds")
      ->capture_default_str();
  synth->add_option("--length-corr", synth_spec.length_correlation,
                    "target corr(grade, transcript length)")
      ->capture_default_str();
  synth
      ->add_option("--audio-signal", synth_spec.audio_informative,
                   "audio carries grade signal")
      ->capture_default_str();
  synth
      ->add_option("--text-signal", synth_spec.text_informative,
                   "text carries grade signal")
      ->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a scoring model");
  TrainFlags tf;
  train_cmd->add_option("--manifest", tf.manifest, "corpus manifest")
      ->required();
  train_cmd->add_option("--model", tf.model, "A | T | MMAF")
      ->check(CLI::IsMember({"A", "T", "MMAF"}))
      ->capture_default_str();
  train_cmd->add_option("--out", tf.out, "checkpoint output path")->required();
  train_cmd->add_option("--config", tf.config_file, "key=value config file");
  train_cmd->add_option("--report", tf.report_path,
                        "training report path (default <out>.report)");
  train_cmd->add_option("--seed", tf.seed, "split + init seed")
      ->capture_default_str();
  train_cmd->add_option("--preset", tf.preset, "paper | compact")
      ->check(CLI::IsMember({"paper", "compact"}))
      ->capture_default_str();
  train_cmd->add_option("--lr", tf.lr, "learning rate")->capture_default_str();
  train_cmd->add_option("--batch-size", tf.batch_size, "mini-batch size")
      ->capture_default_str();
  train_cmd->add_option("--epochs", tf.epochs, "maximum epochs")
      ->capture_default_str();
  train_cmd->add_option("--patience", tf.patience, "early-stop patience")
      ->capture_default_str();
  train_cmd->add_option("--dropout", tf.dropout, "dropout rate")
      ->capture_default_str();
  train_cmd->add_option("--embeddings", tf.embeddings,
                        "pretrained embedding text file");
  train_cmd->add_option("--prompt", tf.prompt_filter,
                        "train on a single prompt id");
  train_cmd->add_option("--scale", tf.scale_spec,
                        "ordered grade labels, pipe-separated");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_manifest, ev_split = "test", ev_thresholds,
              ev_format = "plain";
  std::optional<std::uint64_t> ev_seed;
  int ev_threads = 1;
  eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--manifest", ev_manifest, "corpus manifest")
      ->required();
  eval_cmd->add_option("--split", ev_split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  eval_cmd->add_option("--thresholds", ev_thresholds, "threshold file");
  eval_cmd->add_option("--seed", ev_seed,
                       "override the checkpoint's split seed");
  eval_cmd->add_option("--format", ev_format, "plain | lines")
      ->check(CLI::IsMember({"plain", "lines"}))
      ->capture_default_str();
  eval_cmd->add_option("--threads", ev_threads, "eval parallelism")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // calibrate
  auto* cal_cmd =
      app.add_subcommand("calibrate", "fit rounding thresholds on validation");
  std::string cal_ckpt, cal_manifest, cal_out;
  std::optional<std::uint64_t> cal_seed;
  int cal_threads = 1;
  cal_cmd->add_option("--ckpt", cal_ckpt, "checkpoint file")->required();
  cal_cmd->add_option("--manifest", cal_manifest, "corpus manifest")
      ->required();
  cal_cmd->add_option("--out", cal_out, "threshold file output")->required();
  cal_cmd->add_option("--seed", cal_seed,
                      "override the checkpoint's split seed");
  cal_cmd->add_option("--threads", cal_threads, "eval parallelism")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // ablate-noise
  auto* noise_cmd = app.add_subcommand(
      "ablate-noise", "replace audio with white noise and re-evaluate");
  std::string no_ckpt, no_manifest, no_split = "test", no_thresholds;
  std::uint64_t no_seed = 42;
  int no_threads = 1;
  noise_cmd->add_option("--ckpt", no_ckpt, "checkpoint file")->required();
  noise_cmd->add_option("--manifest", no_manifest, "corpus manifest")
      ->required();
  noise_cmd->add_option("--split", no_split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  noise_cmd->add_option("--seed", no_seed, "noise seed")->capture_default_str();
  noise_cmd->add_option("--thresholds", no_thresholds,
                        "threshold file (default: fit on clean validation)");
  noise_cmd->add_option("--threads", no_threads, "eval parallelism")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // ablate-swap
  auto* swap_cmd = app.add_subcommand(
      "ablate-swap", "replace audio with external files and re-evaluate");
  std::string sw_ckpt, sw_manifest, sw_split = "test", sw_thresholds, sw_dir;
  int sw_threads = 1;
  swap_cmd->add_option("--ckpt", sw_ckpt, "checkpoint file")->required();
  swap_cmd->add_option("--manifest", sw_manifest, "corpus manifest")
      ->required();
  swap_cmd->add_option("--audio-dir", sw_dir, "directory of <id>.wav files")
      ->required();
  swap_cmd->add_option("--split", sw_split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  swap_cmd->add_option("--thresholds", sw_thresholds,
                       "threshold file (default: fit on clean validation)");
  swap_cmd->add_option("--threads", sw_threads, "eval parallelism")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // attn-split
  auto* split_cmd = app.add_subcommand(
      "attn-split", "modality attention percentages by group");
  std::string as_ckpt, as_manifest, as_split = "test", as_by = "prompt",
              as_out;
  int as_threads = 1;
  split_cmd->add_option("--ckpt", as_ckpt, "checkpoint file")->required();
  split_cmd->add_option("--manifest", as_manifest, "corpus manifest")
      ->required();
  split_cmd->add_option("--split", as_split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  split_cmd->add_option("--by", as_by, "prompt | grade | predicted")
      ->check(CLI::IsMember({"prompt", "grade", "predicted"}))
      ->capture_default_str();
  split_cmd->add_option("--out", as_out, "write report here instead of stdout");
  split_cmd->add_option("--threads", as_threads, "eval parallelism")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // attn-trace
  auto* trace_cmd = app.add_subcommand(
      "attn-trace", "per-frame/token attention export for one response");
  std::string tr_ckpt, tr_manifest, tr_id, tr_out;
  trace_cmd->add_option("--ckpt", tr_ckpt, "checkpoint file")->required();
  trace_cmd->add_option("--manifest", tr_manifest, "corpus manifest")
      ->required();
  trace_cmd->add_option("--id", tr_id, "response id")->required();
  trace_cmd->add_option("--out", tr_out, "write trace here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) return run_synth(synth_spec, synth_out);
    if (train_cmd->parsed()) {
      tf.patience_explicit = train_cmd->count("--patience") > 0;
      return run_train(tf, train_cmd);
    }
    if (eval_cmd->parsed())
      return run_eval(ev_ckpt, ev_manifest, ev_split, ev_thresholds, ev_seed,
                      ev_format, ev_threads);
    if (cal_cmd->parsed())
      return run_calibrate(cal_ckpt, cal_manifest, cal_out, cal_seed,
                           cal_threads);
    if (noise_cmd->parsed()) {
      Checkpoint ckpt = load_checkpoint(no_ckpt);
      ScoringModel model = ckpt.materialize();
      Preprocessor prep(ckpt);
      std::vector<ResponseRecord> records =
          load_manifest(no_manifest, ckpt.scale);
      CorpusSplits splits = resolve_splits(records, ckpt.split_seed);
      std::vector<ResponseRecord> all;
      const auto& subset = pick_split(splits, no_split, all);
      ThresholdSet cuts = ablation_thresholds(no_thresholds, model, prep,
                                              splits, no_threads);
      AblationResult r = ablate_white_noise(model, prep, subset, cuts, no_seed,
                                            no_threads);
      std::cout << "seed=" << no_seed << "\n";
      std::cout << "qwk_without_to " << fmt(r.qwk) << "\n";
      std::cout << "qwk_with_to " << fmt(r.qwk_thresholded) << "\n";
      return 0;
    }
    if (swap_cmd->parsed()) {
      Checkpoint ckpt = load_checkpoint(sw_ckpt);
      ScoringModel model = ckpt.materialize();
      Preprocessor prep(ckpt);
      std::vector<ResponseRecord> records =
          load_manifest(sw_manifest, ckpt.scale);
      CorpusSplits splits = resolve_splits(records, ckpt.split_seed);
      std::vector<ResponseRecord> all;
      const auto& subset = pick_split(splits, sw_split, all);
      ThresholdSet cuts = ablation_thresholds(sw_thresholds, model, prep,
                                              splits, sw_threads);
      AblationResult r = ablate_swapped_audio(model, prep, subset, cuts, sw_dir,
                                              sw_threads);
      std::cout << "qwk_without_to " << fmt(r.qwk) << "\n";
      std::cout << "qwk_with_to " << fmt(r.qwk_thresholded) << "\n";
      std::cout << "skipped " << r.skipped << "\n";
      return 0;
    }
    if (split_cmd->parsed()) {
      Checkpoint ckpt = load_checkpoint(as_ckpt);
      ScoringModel model = ckpt.materialize();
      Preprocessor prep(ckpt);
      std::vector<ResponseRecord> records =
          load_manifest(as_manifest, ckpt.scale);
      CorpusSplits splits = resolve_splits(records, ckpt.split_seed);
      std::vector<ResponseRecord> all;
      const auto& subset = pick_split(splits, as_split, all);
      const GroupBy by = as_by == "prompt"      ? GroupBy::Prompt
                         : as_by == "grade"     ? GroupBy::HumanGrade
                                                : GroupBy::PredictedGrade;
      const std::string body =
          split_report_to_lines(attention_split_report(model, prep, subset,
                                                       by, as_threads));
      if (as_out.empty())
        std::cout << body;
      else
        write_text_file(as_out, body);
      return 0;
    }
    if (trace_cmd->parsed()) {
      Checkpoint ckpt = load_checkpoint(tr_ckpt);
      ScoringModel model = ckpt.materialize();
      Preprocessor prep(ckpt);
      std::vector<ResponseRecord> records =
          load_manifest(tr_manifest, ckpt.scale);
      const ResponseRecord* found = nullptr;
      for (const auto& r : records)
        if (r.id == tr_id) {
          found = &r;
          break;
        }
      if (!found)
        throw ContractError("response id \"" + tr_id + "\" not in manifest");
      const std::string body =
          trace_to_lines(export_attention_trace(model, prep, *found));
      if (tr_out.empty())
        std::cout << body;
      else
        write_text_file(tr_out, body);
      return 0;
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ParameterError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
