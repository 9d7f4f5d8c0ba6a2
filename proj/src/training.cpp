#include "speechgrade/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "speechgrade/errors.hpp"
#include "speechgrade/log.hpp"
#include "speechgrade/optimizer.hpp"

namespace sg {

namespace {

std::string fmt_g17(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ParameterError("train: batch size must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ParameterError("train: dropout must lie in [0, 1)");
  if (max_epochs < 1) throw ParameterError("train: max_epochs must be >= 1");
  if (patience > max_epochs)
    throw ParameterError("train: patience exceeds max_epochs");
}

std::string TrainReport::to_lines(bool include_wall_time) const {
  std::ostringstream os;
  for (const EpochStats& e : epochs) {
    os << "epoch=" << e.epoch << "\ttrain_loss=" << fmt_g17(e.train_loss)
       << "\tval_loss=" << fmt_g17(e.val_loss);
    if (e.val_qwk_defined)
      os << "\tval_qwk=" << fmt_g17(e.val_qwk);
    else
      os << "\tval_qwk=undefined";
    os << "\n";
  }
  os << "selected_epoch=" << selected_epoch << "\n";
  os << "best_val_qwk=" << fmt_g17(best_val_qwk) << "\n";
  if (include_wall_time) os << "wall_time_s=" << fmt_g17(wall_time_s) << "\n";
  return os.str();
}

Preprocessor::Preprocessor(SpectrogramConfig cfg, std::size_t max_columns,
                           std::size_t text_max_len, Vocabulary vocab,
                           GradeScale scale)
    : pipeline_(cfg, max_columns),
      text_max_len_(text_max_len),
      vocab_(std::move(vocab)),
      scale_(std::move(scale)) {
  if (text_max_len_ < 1)
    throw ParameterError("preprocessor: text_max_len must be >= 1");
}

Preprocessor::Preprocessor(const Checkpoint& ckpt)
    : Preprocessor(ckpt.frontend, ckpt.max_columns, ckpt.text_max_len,
                   ckpt.vocab, ckpt.scale) {}

Preprocessor Preprocessor::fit(const std::vector<ResponseRecord>& train_records,
                               const SpectrogramConfig& cfg,
                               const GradeScale& scale) {
  if (train_records.empty())
    throw DegenerateInputError("preprocessor fit: empty training split");

  std::vector<std::string> transcripts;
  transcripts.reserve(train_records.size());
  for (const auto& r : train_records) transcripts.push_back(r.transcript);
  Vocabulary vocab = Vocabulary::build(transcripts);

  std::size_t text_max_len = 1;
  for (const auto& r : train_records)
    text_max_len = std::max(text_max_len, tokenize(r.transcript).size());

  SpectrogramPipeline probe(cfg, cfg.frame_columns);  // only for columns_for
  std::size_t max_cols = 1;
  for (const auto& r : train_records) {
    const AudioClip clip = read_wav(r.audio_path);
    max_cols = std::max(max_cols, probe.columns_for(clip));
  }
  const std::size_t padded =
      SpectrogramPipeline::round_up_columns(max_cols, cfg.frame_columns);
  return Preprocessor(cfg, padded, text_max_len, std::move(vocab), scale);
}

PreparedResponse Preprocessor::prepare(const ResponseRecord& record,
                                       bool want_audio, bool want_text,
                                       const AudioClip* clip_override) const {
  PreparedResponse out;
  out.id = record.id;
  out.human_grade = scale_.to_index(record.grade_label);
  out.target = scale_.normalize_index(static_cast<std::size_t>(out.human_grade));
  if (want_audio) {
    const AudioClip clip =
        clip_override ? *clip_override : read_wav(record.audio_path);
    out.frames = pipeline_.process(clip);
    out.has_frames = true;
  }
  if (want_text) {
    out.tokens = encode(tokenize(record.transcript), vocab_, text_max_len_);
    if (out.tokens.valid_length == 0) {
      // empty transcript: keep one unknown token so the text branch is
      // well-formed; the response still scores
      out.tokens.ids[0] = Vocabulary::kUnkId;
      out.tokens.valid_length = 1;
    }
    out.has_tokens = true;
  }
  return out;
}

namespace {

struct ForwardBatchResult {
  double sse = 0.0;  // summed squared error over members
};

// Mean squared error over the batch as a graph, backward, and one Adam step.
ForwardBatchResult train_batch(ScoringModel& model,
                               const std::vector<const PreparedResponse*>& batch,
                               std::vector<Tensor>& params, AdamState& adam,
                               double dropout_rate, Rng& dropout_rng) {
  std::vector<Tensor> sq_errors;
  sq_errors.reserve(batch.size());
  ForwardOptions opts;
  opts.training = true;
  opts.dropout_rate = dropout_rate;
  opts.rng = &dropout_rng;
  for (const PreparedResponse* r : batch) {
    ScoredTensor scored = model.score(r->has_frames ? &r->frames : nullptr,
                                      r->has_tokens ? &r->tokens : nullptr,
                                      opts);
    Tensor diff = sub(scored.score, Tensor::scalar(r->target));
    sq_errors.push_back(mul(diff, diff));
  }
  Tensor loss = scale(sum(concat_dim0(sq_errors)),
                      1.0 / static_cast<double>(batch.size()));
  for (Tensor& p : params) p.zero_grad();
  backward(loss);
  adam_step(params, adam);

  ForwardBatchResult res;
  res.sse = loss.value() * static_cast<double>(batch.size());
  return res;
}

struct ValMetrics {
  double loss = 0.0;
  double qwk_value = 0.0;
  bool qwk_defined = true;
};

ValMetrics validation_metrics(const ScoringModel& model,
                              const std::vector<PreparedResponse>& val,
                              std::size_t n_grades) {
  std::vector<double> preds, targets;
  std::vector<int> human, rounded;
  preds.reserve(val.size());
  for (const PreparedResponse& r : val) {
    ScoredTensor scored = model.score(r.has_frames ? &r.frames : nullptr,
                                      r.has_tokens ? &r.tokens : nullptr, {});
    const double s = scored.score.value();
    preds.push_back(s);
    targets.push_back(r.target);
    human.push_back(r.human_grade);
    rounded.push_back(
        round_default(s * static_cast<double>(n_grades - 1), n_grades));
  }
  ValMetrics m;
  m.loss = mse(targets, preds);
  try {
    m.qwk_value = qwk(human, rounded, n_grades);
  } catch (const UndefinedKappaError&) {
    m.qwk_defined = false;
  }
  return m;
}

}  // namespace

TrainOutcome train(ModelKind kind,
                   const std::vector<ResponseRecord>& train_records,
                   const std::vector<ResponseRecord>& val_records,
                   const GradeScale& scale, const TrainConfig& config) {
  config.validate();
  if (train_records.empty() || val_records.empty())
    throw DegenerateInputError("train: empty train or validation split");
  const auto t_start = std::chrono::steady_clock::now();

  Preprocessor prep = Preprocessor::fit(train_records, config.frontend, scale);

  Rng init_rng(config.seed);
  ScoringModel model(kind, config.model, prep.vocab().size(), scale.size(),
                     init_rng);
  if (model.uses_text() && !config.embeddings_path.empty()) {
    Rng emb_rng = init_rng.fork(1);
    EmbeddingTable table =
        load_pretrained_embeddings(config.embeddings_path, prep.vocab(),
                                   config.model.lexical.embedding_dim, emb_rng);
    model.set_embeddings(table);
  }

  const bool wa = model.uses_audio(), wt = model.uses_text();
  std::vector<PreparedResponse> train_set, val_set;
  train_set.reserve(train_records.size());
  for (const auto& r : train_records)
    train_set.push_back(prep.prepare(r, wa, wt));
  val_set.reserve(val_records.size());
  for (const auto& r : val_records) val_set.push_back(prep.prepare(r, wa, wt));

  std::vector<Tensor> params;
  for (NamedParam& p : model.parameters()) params.push_back(p.tensor);
  AdamState adam;
  adam.learning_rate = config.learning_rate;
  adam.init(params);

  Rng shuffle_rng(config.seed ^ 0x5350454543485347ULL);
  Rng dropout_rng(config.seed ^ 0x44524f504f555421ULL);

  // With a single-class validation split QWK can never be trusted (it is
  // undefined whenever the model agrees); select by loss for the whole run.
  bool select_by_qwk = false;
  for (const PreparedResponse& r : val_set)
    if (r.human_grade != val_set.front().human_grade) {
      select_by_qwk = true;
      break;
    }
  if (!select_by_qwk)
    log_warn("validation labels are a single class; QWK is unreliable, "
             "selecting by validation loss");

  TrainReport report;
  Checkpoint best;
  bool have_best = false;
  double best_qwk = -2.0;          // any defined QWK beats this
  double best_val_loss = 1e300;    // for the val-loss selection mode
  double early_best_loss = 1e300;  // early stopping tracker
  std::size_t epochs_since_improvement = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double sse = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + config.batch_size);
      std::vector<const PreparedResponse*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(&train_set[order[i]]);
      sse += train_batch(model, batch, params, adam, config.dropout,
                         dropout_rng)
                 .sse;
    }

    ValMetrics vm = validation_metrics(model, val_set, scale.size());
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = sse / static_cast<double>(train_set.size());
    stats.val_loss = vm.loss;
    stats.val_qwk = vm.qwk_value;
    stats.val_qwk_defined = vm.qwk_defined;
    report.epochs.push_back(stats);

    bool snapshot = false;
    if (select_by_qwk) {
      // higher QWK wins, ties keep the earlier epoch
      if (vm.qwk_defined && vm.qwk_value > best_qwk) {
        best_qwk = vm.qwk_value;
        report.selected_epoch = epoch;
        snapshot = true;
      }
    } else if (vm.loss < best_val_loss) {
      best_val_loss = vm.loss;
      report.selected_epoch = epoch;
      snapshot = true;
    }
    if (snapshot || !have_best) {
      best = Checkpoint::from_model(model);
      have_best = true;
      if (report.selected_epoch == 0) report.selected_epoch = epoch;
    }

    // early stopping on validation loss
    if (vm.loss < early_best_loss - 1e-12) {
      early_best_loss = vm.loss;
      epochs_since_improvement = 0;
    } else {
      ++epochs_since_improvement;
      if (epochs_since_improvement >= config.patience) break;
    }
  }

  if (!have_best) best = Checkpoint::from_model(model);
  report.best_val_qwk = best_qwk > -2.0 ? best_qwk : 0.0;

  best.frontend = prep.spectrogram_config();
  best.max_columns = prep.max_columns();
  best.text_max_len = prep.text_max_len();
  best.vocab = prep.vocab();
  best.scale = scale;
  best.split_seed = config.split_seed;
  best.best_val_qwk = report.best_val_qwk;
  best.selected_epoch = report.selected_epoch;

  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return {std::move(best), std::move(report)};
}

namespace {

// Index-stable parallel for over [0, n).
void parallel_chunks(std::size_t n, int threads,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads < 2 || n < 2) {
    fn(0, n);
    return;
  }
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + n_workers - 1) / n_workers;
  for (std::size_t w = 0; w < n_workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(fn, begin, end);
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<ResponseEval> score_responses(
    const ScoringModel& model, const std::vector<PreparedResponse>& prepared,
    std::size_t n_grades, const ThresholdSet* thresholds, int threads) {
  if (prepared.empty())
    throw DegenerateInputError("evaluate: no responses");
  if (thresholds) thresholds->validate(n_grades);

  std::vector<ResponseEval> evals(prepared.size());
  parallel_chunks(prepared.size(), threads,
                  [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PreparedResponse& r = prepared[i];
      ScoredTensor scored = model.score(r.has_frames ? &r.frames : nullptr,
                                        r.has_tokens ? &r.tokens : nullptr, {});
      ResponseEval e;
      e.id = r.id;
      e.human = r.human_grade;
      e.prediction = make_prediction(scored.score.value(), n_grades);
      if (thresholds)
        e.thresholded_grade = apply_thresholds(e.prediction.rescaled,
                                               *thresholds);
      e.trace = std::move(scored.trace);
      evals[i] = std::move(e);
    }
  });
  return evals;
}

std::vector<PreparedResponse> prepare_records(
    const Preprocessor& prep, const std::vector<ResponseRecord>& records,
    bool want_audio, bool want_text, int threads) {
  std::vector<PreparedResponse> prepared(records.size());
  parallel_chunks(records.size(), threads,
                  [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      prepared[i] = prep.prepare(records[i], want_audio, want_text);
  });
  return prepared;
}

EvalResult evaluate_prepared(const ScoringModel& model,
                             const std::vector<PreparedResponse>& prepared,
                             std::size_t n_grades,
                             const ThresholdSet* thresholds, int threads) {
  std::vector<ResponseEval> evals =
      score_responses(model, prepared, n_grades, thresholds, threads);

  EvalResult result;
  std::vector<int> human, rounded, cut;
  std::vector<double> raw_rescaled, human_d, rounded_d;
  for (const ResponseEval& e : evals) {
    human.push_back(e.human);
    rounded.push_back(e.prediction.rounded_grade);
    raw_rescaled.push_back(e.prediction.rescaled);
    human_d.push_back(static_cast<double>(e.human));
    rounded_d.push_back(static_cast<double>(e.prediction.rounded_grade));
    if (thresholds) cut.push_back(e.thresholded_grade);
  }
  result.qwk = qwk(human, rounded, n_grades);
  if (thresholds) result.qwk_thresholded = qwk(human, cut, n_grades);
  result.mse_raw = mse(human_d, raw_rescaled);
  result.mse_rounded = mse(human_d, rounded_d);
  result.responses = std::move(evals);
  return result;
}

EvalResult evaluate(const ScoringModel& model, const Preprocessor& prep,
                    const std::vector<ResponseRecord>& records,
                    const ThresholdSet* thresholds, int threads) {
  if (records.empty()) throw DegenerateInputError("evaluate: no responses");
  if (prep.scale().size() != model.n_grades())
    throw ContractError("evaluate: dataset scale has " +
                        std::to_string(prep.scale().size()) +
                        " grades, checkpoint expects " +
                        std::to_string(model.n_grades()));
  std::vector<PreparedResponse> prepared = prepare_records(
      prep, records, model.uses_audio(), model.uses_text(), threads);
  return evaluate_prepared(model, prepared, model.n_grades(), thresholds,
                           threads);
}

}  // namespace sg
