#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "speechgrade/checkpoint.hpp"
#include "speechgrade/corpus.hpp"
#include "speechgrade/metrics.hpp"
#include "speechgrade/model.hpp"

namespace sg {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;  // epochs of no val-loss improvement
  double dropout = 0.3;
  std::uint64_t seed = 42;
  std::uint64_t split_seed = 42;  // recorded in the checkpoint
  ModelConfig model;
  std::string embeddings_path;  // optional pretrained vectors
  SpectrogramConfig frontend;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_qwk = 0.0;
  bool val_qwk_defined = true;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t selected_epoch = 0;  // 1-based
  double best_val_qwk = 0.0;
  double wall_time_s = 0.0;

  // Structured lines; wall time is a separate trailing line so determinism
  // checks can compare reports without it.
  std::string to_lines(bool include_wall_time = true) const;
};

// One response with its model-ready inputs and normalized target.
struct PreparedResponse {
  std::string id;
  int human_grade = 0;
  double target = 0.0;
  SpectrogramFrames frames;
  TokenSequence tokens;
  bool has_frames = false;
  bool has_tokens = false;
};

// Shared preprocessing context: spectrogram pipeline + vocabulary + scale.
class Preprocessor {
 public:
  Preprocessor(SpectrogramConfig cfg, std::size_t max_columns,
               std::size_t text_max_len, Vocabulary vocab, GradeScale scale);
  explicit Preprocessor(const Checkpoint& ckpt);

  // Derive max_columns / text_max_len / vocabulary from the training split.
  static Preprocessor fit(const std::vector<ResponseRecord>& train_records,
                          const SpectrogramConfig& cfg, const GradeScale& scale);

  // clip_override substitutes the audio before the frontend (ablations).
  PreparedResponse prepare(const ResponseRecord& record, bool want_audio,
                           bool want_text,
                           const AudioClip* clip_override = nullptr) const;

  const GradeScale& scale() const { return scale_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::size_t max_columns() const { return pipeline_.max_columns(); }
  std::size_t text_max_len() const { return text_max_len_; }
  const SpectrogramConfig& spectrogram_config() const {
    return pipeline_.config();
  }

 private:
  SpectrogramPipeline pipeline_;
  std::size_t text_max_len_;
  Vocabulary vocab_;
  GradeScale scale_;
};

struct TrainOutcome {
  Checkpoint checkpoint;
  TrainReport report;
};

// Mini-batch MSE training with Adam and dropout, early stopping on
// validation loss, model selection by best validation QWK (ties to the
// earlier epoch; undefined QWK falls back to val-loss selection).
TrainOutcome train(ModelKind kind,
                   const std::vector<ResponseRecord>& train_records,
                   const std::vector<ResponseRecord>& val_records,
                   const GradeScale& scale, const TrainConfig& config);

struct ResponseEval {
  std::string id;
  int human = 0;
  ScorePrediction prediction;
  int thresholded_grade = -1;  // -1 when no thresholds supplied
  AttentionTrace trace;
};

struct EvalResult {
  double qwk = 0.0;  // default rounding
  std::optional<double> qwk_thresholded;
  double mse_raw = 0.0;      // rescaled raw predictions vs integer grades
  double mse_rounded = 0.0;  // rounded grades vs integer grades
  std::vector<ResponseEval> responses;
};

EvalResult evaluate(const ScoringModel& model, const Preprocessor& prep,
                    const std::vector<ResponseRecord>& records,
                    const ThresholdSet* thresholds = nullptr, int threads = 1);

// Score prepared responses without rebuilding inputs (used by analyses).
EvalResult evaluate_prepared(const ScoringModel& model,
                             const std::vector<PreparedResponse>& prepared,
                             std::size_t n_grades,
                             const ThresholdSet* thresholds = nullptr,
                             int threads = 1);

// Per-response scoring only, no aggregate metrics (QWK may be undefined on
// degenerate sets; this path never computes it).
std::vector<ResponseEval> score_responses(
    const ScoringModel& model, const std::vector<PreparedResponse>& prepared,
    std::size_t n_grades, const ThresholdSet* thresholds = nullptr,
    int threads = 1);

std::vector<PreparedResponse> prepare_records(
    const Preprocessor& prep, const std::vector<ResponseRecord>& records,
    bool want_audio, bool want_text, int threads = 1);

}  // namespace sg
