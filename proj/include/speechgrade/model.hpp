#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "speechgrade/audio.hpp"
#include "speechgrade/rng.hpp"
#include "speechgrade/tensor.hpp"
#include "speechgrade/text.hpp"

namespace sg {

enum class ModelKind { Audio, Text, Fused };

std::string model_kind_name(ModelKind kind);                   // A | T | MMAF
std::optional<ModelKind> parse_model_kind(const std::string&);

// Per-frame CNN stack feeding a bidirectional LSTM over frames. Filter count
// doubles after every set; convolutions are length-preserving (explicit zero
// padding), pooling halves the step axis.
struct AcousticEncoderConfig {
  std::size_t conv_sets = 5;
  std::size_t convs_per_set = 2;
  std::size_t base_filters = 32;  // 32, 64, 128, 256, 512
  std::size_t kernel_width = 3;
  std::size_t pool_window = 2;
  std::size_t lstm_hidden = 128;  // per direction
  std::size_t mel_bands = 128;    // input channels

  std::size_t filters_in_set(std::size_t set) const {
    return base_filters << set;
  }
  std::size_t cnn_output_width() const {
    return filters_in_set(conv_sets - 1);
  }
  std::size_t output_width() const { return 2 * lstm_hidden; }
};

struct LexicalEncoderConfig {
  std::size_t embedding_dim = 300;
  std::size_t lstm_hidden = 128;  // per direction

  std::size_t output_width() const { return 2 * lstm_hidden; }
};

struct ModelConfig {
  AcousticEncoderConfig acoustic;
  LexicalEncoderConfig lexical;

  // The published architecture.
  static ModelConfig paper() { return {}; }
  // Desk-scale preset for fast experiments; same structure, fewer weights.
  static ModelConfig compact();
};

enum class Modality { Audio, Text };

// Per-time-step attention weights with modality tags; one entry per pooled
// position, weights sum to 1.
struct AttentionTrace {
  struct Position {
    Modality modality;
    std::size_t index;  // frame or token index within its modality
    double weight;
  };
  std::vector<Position> positions;

  std::size_t audio_count() const;
  std::size_t text_count() const;
};

// (text %, audio %); sums to 100.
std::pair<double, double> modality_split(const AttentionTrace& trace);

struct ScorePrediction {
  double normalized = 0.0;  // in (0, 1)
  double rescaled = 0.0;    // normalized * (N-1)
  int rounded_grade = 0;    // default half-up rounding
};

ScorePrediction make_prediction(double normalized, std::size_t n_grades);

// e_t = h_t . w ; a = softmax(e) ; c = sum_t a_t h_t.
// states [T x W], attn_weight [W] -> (context [W], weights [T]).
std::pair<Tensor, Tensor> attention_pool(const Tensor& states,
                                         const Tensor& attn_weight);

// Attention vector plus the final dense layer with logistic output.
struct AttentionHead {
  Tensor attention;     // [W]
  Tensor dense_weight;  // [1 x W]
  Tensor dense_bias;    // [1]
};

struct ScoredTensor {
  Tensor score;  // scalar in (0, 1)
  AttentionTrace trace;
};

struct ForwardOptions {
  bool training = false;
  double dropout_rate = 0.0;
  Rng* rng = nullptr;  // required when training with dropout_rate > 0
};

// Time-axis concatenation of both modality state sequences under a single
// attention distribution, then dense + logistic scoring.
ScoredTensor fuse_and_score(const Tensor& audio_states,
                            const Tensor& text_states,
                            const AttentionHead& head,
                            const ForwardOptions& opts = {});

ScoredTensor unimodal_score(const Tensor& states, Modality modality,
                            const AttentionHead& head,
                            const ForwardOptions& opts = {});

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// One scoring network: BDRCNNAttn (audio), BDLSTMAttn (text), or the fused
// model. Parameters are owned here in a stable named order.
class ScoringModel {
 public:
  ScoringModel(ModelKind kind, const ModelConfig& config,
               std::size_t vocab_size, std::size_t n_grades, Rng& init_rng);

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t n_grades() const { return n_grades_; }

  // CNN per frame, then a bidirectional LSTM over frame vectors. Encodes the
  // first frame_limit frames when given (used to mask all-padding frames).
  Tensor encode_audio(const SpectrogramFrames& frames,
                      std::optional<std::size_t> frame_limit = {}) const;

  // Embedding lookup then bidirectional LSTM over the valid region only.
  Tensor encode_text(const TokenSequence& tokens) const;

  // Full forward pass; pass the modalities the kind requires.
  ScoredTensor score(const SpectrogramFrames* frames,
                     const TokenSequence* tokens,
                     const ForwardOptions& opts = {}) const;

  std::vector<NamedParam>& parameters() { return params_; }
  const std::vector<NamedParam>& parameters() const { return params_; }
  Tensor* find_parameter(const std::string& name);

  // Copies pretrained values into the embedding parameter.
  void set_embeddings(const EmbeddingTable& table);

  bool uses_audio() const { return kind_ != ModelKind::Text; }
  bool uses_text() const { return kind_ != ModelKind::Audio; }

 private:
  struct ConvLayer {
    Tensor kernels;  // [C_out x C_in x W]
    Tensor bias;     // [C_out]
  };

  ModelKind kind_;
  ModelConfig config_;
  std::size_t vocab_size_;
  std::size_t n_grades_;

  std::vector<std::vector<ConvLayer>> conv_sets_;
  LstmWeights acoustic_fw_, acoustic_bw_;
  Tensor embedding_;
  LstmWeights lexical_fw_, lexical_bw_;
  AttentionHead head_;

  std::vector<NamedParam> params_;

  void register_params();
};

}  // namespace sg
