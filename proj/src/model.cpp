#include "speechgrade/model.hpp"

#include <algorithm>
#include <cmath>

#include "speechgrade/errors.hpp"
#include "speechgrade/metrics.hpp"

namespace sg {

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Audio: return "A";
    case ModelKind::Text: return "T";
    case ModelKind::Fused: return "MMAF";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(const std::string& s) {
  if (s == "A") return ModelKind::Audio;
  if (s == "T") return ModelKind::Text;
  if (s == "MMAF") return ModelKind::Fused;
  return std::nullopt;
}

ModelConfig ModelConfig::compact() {
  ModelConfig c;
  c.acoustic.conv_sets = 3;
  c.acoustic.base_filters = 8;  // 8, 16, 32
  c.acoustic.lstm_hidden = 32;
  c.lexical.embedding_dim = 32;
  c.lexical.lstm_hidden = 32;
  return c;
}

std::size_t AttentionTrace::audio_count() const {
  std::size_t n = 0;
  for (const Position& p : positions)
    if (p.modality == Modality::Audio) ++n;
  return n;
}

std::size_t AttentionTrace::text_count() const {
  return positions.size() - audio_count();
}

std::pair<double, double> modality_split(const AttentionTrace& trace) {
  if (trace.positions.empty())
    throw DegenerateInputError("modality_split: empty trace");
  double text = 0.0, audio = 0.0;
  for (const auto& p : trace.positions)
    (p.modality == Modality::Text ? text : audio) += p.weight;
  return {100.0 * text, 100.0 * audio};
}

ScorePrediction make_prediction(double normalized, std::size_t n_grades) {
  ScorePrediction p;
  p.normalized = normalized;
  p.rescaled = normalized * static_cast<double>(n_grades - 1);
  p.rounded_grade = round_default(p.rescaled, n_grades);
  return p;
}

std::pair<Tensor, Tensor> attention_pool(const Tensor& states,
                                         const Tensor& attn_weight) {
  if (states.rank() != 2 || attn_weight.rank() != 1 ||
      states.dim(1) != attn_weight.dim(0))
    throw DimensionError("attention_pool: states " +
                         shape_to_string(states.shape()) + " vs weight " +
                         shape_to_string(attn_weight.shape()));
  const std::size_t t = states.dim(0), w = states.dim(1);
  Tensor energies =
      reshape(matmul(states, reshape(attn_weight, {w, 1})), {t});
  Tensor weights = softmax(energies);
  Tensor context = reshape(matmul(reshape(weights, {1, t}), states), {w});
  return {context, weights};
}

namespace {

AttentionTrace build_trace(const Tensor& weights, std::size_t audio_count,
                           std::size_t text_count) {
  AttentionTrace trace;
  trace.positions.reserve(audio_count + text_count);
  const auto& v = weights.data();
  for (std::size_t i = 0; i < audio_count; ++i)
    trace.positions.push_back({Modality::Audio, i, v[i]});
  for (std::size_t i = 0; i < text_count; ++i)
    trace.positions.push_back({Modality::Text, i, v[audio_count + i]});
  return trace;
}

Tensor dense_logistic(const Tensor& context, const AttentionHead& head,
                      const ForwardOptions& opts) {
  Tensor pooled = context;
  if (opts.training && opts.dropout_rate > 0.0) {
    if (!opts.rng)
      throw ContractError("training-mode dropout requires an rng");
    pooled = dropout(pooled, opts.dropout_rate, true, *opts.rng);
  }
  const std::size_t w = pooled.dim(0);
  Tensor z = add(reshape(matmul(head.dense_weight, reshape(pooled, {w, 1})), {1}),
                 head.dense_bias);
  return sigmoid(z);
}

}  // namespace

ScoredTensor fuse_and_score(const Tensor& audio_states,
                            const Tensor& text_states,
                            const AttentionHead& head,
                            const ForwardOptions& opts) {
  if (audio_states.rank() != 2 || text_states.rank() != 2 ||
      audio_states.dim(1) != text_states.dim(1))
    throw DimensionError("fuse_and_score: state widths differ, " +
                         shape_to_string(audio_states.shape()) + " vs " +
                         shape_to_string(text_states.shape()));
  Tensor fused = concat_dim0({audio_states, text_states});
  auto [context, weights] = attention_pool(fused, head.attention);
  ScoredTensor out;
  out.score = dense_logistic(context, head, opts);
  out.trace = build_trace(weights, audio_states.dim(0), text_states.dim(0));
  return out;
}

ScoredTensor unimodal_score(const Tensor& states, Modality modality,
                            const AttentionHead& head,
                            const ForwardOptions& opts) {
  auto [context, weights] = attention_pool(states, head.attention);
  ScoredTensor out;
  out.score = dense_logistic(context, head, opts);
  out.trace = build_trace(weights,
                          modality == Modality::Audio ? states.dim(0) : 0,
                          modality == Modality::Text ? states.dim(0) : 0);
  return out;
}

ScoringModel::ScoringModel(ModelKind kind, const ModelConfig& config,
                           std::size_t vocab_size, std::size_t n_grades,
                           Rng& rng)
    : kind_(kind), config_(config), vocab_size_(vocab_size),
      n_grades_(n_grades) {
  if (n_grades_ < 2)
    throw ParameterError("scoring model needs at least 2 grades");
  if (kind_ == ModelKind::Fused &&
      config_.acoustic.output_width() != config_.lexical.output_width())
    throw ParameterError(
        "fusion requires equal encoder widths, acoustic " +
        std::to_string(config_.acoustic.output_width()) + " vs lexical " +
        std::to_string(config_.lexical.output_width()));
  if (uses_text() && vocab_size_ < 2)
    throw ParameterError("text model requires a vocabulary");

  std::size_t head_width = 0;
  if (uses_audio()) {
    const auto& a = config_.acoustic;
    std::size_t in_ch = a.mel_bands;
    for (std::size_t s = 0; s < a.conv_sets; ++s) {
      std::vector<ConvLayer> set;
      const std::size_t out_ch = a.filters_in_set(s);
      for (std::size_t l = 0; l < a.convs_per_set; ++l) {
        ConvLayer layer;
        layer.kernels = Tensor::glorot({out_ch, in_ch, a.kernel_width},
                                       in_ch * a.kernel_width, out_ch, rng);
        layer.bias = Tensor::zeros({out_ch}, true);
        set.push_back(std::move(layer));
        in_ch = out_ch;
      }
      conv_sets_.push_back(std::move(set));
    }
    acoustic_fw_ = make_lstm_weights(a.cnn_output_width(), a.lstm_hidden, rng);
    acoustic_bw_ = make_lstm_weights(a.cnn_output_width(), a.lstm_hidden, rng);
    head_width = a.output_width();
  }
  if (uses_text()) {
    const auto& l = config_.lexical;
    embedding_ =
        Tensor::uniform({vocab_size_, l.embedding_dim}, -0.05, 0.05, rng, true);
    for (std::size_t j = 0; j < l.embedding_dim; ++j) {
      embedding_.data()[Vocabulary::kPadId * l.embedding_dim + j] = 0.0;
      embedding_.data()[Vocabulary::kUnkId * l.embedding_dim + j] = 0.0;
    }
    lexical_fw_ = make_lstm_weights(l.embedding_dim, l.lstm_hidden, rng);
    lexical_bw_ = make_lstm_weights(l.embedding_dim, l.lstm_hidden, rng);
    head_width = l.output_width();
  }
  head_.attention = Tensor::uniform({head_width}, -0.05, 0.05, rng, true);
  head_.dense_weight = Tensor::glorot({1, head_width}, head_width, 1, rng);
  head_.dense_bias = Tensor::zeros({1}, true);

  register_params();
}

void ScoringModel::register_params() {
  params_.clear();
  if (uses_audio()) {
    for (std::size_t s = 0; s < conv_sets_.size(); ++s)
      for (std::size_t l = 0; l < conv_sets_[s].size(); ++l) {
        const std::string base = "acoustic.set" + std::to_string(s) + ".conv" +
                                 std::to_string(l);
        params_.push_back({base + ".kernels", conv_sets_[s][l].kernels});
        params_.push_back({base + ".bias", conv_sets_[s][l].bias});
      }
    params_.push_back({"acoustic.fw.input_weights", acoustic_fw_.input_weights});
    params_.push_back({"acoustic.fw.recurrent_weights",
                       acoustic_fw_.recurrent_weights});
    params_.push_back({"acoustic.fw.bias", acoustic_fw_.bias});
    params_.push_back({"acoustic.bw.input_weights", acoustic_bw_.input_weights});
    params_.push_back({"acoustic.bw.recurrent_weights",
                       acoustic_bw_.recurrent_weights});
    params_.push_back({"acoustic.bw.bias", acoustic_bw_.bias});
  }
  if (uses_text()) {
    params_.push_back({"lexical.embedding", embedding_});
    params_.push_back({"lexical.fw.input_weights", lexical_fw_.input_weights});
    params_.push_back({"lexical.fw.recurrent_weights",
                       lexical_fw_.recurrent_weights});
    params_.push_back({"lexical.fw.bias", lexical_fw_.bias});
    params_.push_back({"lexical.bw.input_weights", lexical_bw_.input_weights});
    params_.push_back({"lexical.bw.recurrent_weights",
                       lexical_bw_.recurrent_weights});
    params_.push_back({"lexical.bw.bias", lexical_bw_.bias});
  }
  params_.push_back({"head.attention", head_.attention});
  params_.push_back({"head.dense.weight", head_.dense_weight});
  params_.push_back({"head.dense.bias", head_.dense_bias});
}

Tensor* ScoringModel::find_parameter(const std::string& name) {
  for (NamedParam& p : params_)
    if (p.name == name) return &p.tensor;
  return nullptr;
}

void ScoringModel::set_embeddings(const EmbeddingTable& table) {
  if (!uses_text())
    throw ContractError("audio-only model has no embedding table");
  if (table.table.shape() != embedding_.shape())
    throw DimensionError("embedding table " +
                         shape_to_string(table.table.shape()) +
                         " does not match model " +
                         shape_to_string(embedding_.shape()));
  embedding_.data() = table.table.data();
}

Tensor ScoringModel::encode_audio(const SpectrogramFrames& frames,
                                  std::optional<std::size_t> frame_limit) const {
  if (!uses_audio())
    throw ContractError("text-only model cannot encode audio");
  const auto& a = config_.acoustic;
  std::size_t count = frames.frames.size();
  if (frame_limit && *frame_limit < count) count = *frame_limit;
  if (count == 0)
    throw DegenerateInputError("encode_audio: no frames");

  const std::size_t pad_left = (a.kernel_width - 1) / 2;
  const std::size_t pad_right = a.kernel_width - 1 - pad_left;

  std::vector<Tensor> frame_vecs(count);
  for (std::size_t f = 0; f < count; ++f) {
    const Matrix& m = frames.frames[f];
    if (m.rows != a.mel_bands || m.cols == 0)
      throw DimensionError("encode_audio: frame " + std::to_string(f) +
                           " is " + std::to_string(m.rows) + "x" +
                           std::to_string(m.cols) + ", expected " +
                           std::to_string(a.mel_bands) + " mel rows");
    Tensor x = Tensor::from_data({m.rows, m.cols}, m.v);
    for (std::size_t s = 0; s < a.conv_sets; ++s) {
      for (const ConvLayer& layer : conv_sets_[s])
        x = relu(conv1d(pad_steps(x, pad_left, pad_right), layer.kernels,
                        layer.bias));
      if (x.dim(1) >= a.pool_window) x = maxpool1d(x, a.pool_window);
    }
    frame_vecs[f] = reshape(global_maxpool(x), {1, a.cnn_output_width()});
  }
  Tensor sequence = count == 1 ? frame_vecs[0] : concat_dim0(frame_vecs);
  return bidirectional_scan(sequence, acoustic_fw_, acoustic_bw_);
}

Tensor ScoringModel::encode_text(const TokenSequence& tokens) const {
  if (!uses_text())
    throw ContractError("audio-only model cannot encode text");
  if (tokens.valid_length == 0)
    throw DegenerateInputError("encode_text: all-padding token sequence");
  std::vector<int> ids(tokens.ids.begin(),
                       tokens.ids.begin() +
                           static_cast<long>(tokens.valid_length));
  Tensor embedded = gather_rows(embedding_, ids);
  return bidirectional_scan(embedded, lexical_fw_, lexical_bw_);
}

ScoredTensor ScoringModel::score(const SpectrogramFrames* frames,
                                 const TokenSequence* tokens,
                                 const ForwardOptions& opts) const {
  if (uses_audio() && !frames)
    throw ContractError("model kind " + model_kind_name(kind_) +
                        " requires audio frames");
  if (uses_text() && !tokens)
    throw ContractError("model kind " + model_kind_name(kind_) +
                        " requires a token sequence");
  switch (kind_) {
    case ModelKind::Audio: {
      Tensor h = encode_audio(*frames, frames->num_valid_frames());
      return unimodal_score(h, Modality::Audio, head_, opts);
    }
    case ModelKind::Text: {
      Tensor h = encode_text(*tokens);
      return unimodal_score(h, Modality::Text, head_, opts);
    }
    case ModelKind::Fused: {
      Tensor ha = encode_audio(*frames, frames->num_valid_frames());
      Tensor ht = encode_text(*tokens);
      return fuse_and_score(ha, ht, head_, opts);
    }
  }
  throw ContractError("unknown model kind");
}

}  // namespace sg
