// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs end to end on synthetic corpora in a temp directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "speechgrade/analysis.hpp"
#include "speechgrade/checkpoint.hpp"
#include "speechgrade/corpus.hpp"
#include "speechgrade/errors.hpp"
#include "speechgrade/log.hpp"
#include "speechgrade/metrics.hpp"
#include "speechgrade/model.hpp"
#include "speechgrade/optimizer.hpp"
#include "speechgrade/training.hpp"
#include "support/gradcheck.hpp"

using namespace sg;
namespace fs = std::filesystem;
using sg::testing::check_gradients;
using sg::testing::GradCheckResult;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw Failure(msg);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "sg_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.acoustic.conv_sets = 1;
  c.acoustic.convs_per_set = 2;
  c.acoustic.base_filters = 4;
  c.acoustic.kernel_width = 3;
  c.acoustic.pool_window = 2;
  c.acoustic.lstm_hidden = 3;
  c.acoustic.mel_bands = 8;
  c.lexical.embedding_dim = 5;
  c.lexical.lstm_hidden = 3;
  return c;
}

SpectrogramFrames random_frames(std::size_t n, std::size_t size, Rng& rng) {
  SpectrogramFrames f;
  f.frame_size = size;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix m(size, size);
    for (double& v : m.v) v = rng.uniform(-1, 1);
    f.frames.push_back(std::move(m));
  }
  f.num_valid_columns = n * size;
  return f;
}

// ---------------------------------------------------------------------------
// 1. gradient correctness
// ---------------------------------------------------------------------------

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260808);
  auto expect = [&](const GradCheckResult& res, const std::string& op) {
    require(res.ok, op + " gradient mismatch: worst rel " +
                        fmt(res.worst_rel) + " at " + res.where);
  };

  for (int i = 0; i < 20; ++i) {
    // matmul
    {
      const std::size_t m = 1 + rng.uniform_index(4),
                        k = 1 + rng.uniform_index(4),
                        n = 1 + rng.uniform_index(4);
      Tensor a = Tensor::uniform({m, k}, -1, 1, rng, true);
      Tensor b = Tensor::uniform({k, n}, -1, 1, rng, true);
      expect(check_gradients({a, b},
                             [&] { return sum(mul(matmul(a, b), matmul(a, b))); }),
             "matmul");
    }
    // conv1d
    {
      const std::size_t cin = 1 + rng.uniform_index(3),
                        cout = 1 + rng.uniform_index(3),
                        w = 1 + rng.uniform_index(3);
      const std::size_t steps = w + rng.uniform_index(5);
      Tensor in = Tensor::uniform({cin, steps}, -1, 1, rng, true);
      Tensor kr = Tensor::uniform({cout, cin, w}, -1, 1, rng, true);
      Tensor b = Tensor::uniform({cout}, -1, 1, rng, true);
      expect(check_gradients({in, kr, b},
                             [&] {
                               Tensor c = conv1d(in, kr, b);
                               return sum(mul(c, c));
                             }),
             "conv1d");
    }
    // maxpool1d + global_maxpool
    {
      Tensor in = Tensor::uniform({2, 6}, -1, 1, rng, true);
      expect(check_gradients({in},
                             [&] {
                               Tensor p = maxpool1d(in, 2);
                               return sum(mul(p, p));
                             }),
             "maxpool1d");
      expect(check_gradients({in},
                             [&] {
                               Tensor g = global_maxpool(in);
                               return sum(mul(g, g));
                             }),
             "global_maxpool");
    }
    // lstm_cell
    {
      LstmWeights w = make_lstm_weights(3, 2, rng);
      Tensor x = Tensor::uniform({3}, -1, 1, rng, true);
      Tensor h0 = Tensor::uniform({2}, -1, 1, rng, true);
      Tensor c0 = Tensor::uniform({2}, -1, 1, rng, true);
      expect(check_gradients(
                 {x, h0, c0, w.input_weights, w.recurrent_weights, w.bias},
                 [&] {
                   auto [h, c] = lstm_cell(x, h0, c0, w);
                   Tensor hc = concat_dim0({h, c});
                   return sum(mul(hc, hc));
                 }),
             "lstm_cell");
    }
    // bidirectional_scan
    {
      LstmWeights fw = make_lstm_weights(2, 2, rng);
      LstmWeights bw = make_lstm_weights(2, 2, rng);
      const std::size_t t = 1 + rng.uniform_index(3);
      Tensor seq = Tensor::uniform({t, 2}, -1, 1, rng, true);
      expect(check_gradients({seq, fw.input_weights, fw.recurrent_weights,
                              fw.bias, bw.input_weights, bw.recurrent_weights,
                              bw.bias},
                             [&] {
                               Tensor o = bidirectional_scan(seq, fw, bw);
                               return sum(mul(o, o));
                             }),
             "bidirectional_scan");
    }
    // softmax
    {
      const std::size_t n = 2 + rng.uniform_index(5);
      Tensor x = Tensor::uniform({n}, -2, 2, rng, true);
      expect(check_gradients({x},
                             [&] {
                               Tensor s = softmax(x);
                               return sum(mul(s, s));
                             }),
             "softmax");
    }
    // dropout (fixed mask via a reseeded stream per evaluation)
    {
      Tensor x = Tensor::uniform({6}, -1, 1, rng, true);
      const std::uint64_t mask_seed = rng.next_u64();
      expect(check_gradients({x},
                             [&] {
                               Rng mask_rng(mask_seed);
                               Tensor d = dropout(x, 0.4, true, mask_rng);
                               return sum(mul(d, d));
                             }),
             "dropout");
    }
    // elementwise and shape ops
    {
      Tensor x = Tensor::uniform({5}, -1.5, 1.5, rng, true);
      Tensor y = Tensor::uniform({5}, -1.5, 1.5, rng, true);
      expect(check_gradients({x, y},
                             [&] {
                               Tensor a = add(relu(x), sigmoid(y));
                               Tensor b = sub(tanh(x), scale(y, 0.3));
                               Tensor s = concat_dim0(
                                   {slice_dim0(mul(a, b), 1, 4), x});
                               return sum(mul(s, s));
                             }),
             "elementwise/shape ops");
      Tensor table = Tensor::uniform({4, 3}, -1, 1, rng, true);
      expect(check_gradients({table},
                             [&] {
                               Tensor rows = gather_rows(table, {0, 2, 2, 3});
                               return sum(mul(rows, rows));
                             }),
             "gather_rows");
      Tensor img = Tensor::uniform({2, 4}, -1, 1, rng, true);
      expect(check_gradients({img},
                             [&] {
                               Tensor p = pad_steps(img, 1, 1);
                               return sum(mul(p, p));
                             }),
             "pad_steps");
    }
  }

  // full fused graph at the tiny configuration
  for (int i = 0; i < 20; ++i) {
    Rng init(1000 + i);
    ScoringModel model(ModelKind::Fused, tiny_config(), 7, 3, init);
    Rng data(2000 + i);
    SpectrogramFrames frames = random_frames(1 + data.uniform_index(2), 8, data);
    TokenSequence seq;
    const std::size_t t_len = 1 + data.uniform_index(4);
    for (std::size_t t = 0; t < t_len; ++t)
      seq.ids.push_back(static_cast<int>(1 + data.uniform_index(6)));
    seq.valid_length = t_len;
    std::vector<Tensor> params;
    for (NamedParam& p : model.parameters()) params.push_back(p.tensor);
    GradCheckResult res = check_gradients(
        params, [&] { return model.score(&frames, &seq, {}).score; }, 1e-6,
        1e-4);
    require(res.ok, "fused graph gradient mismatch: worst rel " +
                        fmt(res.worst_rel) + " at " + res.where);
  }

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  require(secs < 120.0, "gradient suite took " + fmt(secs) + " s (>= 2 min)");
}

// ---------------------------------------------------------------------------
// 2. QWK oracle
// ---------------------------------------------------------------------------

double brute_force_qwk(const std::vector<int>& human,
                       const std::vector<int>& pred, std::size_t n) {
  std::vector<std::vector<double>> w(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      w[i][j] = d * d / static_cast<double>((n - 1) * (n - 1));
    }
  std::vector<std::vector<double>> o(n, std::vector<double>(n, 0.0));
  std::vector<double> hh(n, 0.0), hp(n, 0.0);
  for (std::size_t k = 0; k < human.size(); ++k) {
    o[human[k]][pred[k]] += 1.0;
    hh[human[k]] += 1.0;
    hp[pred[k]] += 1.0;
  }
  double e_sum = 0.0;
  std::vector<std::vector<double>> e(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      e[i][j] = hh[i] * hp[j];
      e_sum += e[i][j];
    }
  const double o_sum = static_cast<double>(human.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      num += w[i][j] * o[i][j];
      den += w[i][j] * e[i][j] * o_sum / e_sum;
    }
  return 1.0 - num / den;
}

void criterion_qwk_oracle() {
  Rng rng(424242);
  std::size_t checked = 0;
  while (checked < 1000) {
    const std::size_t n = 2 + rng.uniform_index(4);
    const std::size_t len = 2 + rng.uniform_index(60);
    std::vector<int> human(len), pred(len);
    for (std::size_t i = 0; i < len; ++i) {
      human[i] = static_cast<int>(rng.uniform_index(n));
      pred[i] = static_cast<int>(rng.uniform_index(n));
    }
    double ours;
    try {
      ours = qwk(human, pred, n);
    } catch (const UndefinedKappaError&) {
      continue;
    }
    const double oracle = brute_force_qwk(human, pred, n);
    require(std::abs(ours - oracle) < 1e-12,
            "qwk " + fmt(ours) + " vs oracle " + fmt(oracle));
    ++checked;
  }

  std::vector<int> self{0, 2, 1, 1, 3, 0};
  require(qwk(self, self, 4) == 1.0, "qwk(x, x) != 1");

  std::vector<int> human{0, 0, 1, 1};
  std::vector<int> pred{0, 1, 1, 1};
  require(qwk(human, pred, 2) == 0.5, "worked N=2 example != 0.5");
}

// ---------------------------------------------------------------------------
// 3. attention invariants
// ---------------------------------------------------------------------------

void criterion_attention_invariants() {
  Rng rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t ta = 1 + rng.uniform_index(8);
    const std::size_t tt = 1 + rng.uniform_index(8);
    const std::size_t width = 2 + rng.uniform_index(6);
    Tensor ha = Tensor::uniform({ta, width}, -3, 3, rng);
    Tensor ht = Tensor::uniform({tt, width}, -3, 3, rng);
    AttentionHead head;
    head.attention = Tensor::uniform({width}, -2, 2, rng);
    head.dense_weight = Tensor::uniform({1, width}, -1, 1, rng);
    head.dense_bias = Tensor::uniform({1}, -1, 1, rng);
    ScoredTensor s = fuse_and_score(ha, ht, head);

    require(s.trace.positions.size() == ta + tt, "trace length mismatch");
    double total = 0.0;
    for (const auto& p : s.trace.positions) {
      require(p.weight >= 0.0, "negative attention weight");
      total += p.weight;
    }
    require(std::abs(total - 1.0) <= 1e-9, "weights sum " + fmt(total));
    const auto [tp, ap] = modality_split(s.trace);
    require(std::abs(tp + ap - 100.0) <= 1e-6,
            "percentages sum " + fmt(tp + ap));

    // context bounded by the pooled states, coordinate-wise
    Tensor fused = concat_dim0({ha, ht});
    auto [ctx, weights] = attention_pool(fused, head.attention);
    for (std::size_t j = 0; j < width; ++j) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t t = 0; t < ta + tt; ++t) {
        lo = std::min(lo, fused.data()[t * width + j]);
        hi = std::max(hi, fused.data()[t * width + j]);
      }
      require(ctx.data()[j] >= lo - 1e-9 && ctx.data()[j] <= hi + 1e-9,
              "context outside the state hull");
    }
  }
}

// ---------------------------------------------------------------------------
// 4. frontend fidelity
// ---------------------------------------------------------------------------

void criterion_frontend() {
  // bin-centered sine: column argmax at the predicted bin
  const std::size_t k = 96;  // 96 * 16000 / 2048 = 750 Hz
  AudioClip tone;
  tone.sample_rate = 16000;
  tone.samples.resize(8000);
  for (std::size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] =
        0.5 * std::sin(2.0 * 3.14159265358979323846 * (k * 16000.0 / 2048.0) *
                       i / 16000.0);
  Matrix mag = stft(tone, 2048, 512);
  for (std::size_t col = 3; col + 3 < mag.cols; ++col) {
    std::size_t best = 0;
    for (std::size_t r = 0; r < mag.rows; ++r)
      if (mag.at(r, col) > mag.at(best, col)) best = r;
    require(best == k, "stft argmax at bin " + std::to_string(best) +
                           ", expected " + std::to_string(k));
  }

  // 440 Hz lands in the filterbank-predicted band
  const double m_lo = hz_to_mel(0.0), m_hi = hz_to_mel(8000.0);
  std::size_t predicted = 0;
  double best_dist = 1e300;
  for (std::size_t band = 0; band < 128; ++band) {
    const double center = mel_to_hz(m_lo + (m_hi - m_lo) * (band + 1) / 129.0);
    if (std::abs(center - 440.0) < best_dist) {
      best_dist = std::abs(center - 440.0);
      predicted = band;
    }
  }
  AudioClip a440;
  a440.sample_rate = 16000;
  a440.samples.resize(8000);
  for (std::size_t i = 0; i < a440.samples.size(); ++i)
    a440.samples[i] =
        0.5 * std::sin(2.0 * 3.14159265358979323846 * 440.0 * i / 16000.0);
  Matrix mel = mel_project(stft(a440, 2048, 512), 128, 0, 8000, 16000, 2048);
  const std::size_t col = mel.cols / 2;
  std::size_t argmax = 0;
  for (std::size_t m = 0; m < 128; ++m)
    if (mel.at(m, col) > mel.at(argmax, col)) argmax = m;
  require(std::llabs(static_cast<long long>(argmax) -
                     static_cast<long long>(predicted)) <= 1,
          "440 Hz in band " + std::to_string(argmax) + ", predicted " +
              std::to_string(predicted));

  // frame splitting reassembles bit-exactly
  Rng rng(5150);
  Matrix padded(128, 384);
  for (double& v : padded.v) v = rng.uniform(-4, 4);
  SpectrogramFrames frames = split_frames(padded, 300);
  require(frames.frames.size() == 3, "expected 3 frames");
  for (std::size_t r = 0; r < 128; ++r)
    for (std::size_t c = 0; c < 384; ++c) {
      const double v = frames.frames[c / 128].at(r, c % 128);
      require(v == padded.at(r, c), "frame reassembly mismatch");
    }
}

// ---------------------------------------------------------------------------
// shared training helpers for criteria 5, 7, 8, 9
// ---------------------------------------------------------------------------

struct TrainedRun {
  Checkpoint ckpt;
  TrainReport report;
  CorpusSplits splits;
  GradeScale scale;
};

TrainedRun train_on(const SynthSpec& spec, const std::string& leaf,
                    ModelKind kind, const TrainConfig& base) {
  const fs::path dir = work_dir() / leaf;
  SynthResult corpus = [&] {
    // reuse a corpus generated by an earlier criterion run
    if (fs::exists(dir / "manifest.tsv")) {
      Manifest m = read_manifest((dir / "manifest.tsv").string());
      return SynthResult{m.records, *m.scale};
    }
    return generate_synthetic_corpus(spec, dir.string());
  }();
  CorpusSplits splits = stratified_split(corpus.records, {}, base.split_seed);
  TrainConfig cfg = base;
  TrainOutcome out = train(kind, splits.train, splits.val, corpus.scale, cfg);
  return {std::move(out.checkpoint), std::move(out.report), std::move(splits),
          corpus.scale};
}

// ---------------------------------------------------------------------------
// 5. end-to-end learning
// ---------------------------------------------------------------------------

void criterion_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthSpec spec;
  spec.n_classes = 3;
  spec.per_class = 40;  // 120 responses
  spec.seed = 7;
  spec.base_duration_s = 2.0;

  TrainConfig cfg;
  cfg.model = ModelConfig::compact();
  cfg.seed = 11;
  cfg.split_seed = 11;
  cfg.max_epochs = 50;
  cfg.patience = 8;
  cfg.dropout = 0.1;

  double qwk_by_kind[3] = {0, 0, 0};
  for (ModelKind kind : {ModelKind::Audio, ModelKind::Text, ModelKind::Fused}) {
    TrainedRun run = train_on(spec, "e2e", kind, cfg);
    ScoringModel model = run.ckpt.materialize();
    Preprocessor prep(run.ckpt);
    EvalResult test = evaluate(model, prep, run.splits.test, nullptr, 2);
    qwk_by_kind[static_cast<int>(kind)] = test.qwk;
    std::cout << "    " << model_kind_name(kind)
              << " test QWK = " << fmt(test.qwk) << " (selected epoch "
              << run.report.selected_epoch << ")\n";
    if (kind == ModelKind::Text)
      require(run.report.best_val_qwk > 0.8,
              "text model validation QWK " + fmt(run.report.best_val_qwk) +
                  " <= 0.8 on separable text");
  }
  const double a = qwk_by_kind[static_cast<int>(ModelKind::Audio)];
  const double t = qwk_by_kind[static_cast<int>(ModelKind::Text)];
  const double m = qwk_by_kind[static_cast<int>(ModelKind::Fused)];
  require(m >= 0.8, "MMAF test QWK " + fmt(m) + " < 0.8");
  require(m >= std::max(a, t) - 1e-12,
          "MMAF " + fmt(m) + " below a unimodal baseline (A " + fmt(a) +
              ", T " + fmt(t) + ")");
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  require(secs < 900.0, "end-to-end run took " + fmt(secs) + " s (>= 15 min)");
}

// ---------------------------------------------------------------------------
// 6. threshold calibration
// ---------------------------------------------------------------------------

void criterion_thresholds() {
  // optimized thresholds never score below default rounding
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull, 6ull, 7ull, 8ull}) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.uniform_index(4);
    std::vector<double> raw;
    std::vector<int> human;
    for (int i = 0; i < 60; ++i) {
      const int g = static_cast<int>(rng.uniform_index(n));
      human.push_back(g);
      raw.push_back(std::clamp(g + 0.9 * rng.gaussian(), 0.0,
                               static_cast<double>(n - 1)));
    }
    std::vector<int> def;
    for (double r : raw) def.push_back(round_default(r, n));
    double base;
    try {
      base = qwk(human, def, n);
    } catch (const UndefinedKappaError&) {
      continue;
    }
    ThresholdSet cuts = optimize_thresholds(raw, human, n);
    std::vector<int> opt;
    for (double r : raw) opt.push_back(apply_thresholds(r, cuts));
    const double tuned = qwk(human, opt, n);
    require(tuned >= base - 1e-12, "optimized " + fmt(tuned) +
                                       " below default rounding " + fmt(base) +
                                       " at seed " + std::to_string(seed));
  }

  // coordinate ascent equals exhaustive lattice search on the oracle instance
  Rng rng(2718);
  std::vector<double> raw;
  std::vector<int> human;
  for (int i = 0; i < 30; ++i) {
    const int g = static_cast<int>(rng.uniform_index(3));
    human.push_back(g);
    raw.push_back(std::clamp(g + rng.gaussian() * 0.8, 0.0, 2.0));
  }
  ThresholdSearchConfig cfg;
  cfg.grid_step = 0.05;
  ThresholdSet ours = optimize_thresholds(raw, human, 3, cfg);
  std::vector<int> our_pred;
  for (double r : raw) our_pred.push_back(apply_thresholds(r, ours));
  const double our_qwk = qwk(human, our_pred, 3);
  double best = -2.0;
  for (int a = 1; a < 40; ++a)
    for (int b = a + 1; b < 40; ++b) {
      ThresholdSet t;
      t.cuts = {a * 0.05, b * 0.05};
      std::vector<int> pred;
      for (double r : raw) pred.push_back(apply_thresholds(r, t));
      try {
        best = std::max(best, qwk(human, pred, 3));
      } catch (const UndefinedKappaError&) {
      }
    }
  require(std::abs(our_qwk - best) < 1e-12,
          "coordinate ascent " + fmt(our_qwk) + " vs exhaustive " + fmt(best));
}

// ---------------------------------------------------------------------------
// 7. white-noise ablation
// ---------------------------------------------------------------------------

void criterion_noise_ablation() {
  TrainConfig cfg;
  cfg.model = ModelConfig::compact();
  cfg.seed = 13;
  cfg.split_seed = 13;
  cfg.max_epochs = 40;
  cfg.patience = 8;
  cfg.dropout = 0.1;

  // audio carries the grade signal; text does not
  SynthSpec audio_spec;
  audio_spec.n_classes = 3;
  audio_spec.per_class = 30;
  audio_spec.seed = 21;
  audio_spec.base_duration_s = 2.0;
  audio_spec.text_informative = false;
  TrainedRun audio_run = train_on(audio_spec, "noise_audio", ModelKind::Fused,
                                  cfg);
  {
    ScoringModel model = audio_run.ckpt.materialize();
    Preprocessor prep(audio_run.ckpt);
    EvalResult clean = evaluate(model, prep, audio_run.splits.test, nullptr, 2);
    ThresholdSet mid = ThresholdSet::midpoints(audio_run.scale.size());
    AblationResult noisy = ablate_white_noise(model, prep,
                                              audio_run.splits.test, mid, 5, 2);
    std::cout << "    audio-signal corpus: clean QWK " << fmt(clean.qwk)
              << ", noise QWK " << fmt(noisy.qwk) << "\n";
    require(noisy.qwk < clean.qwk,
            "white noise did not reduce QWK on the audio-signal corpus (" +
                fmt(clean.qwk) + " -> " + fmt(noisy.qwk) + ")");

    // grade-uncorrelated replacement audio (same template clip for every
    // response) also lowers QWK against the original
    const fs::path swap_dir = work_dir() / "swap_audio";
    fs::create_directories(swap_dir);
    const AudioClip temp_clip = read_wav(audio_run.splits.test[0].audio_path);
    for (const ResponseRecord& r : audio_run.splits.test)
      write_wav((swap_dir / (r.id + ".wav")).string(), temp_clip);
    AblationResult swapped = ablate_swapped_audio(
        model, prep, audio_run.splits.test, mid, swap_dir.string(), 2);
    std::cout << "    template-swap QWK " << fmt(swapped.qwk) << " (skipped "
              << swapped.skipped << ")\n";
    require(swapped.skipped == 0, "template swap skipped responses");
    require(swapped.qwk < clean.qwk,
            "grade-uncorrelated replacement audio did not lower QWK (" +
                fmt(clean.qwk) + " -> " + fmt(swapped.qwk) + ")");
  }

  // control: only text carries the signal; the reduction stays within noise
  SynthSpec text_spec;
  text_spec.n_classes = 3;
  text_spec.per_class = 30;
  text_spec.seed = 22;
  text_spec.base_duration_s = 2.0;
  text_spec.audio_informative = false;
  TrainedRun text_run = train_on(text_spec, "noise_text", ModelKind::Fused,
                                 cfg);
  {
    ScoringModel model = text_run.ckpt.materialize();
    Preprocessor prep(text_run.ckpt);
    EvalResult clean = evaluate(model, prep, text_run.splits.test, nullptr, 2);
    ThresholdSet mid = ThresholdSet::midpoints(text_run.scale.size());
    AblationResult noisy = ablate_white_noise(model, prep,
                                              text_run.splits.test, mid, 5, 2);
    std::cout << "    text-signal control: clean QWK " << fmt(clean.qwk)
              << ", noise QWK " << fmt(noisy.qwk) << "\n";
    require(std::abs(clean.qwk - noisy.qwk) <= 0.05,
            "control drop " + fmt(clean.qwk - noisy.qwk) + " outside +/-0.05");

    // when only text carries the signal, attention prefers text
    std::vector<SplitReportRow> rows = attention_split_report(
        model, prep, text_run.splits.test, GroupBy::Prompt, 2);
    require(!rows.empty(), "empty attention split report");
    std::cout << "    text-signal attention split: text "
              << fmt(rows[0].text_pct) << "%, audio " << fmt(rows[0].audio_pct)
              << "%\n";
    require(rows[0].text_pct > rows[0].audio_pct,
            "attention does not prefer the informative text modality (text " +
                fmt(rows[0].text_pct) + "%)");
  }
}

// ---------------------------------------------------------------------------
// 8. determinism and persistence
// ---------------------------------------------------------------------------

void criterion_determinism() {
  SynthSpec spec;
  spec.n_classes = 3;
  spec.per_class = 6;
  spec.seed = 33;
  spec.base_duration_s = 0.6;

  TrainConfig cfg;
  cfg.model = ModelConfig::compact();
  cfg.seed = 44;
  cfg.split_seed = 44;
  cfg.max_epochs = 3;
  cfg.patience = 3;
  cfg.dropout = 0.3;

  TrainedRun r1 = train_on(spec, "determinism", ModelKind::Fused, cfg);
  TrainedRun r2 = train_on(spec, "determinism", ModelKind::Fused, cfg);
  require(r1.report.to_lines(false) == r2.report.to_lines(false),
          "identical seeds produced different TrainReports");

  const std::string p1 = (work_dir() / "det1.ckpt").string();
  const std::string p2 = (work_dir() / "det2.ckpt").string();
  save_checkpoint(r1.ckpt, p1);
  Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(loaded, p2);
  require(read_bytes(p1) == read_bytes(p2),
          "save -> load -> save is not byte-identical");

  ScoringModel m1 = r1.ckpt.materialize();
  ScoringModel m2 = loaded.materialize();
  Preprocessor prep(r1.ckpt);
  EvalResult e1 = evaluate(m1, prep, r1.splits.test);
  EvalResult e2 = evaluate(m2, prep, r1.splits.test);
  require(std::abs(e1.qwk - e2.qwk) <= 1e-6, "eval QWK drifted after reload");
  for (std::size_t i = 0; i < e1.responses.size(); ++i)
    require(std::abs(e1.responses[i].prediction.normalized -
                     e2.responses[i].prediction.normalized) <= 1e-6,
            "per-response score drifted after reload");
}

// ---------------------------------------------------------------------------
// 9. overfit harness
// ---------------------------------------------------------------------------

void criterion_overfit() {
  SynthSpec spec;
  spec.n_classes = 2;
  spec.per_class = 2;  // 4 responses
  spec.seed = 55;
  spec.base_duration_s = 0.6;
  const fs::path dir = work_dir() / "overfit";
  SynthResult corpus = generate_synthetic_corpus(spec, dir.string());

  for (ModelKind kind : {ModelKind::Audio, ModelKind::Text, ModelKind::Fused}) {
    TrainConfig cfg;
    cfg.model = ModelConfig::compact();
    cfg.seed = 66;
    cfg.split_seed = 66;
    cfg.max_epochs = 200;
    cfg.patience = 200;
    cfg.dropout = 0.0;
    cfg.learning_rate = 5e-3;
    // train and validate on the same 4 examples: the point is the backward
    // path, not generalization
    TrainOutcome out =
        train(kind, corpus.records, corpus.records, corpus.scale, cfg);
    ScoringModel model = out.checkpoint.materialize();
    Preprocessor prep(out.checkpoint);
    EvalResult on_train = evaluate(model, prep, corpus.records);
    std::cout << "    " << model_kind_name(kind)
              << " train QWK = " << fmt(on_train.qwk) << " after "
              << out.report.epochs.size() << " epochs\n";
    require(on_train.qwk == 1.0,
            model_kind_name(kind) + " failed to overfit 4 examples: QWK " +
                fmt(on_train.qwk));
  }
}

struct Criterion {
  int id;
  const char* name;
  std::function<void()> run;
};

}  // namespace

int main() {
  set_log_quiet(true);
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness (autodiff vs central differences)",
       criterion_gradients},
      {2, "QWK matches the brute-force oracle", criterion_qwk_oracle},
      {3, "attention trace invariants", criterion_attention_invariants},
      {4, "frontend fidelity (STFT bin, mel band, frame split)",
       criterion_frontend},
      {5, "end-to-end learning on the synthetic corpus", criterion_end_to_end},
      {6, "threshold calibration dominance and lattice oracle",
       criterion_thresholds},
      {7, "white-noise ablation (signal and control corpora)",
       criterion_noise_ablation},
      {8, "determinism and checkpoint persistence", criterion_determinism},
      {9, "overfit harness reaches QWK 1 on 4 examples", criterion_overfit},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (error.empty()) {
      std::printf("[PASS] %d. %s (%.1f s)\n", c.id, c.name, secs);
    } else {
      std::printf("[FAIL] %d. %s (%.1f s): %s\n", c.id, c.name, secs,
                  error.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
