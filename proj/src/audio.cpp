#include "speechgrade/audio.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "speechgrade/errors.hpp"
#include "speechgrade/log.hpp"

namespace sg {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLogFloor = 1e-10;
constexpr double kStdFloor = 1e-8;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT.
void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::size_t a = i + k, b = i + k + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0)
    throw ParameterError("resample: target rate must be positive");
  if (clip.samples.empty())
    throw DegenerateInputError("resample: empty clip");
  if (clip.sample_rate <= 0)
    throw ParameterError("resample: clip sample rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const double ratio =
      static_cast<double>(target_rate) / static_cast<double>(clip.sample_rate);
  const std::size_t in_len = clip.samples.size();
  std::size_t out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in_len) * ratio));
  if (out_len == 0) out_len = 1;

  // Hann-windowed sinc; cutoff at the lower of the two Nyquist rates.
  const double fc = 0.5 * std::min(1.0, ratio);
  const double half_width = 32.0 * std::max(1.0, 1.0 / ratio);

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  for (std::size_t n = 0; n < out_len; ++n) {
    const double center = static_cast<double>(n) / ratio;
    const long k_lo = static_cast<long>(std::ceil(center - half_width));
    const long k_hi = static_cast<long>(std::floor(center + half_width));
    double acc = 0.0, wsum = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) {
      const double t = static_cast<double>(k) - center;
      const double win = 0.5 + 0.5 * std::cos(kPi * t / half_width);
      const double w = 2.0 * fc * sinc(2.0 * fc * t) * win;
      wsum += w;
      if (k >= 0 && k < static_cast<long>(in_len))
        acc += clip.samples[static_cast<std::size_t>(k)] * w;
    }
    out.samples[n] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

Matrix stft(const AudioClip& clip, std::size_t fft_window, std::size_t hop) {
  if (clip.samples.empty()) throw DegenerateInputError("stft: empty clip");
  if (!is_power_of_two(fft_window))
    throw ParameterError("stft: FFT window must be a power of two");
  if (hop == 0) throw ParameterError("stft: hop must be positive");

  const std::size_t len = clip.samples.size();
  const std::size_t pad = fft_window / 2;
  const std::size_t n_cols = 1 + len / hop;
  const std::size_t n_bins = fft_window / 2 + 1;

  std::vector<double> window(fft_window);
  for (std::size_t i = 0; i < fft_window; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                     static_cast<double>(fft_window));

  Matrix mag(n_bins, n_cols);
  std::vector<double> re(fft_window), im(fft_window);
  for (std::size_t col = 0; col < n_cols; ++col) {
    // centered framing over a virtually zero-padded signal
    const long start = static_cast<long>(col * hop) - static_cast<long>(pad);
    for (std::size_t i = 0; i < fft_window; ++i) {
      const long idx = start + static_cast<long>(i);
      const double s = (idx >= 0 && idx < static_cast<long>(len))
                           ? clip.samples[static_cast<std::size_t>(idx)]
                           : 0.0;
      re[i] = s * window[i];
      im[i] = 0.0;
    }
    fft_radix2(re, im);
    for (std::size_t k = 0; k < n_bins; ++k)
      mag.at(k, col) = std::hypot(re[k], im[k]);
  }
  return mag;
}

Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_window,
                      int sample_rate, double f_min, double f_max) {
  if (n_mels < 1) throw ParameterError("mel_filterbank: n_mels must be >= 1");
  if (f_max <= f_min)
    throw ParameterError("mel_filterbank: f_max must exceed f_min");
  const std::size_t n_bins = fft_window / 2 + 1;
  const double m_lo = hz_to_mel(f_min), m_hi = hz_to_mel(f_max);

  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) /
                                    static_cast<double>(n_mels + 1));

  Matrix fb(n_mels, n_bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
    const double height = 2.0 / (f2 - f0);  // unit-area triangle
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate /
                       static_cast<double>(fft_window);
      double w = 0.0;
      if (f > f0 && f < f2)
        w = f <= f1 ? (f - f0) / (f1 - f0) : (f2 - f) / (f2 - f1);
      fb.at(m, k) = w * height;
    }
  }
  return fb;
}

Matrix mel_project(const Matrix& magnitudes, std::size_t n_mels, double f_min,
                   double f_max, int sample_rate, std::size_t fft_window) {
  if (magnitudes.rows != fft_window / 2 + 1)
    throw DimensionError("mel_project: expected " +
                         std::to_string(fft_window / 2 + 1) + " bins, got " +
                         std::to_string(magnitudes.rows));
  const Matrix fb = mel_filterbank(n_mels, fft_window, sample_rate, f_min, f_max);
  Matrix out(n_mels, magnitudes.cols);
  for (std::size_t m = 0; m < n_mels; ++m)
    for (std::size_t k = 0; k < magnitudes.rows; ++k) {
      const double w = fb.at(m, k);
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < magnitudes.cols; ++c)
        out.at(m, c) += w * magnitudes.at(k, c);
    }
  return out;
}

Matrix log_scale(const Matrix& mel) {
  Matrix out(mel.rows, mel.cols);
  for (std::size_t i = 0; i < mel.v.size(); ++i) {
    if (mel.v[i] < 0.0)
      throw NumericError("log_scale: negative input " + std::to_string(mel.v[i]));
    out.v[i] = std::log(mel.v[i] + kLogFloor);
  }
  return out;
}

Matrix normalize_and_pad(const Matrix& logmel, std::size_t max_columns) {
  if (logmel.cols > max_columns)
    throw ContractError("normalize_and_pad: " + std::to_string(logmel.cols) +
                        " columns exceed maximum " + std::to_string(max_columns));
  const std::size_t n = logmel.v.size();
  double mean = 0.0;
  for (double x : logmel.v) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : logmel.v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  const double sd = std::max(std::sqrt(var), kStdFloor);

  Matrix out(logmel.rows, max_columns);
  for (std::size_t r = 0; r < logmel.rows; ++r)
    for (std::size_t c = 0; c < logmel.cols; ++c)
      out.at(r, c) = (logmel.at(r, c) - mean) / sd;
  return out;
}

SpectrogramFrames split_frames(const Matrix& padded,
                               std::size_t num_valid_columns) {
  const std::size_t frame_size = padded.rows;
  if (frame_size == 0 || padded.cols % frame_size != 0)
    throw ContractError("split_frames: width " + std::to_string(padded.cols) +
                        " is not a multiple of the frame size " +
                        std::to_string(frame_size));
  SpectrogramFrames out;
  out.frame_size = frame_size;
  out.num_valid_columns = std::min(num_valid_columns, padded.cols);
  const std::size_t n_frames = padded.cols / frame_size;
  out.frames.reserve(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    Matrix frame(frame_size, frame_size);
    for (std::size_t r = 0; r < frame_size; ++r)
      for (std::size_t c = 0; c < frame_size; ++c)
        frame.at(r, c) = padded.at(r, f * frame_size + c);
    out.frames.push_back(std::move(frame));
  }
  return out;
}

AudioClip white_noise_like(const AudioClip& clip, Rng& rng) {
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(clip.samples.size());
  for (double& s : out.samples) s = rng.uniform(-1.0, 1.0);
  return out;
}

SpectrogramPipeline::SpectrogramPipeline(SpectrogramConfig cfg,
                                         std::size_t max_columns)
    : cfg_(cfg), max_columns_(max_columns) {
  if (max_columns_ == 0 || max_columns_ % cfg_.frame_columns != 0)
    throw ParameterError("pipeline: max_columns must be a positive multiple of " +
                         std::to_string(cfg_.frame_columns));
  if (cfg_.n_mels != cfg_.frame_columns)
    throw ParameterError("pipeline: mel band count must equal frame size");
  filterbank_ = mel_filterbank(cfg_.n_mels, cfg_.fft_window, cfg_.sample_rate,
                               cfg_.f_min, cfg_.f_max);
}

std::size_t SpectrogramPipeline::columns_for(const AudioClip& clip) const {
  AudioClip at_rate = clip.sample_rate == cfg_.sample_rate
                          ? clip
                          : resample(clip, cfg_.sample_rate);
  return 1 + at_rate.samples.size() / cfg_.hop;
}

std::size_t SpectrogramPipeline::round_up_columns(std::size_t columns,
                                                  std::size_t frame_columns) {
  if (columns == 0) columns = 1;
  return (columns + frame_columns - 1) / frame_columns * frame_columns;
}

SpectrogramFrames SpectrogramPipeline::process(const AudioClip& clip) const {
  AudioClip at_rate = clip.sample_rate == cfg_.sample_rate
                          ? clip
                          : resample(clip, cfg_.sample_rate);
  Matrix mag = stft(at_rate, cfg_.fft_window, cfg_.hop);

  Matrix mel(cfg_.n_mels, mag.cols);
  for (std::size_t m = 0; m < cfg_.n_mels; ++m)
    for (std::size_t k = 0; k < mag.rows; ++k) {
      const double w = filterbank_.at(m, k);
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < mag.cols; ++c)
        mel.at(m, c) += w * mag.at(k, c);
    }
  Matrix lm = log_scale(mel);

  if (lm.cols > max_columns_) {
    log_warn("response longer than configured maximum (" +
             std::to_string(lm.cols) + " > " + std::to_string(max_columns_) +
             " columns), truncating");
    Matrix trimmed(lm.rows, max_columns_);
    for (std::size_t r = 0; r < lm.rows; ++r)
      for (std::size_t c = 0; c < max_columns_; ++c)
        trimmed.at(r, c) = lm.at(r, c);
    lm = std::move(trimmed);
  }
  const std::size_t valid = lm.cols;
  Matrix padded = normalize_and_pad(lm, max_columns_);
  return split_frames(padded, valid);
}

}  // namespace sg
