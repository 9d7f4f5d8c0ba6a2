#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "speechgrade/matrix.hpp"
#include "speechgrade/rng.hpp"

namespace sg {

struct AudioClip {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 0;          // Hz

  double duration_seconds() const {
    return sample_rate > 0
               ? static_cast<double>(samples.size()) / sample_rate
               : 0.0;
  }
};

// Sequence of square log-mel frames for one response. Every frame is
// frame_size x frame_size (mel bands x time columns).
struct SpectrogramFrames {
  std::size_t frame_size = 128;
  std::vector<Matrix> frames;
  std::size_t num_valid_columns = 0;  // non-padded time columns overall

  // Frames containing at least one valid column; all-padding frames are
  // excluded from the model's attention.
  std::size_t num_valid_frames() const {
    if (frames.empty()) return 0;
    std::size_t n = (num_valid_columns + frame_size - 1) / frame_size;
    if (n == 0) n = 1;
    return n < frames.size() ? n : frames.size();
  }
};

struct SpectrogramConfig {
  int sample_rate = 16000;
  std::size_t fft_window = 2048;
  std::size_t hop = 512;
  std::size_t n_mels = 128;
  double f_min = 0.0;
  double f_max = 8000.0;
  std::size_t frame_columns = 128;

  std::size_t n_bins() const { return fft_window / 2 + 1; }
};

// --- individual stages ---

// Windowed-sinc resampling; identity when rates already match.
AudioClip resample(const AudioClip& clip, int target_rate);

// Hann-windowed, centered STFT magnitudes: [fft_window/2+1 x 1+floor(len/hop)].
Matrix stft(const AudioClip& clip, std::size_t fft_window, std::size_t hop);

// Triangular unit-area filterbank on the HTK mel scale:
// [n_mels x fft_window/2+1].
Matrix mel_filterbank(std::size_t n_mels, std::size_t fft_window,
                      int sample_rate, double f_min, double f_max);

Matrix mel_project(const Matrix& magnitudes, std::size_t n_mels, double f_min,
                   double f_max, int sample_rate, std::size_t fft_window);

// Elementwise ln(x + 1e-10); input must be non-negative.
Matrix log_scale(const Matrix& mel);

// Per-utterance standardization over the valid columns (std floor 1e-8),
// then right zero-padding to max_columns.
Matrix normalize_and_pad(const Matrix& logmel, std::size_t max_columns);

// Contiguous non-overlapping frame_size-column slices; the padded width must
// be a multiple of the row count.
SpectrogramFrames split_frames(const Matrix& padded,
                               std::size_t num_valid_columns);

// Uniform noise in [-1, 1] with the clip's length and rate.
AudioClip white_noise_like(const AudioClip& clip, Rng& rng);

// HTK mel scale helpers.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// --- full pipeline ---

// clip -> resample -> stft -> mel -> log -> normalize+pad -> frames.
// max_columns must be a multiple of cfg.frame_columns; longer clips are
// right-truncated with a warning.
class SpectrogramPipeline {
 public:
  SpectrogramPipeline(SpectrogramConfig cfg, std::size_t max_columns);

  SpectrogramFrames process(const AudioClip& clip) const;

  // Number of STFT columns a clip would produce (for sizing max_columns).
  std::size_t columns_for(const AudioClip& clip) const;

  std::size_t max_columns() const { return max_columns_; }
  const SpectrogramConfig& config() const { return cfg_; }

  static std::size_t round_up_columns(std::size_t columns,
                                      std::size_t frame_columns);

 private:
  SpectrogramConfig cfg_;
  std::size_t max_columns_;
  Matrix filterbank_;
};

// --- WAV I/O ---

// PCM WAV: 16-bit signed integer or 32-bit float, mono (stereo averaged).
AudioClip read_wav(const std::string& path);
// 16-bit PCM mono.
void write_wav(const std::string& path, const AudioClip& clip);

}  // namespace sg
