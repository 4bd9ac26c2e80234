#pragma once

#include <Eigen/Core>

#include "mrpcen/audio.hpp"

namespace mrpcen {

/// STFT and mel analysis parameters. Defaults: 44.1 kHz, 1024-sample window,
/// 512-sample hop, 128 mel bands over [0, Nyquist].
struct FrameSpec {
  int sample_rate = 44100;
  int window_length = 1024;
  int hop_length = 512;
  int n_mels = 128;
  double fmin = 0.0;
  double fmax = 22050.0;

  /// Default spec at another sample rate (fmax tracks Nyquist).
  static FrameSpec at_rate(int sample_rate);

  [[nodiscard]] int n_bins() const { return window_length / 2 + 1; }
  [[nodiscard]] double frame_rate() const {
    return static_cast<double>(sample_rate) / hop_length;
  }
  /// Centered framing: 1 + floor(n_samples / hop).
  [[nodiscard]] Eigen::Index n_frames(Eigen::Index n_samples) const {
    return 1 + n_samples / hop_length;
  }
  void validate() const;
};

/// E(t, f) as [n_mels x n_frames]; column t is one frame.
struct MelSpectrogram {
  Eigen::MatrixXd values;
  FrameSpec spec;

  [[nodiscard]] Eigen::Index n_mels() const { return values.rows(); }
  [[nodiscard]] Eigen::Index n_frames() const { return values.cols(); }
  [[nodiscard]] double frame_rate() const { return spec.frame_rate(); }
};

/// Periodic Hann window of length n.
Eigen::VectorXd hann_window(int n);

/// |STFT| as [n_bins x n_frames]: Hann window, frames centered on
/// t * hop with the signal reflect-padded by window_length / 2.
Eigen::MatrixXd stft_magnitude(const AudioClip& clip, const FrameSpec& spec);

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Band edges in Hz, n_mels + 2 points evenly spaced on the mel axis.
Eigen::VectorXd mel_band_edges(const FrameSpec& spec);

/// Triangular mel filters, [n_mels x n_bins], each scaled to unit area
/// (peak height 2 / (upper_edge - lower_edge)). Warns on stderr when a
/// filter covers no FFT bin.
Eigen::MatrixXd mel_filterbank(const FrameSpec& spec);

MelSpectrogram mel_spectrogram(const AudioClip& clip, const FrameSpec& spec);

struct LogCompressOptions {
  double amin = 1e-10;
  double top_db = 80.0;
};

/// 10 log10(max(v, amin)) relative to the matrix maximum, floored at -top_db.
Eigen::MatrixXd log_compress(const MelSpectrogram& mel, const LogCompressOptions& opts = {});
Eigen::MatrixXd log_compress(const Eigen::MatrixXd& values, const LogCompressOptions& opts = {});

/// Half-open band index range [first, last) whose filter centers fall in
/// [f_lo, f_hi]. Used to aim the threshold detector at a frequency region.
std::pair<int, int> mel_band_range(const FrameSpec& spec, double f_lo, double f_hi);

}  // namespace mrpcen
