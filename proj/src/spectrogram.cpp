#include "mrpcen/spectrogram.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <string>

#include "mrpcen/error.hpp"
#include "mrpcen/fft.hpp"

namespace mrpcen {

FrameSpec FrameSpec::at_rate(int sample_rate) {
  FrameSpec spec;
  spec.sample_rate = sample_rate;
  spec.fmax = sample_rate / 2.0;
  return spec;
}

void FrameSpec::validate() const {
  require(sample_rate > 0, "FrameSpec: sample_rate must be positive");
  require(hop_length > 0 && hop_length <= window_length,
          "FrameSpec: need 0 < hop_length <= window_length");
  require(window_length > 0 && (window_length & (window_length - 1)) == 0,
          "FrameSpec: window_length must be a power of two");
  require(n_mels >= 1, "FrameSpec: n_mels must be >= 1");
  require(fmin >= 0.0 && fmin < fmax, "FrameSpec: need 0 <= fmin < fmax");
  require(fmax <= sample_rate / 2.0, "FrameSpec: fmax exceeds Nyquist (" +
                                         std::to_string(sample_rate / 2.0) + " Hz)");
}

Eigen::VectorXd hann_window(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

namespace {

// numpy "reflect" padding: index -1 maps to 1, n maps to n - 2.
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
  if (n == 1) return 0;
  const Eigen::Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

Eigen::MatrixXd stft_magnitude(const AudioClip& clip, const FrameSpec& spec) {
  spec.validate();
  require(clip.sample_rate == spec.sample_rate,
          "stft_magnitude: clip sample rate " + std::to_string(clip.sample_rate) +
              " Hz does not match spec " + std::to_string(spec.sample_rate) + " Hz");
  require(clip.size() > 0, "stft_magnitude: empty clip");

  const int n_fft = spec.window_length;
  const Eigen::Index n = clip.size();
  const Eigen::Index n_frames = spec.n_frames(n);
  const Eigen::VectorXd window = hann_window(n_fft);
  const Eigen::Index pad = n_fft / 2;

  Eigen::MatrixXd out(spec.n_bins(), n_frames);
  fft::RealFft engine;
  std::vector<double> frame(static_cast<std::size_t>(n_fft));
  fft::Spectrum bins;
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    const Eigen::Index start = t * spec.hop_length - pad;
    for (int i = 0; i < n_fft; ++i) {
      Eigen::Index j = start + i;
      if (j < 0 || j >= n) j = reflect_index(j, n);
      frame[static_cast<std::size_t>(i)] = clip.samples[j] * window[i];
    }
    engine.forward(frame, bins);
    for (int k = 0; k < spec.n_bins(); ++k) out(k, t) = std::abs(bins[static_cast<std::size_t>(k)]);
  }
  return out;
}

namespace {
constexpr double kMelLinearStep = 200.0 / 3.0;
constexpr double kMelLogMinHz = 1000.0;
constexpr double kMelLogMin = kMelLogMinHz / kMelLinearStep;
const double kMelLogStep = std::log(6.4) / 27.0;
}  // namespace

double hz_to_mel(double hz) {
  if (hz < kMelLogMinHz) return hz / kMelLinearStep;
  return kMelLogMin + std::log(hz / kMelLogMinHz) / kMelLogStep;
}

double mel_to_hz(double mel) {
  if (mel < kMelLogMin) return mel * kMelLinearStep;
  return kMelLogMinHz * std::exp(kMelLogStep * (mel - kMelLogMin));
}

Eigen::VectorXd mel_band_edges(const FrameSpec& spec) {
  const double lo = hz_to_mel(spec.fmin);
  const double hi = hz_to_mel(spec.fmax);
  Eigen::VectorXd edges(spec.n_mels + 2);
  for (int i = 0; i < spec.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * i / (spec.n_mels + 1));
  }
  return edges;
}

Eigen::MatrixXd mel_filterbank(const FrameSpec& spec) {
  spec.validate();
  const int n_bins = spec.n_bins();
  const Eigen::VectorXd edges = mel_band_edges(spec);
  const double bin_hz = static_cast<double>(spec.sample_rate) / spec.window_length;

  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(spec.n_mels, n_bins);
  int empty = 0;
  for (int m = 0; m < spec.n_mels; ++m) {
    const double lower = edges[m];
    const double center = edges[m + 1];
    const double upper = edges[m + 2];
    const double height = 2.0 / (upper - lower);
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      const double rising = (f - lower) / (center - lower);
      const double falling = (upper - f) / (upper - center);
      weights(m, k) = height * std::max(0.0, std::min(rising, falling));
    }
    if (weights.row(m).maxCoeff() == 0.0) ++empty;
  }
  if (empty > 0) {
    std::cerr << "warning: mel_filterbank: " << empty << " of " << spec.n_mels
              << " filters cover no FFT bin; n_mels is too large for window_length "
              << spec.window_length << "\n";
  }
  return weights;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, const FrameSpec& spec) {
  const Eigen::MatrixXd magnitude = stft_magnitude(clip, spec);
  return MelSpectrogram{mel_filterbank(spec) * magnitude, spec};
}

Eigen::MatrixXd log_compress(const Eigen::MatrixXd& values, const LogCompressOptions& opts) {
  require(values.size() > 0, "log_compress: empty matrix");
  require(values.allFinite() && (values.array() >= 0.0).all(),
          "log_compress: values must be finite and nonnegative");
  require(opts.amin > 0.0 && opts.top_db >= 0.0, "log_compress: need amin > 0, top_db >= 0");
  const double ref_db = 10.0 * std::log10(std::max(opts.amin, values.maxCoeff()));
  Eigen::MatrixXd db = values.unaryExpr([&](double v) {
    return 10.0 * std::log10(std::max(v, opts.amin)) - ref_db;
  });
  const double floor_db = db.maxCoeff() - opts.top_db;
  return db.cwiseMax(floor_db);
}

Eigen::MatrixXd log_compress(const MelSpectrogram& mel, const LogCompressOptions& opts) {
  return log_compress(mel.values, opts);
}

std::pair<int, int> mel_band_range(const FrameSpec& spec, double f_lo, double f_hi) {
  require(f_lo <= f_hi, "mel_band_range: need f_lo <= f_hi");
  const Eigen::VectorXd edges = mel_band_edges(spec);
  int first = spec.n_mels;
  int last = 0;
  for (int m = 0; m < spec.n_mels; ++m) {
    const double center = edges[m + 1];
    if (center >= f_lo && center <= f_hi) {
      first = std::min(first, m);
      last = std::max(last, m + 1);
    }
  }
  require(first < last, "mel_band_range: no mel band centered in the requested range");
  return {first, last};
}

}  // namespace mrpcen
