#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "mrpcen/audio.hpp"

namespace mrpcen {

/// Room (or synthetic) response h[n] used for convolutional reverb.
struct ImpulseResponse {
  Eigen::VectorXd samples;
  int sample_rate = 0;
  std::string label;

  void validate() const;
};

/// Full linear convolution via zero-padded FFT, length |x| + |h| - 1.
Eigen::VectorXd fft_convolve(const Eigen::VectorXd& x, const Eigen::VectorXd& h);

/// O(|x| |h|) reference convolution.
Eigen::VectorXd direct_convolve(const Eigen::VectorXd& x, const Eigen::VectorXd& h);

/// x * h truncated to |x|, then rescaled so its peak equals the input peak
/// (skipped for silent input or silent output).
AudioClip convolve_reverb(const AudioClip& clip, const ImpulseResponse& ir);

/// h[n] = w[n] exp(-(n / sr) / tau_c), w standard-normal white noise drawn
/// from a generator seeded with `seed`. duration <= 0 selects 5 tau_c.
ImpulseResponse synth_impulse_response(double tau_c, double duration, int sample_rate,
                                       std::uint64_t seed);

/// Cumulative sum of seeded white noise, mean removed, peak scaled to 0.9.
AudioClip brown_noise(double duration, int sample_rate, std::uint64_t seed);

/// Seeded standard-normal samples.
Eigen::VectorXd white_noise(Eigen::Index n, std::uint64_t seed);

struct PhaseVocoderSpec {
  int window_length = 1024;
  int hop_length = 256;
};

/// Phase-vocoder time stretch; output length round(|x| * stretch).
/// stretch > 1 lengthens the signal.
Eigen::VectorXd time_stretch(const Eigen::VectorXd& x, double stretch,
                             const PhaseVocoderSpec& pv = {});

/// Band-limited resampling by `ratio` (output rate / input rate) with a
/// Kaiser-windowed sinc kernel; output length round(|x| * ratio).
Eigen::VectorXd resample(const Eigen::VectorXd& x, double ratio);

/// Shifts pitch by `semitones` (|semitones| <= 12) keeping duration: time
/// stretch by 2^(semitones / 12), then resample back to the input length.
AudioClip pitch_shift(const AudioClip& clip, double semitones, const PhaseVocoderSpec& pv = {});

}  // namespace mrpcen
