#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

namespace mrpcen {

/// Mono sample buffer. Amplitudes nominally in [-1, 1].
struct AudioClip {
  Eigen::VectorXd samples;
  int sample_rate = 0;

  AudioClip() = default;
  AudioClip(Eigen::VectorXd s, int sr);

  [[nodiscard]] Eigen::Index size() const { return samples.size(); }
  [[nodiscard]] double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  /// Throws InvalidArgument on a nonpositive rate or non-finite samples.
  void validate() const;
};

/// Reads RIFF/WAVE: PCM 16/24/32-bit integer or IEEE float 32-bit
/// (WAVE_FORMAT_EXTENSIBLE with those subformats is accepted too).
/// Channels are averaged to mono, integers scaled by 2^-(bits-1).
///
/// Throws IoError when the file cannot be opened and FormatError for a
/// malformed header or an unsupported codec.
AudioClip load_wav(const std::filesystem::path& path);

/// Header-only probe: (sample_rate, frames). Same errors as load_wav.
std::pair<int, std::size_t> wav_info(const std::filesystem::path& path);

enum class WavEncoding { Pcm16, Pcm24, Pcm32, Float32 };

/// Writes interleaved frames; `frames` is [n_frames x n_channels].
/// Integer encodings clip to the representable range.
void write_wav(const std::filesystem::path& path, const Eigen::MatrixXd& frames,
               int sample_rate, WavEncoding encoding);

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip,
                      WavEncoding encoding = WavEncoding::Float32) {
  write_wav(path, Eigen::MatrixXd(clip.samples), clip.sample_rate, encoding);
}

}  // namespace mrpcen
