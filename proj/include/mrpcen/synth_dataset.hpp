#pragma once

#include <cstdint>
#include <filesystem>

#include "mrpcen/config.hpp"
#include "mrpcen/pipeline.hpp"

namespace mrpcen {

struct MiniatureDatasetSpec {
  int n_clips = 10;
  double clip_seconds = 4.0;
  int sample_rate = 44100;
  std::uint64_t seed = 0;
};

/// Deterministic toy corpus: tones, chirps and noise bursts over a
/// Brownian background. Writes audio/*.wav, annotations/*.csv,
/// manifest.json and config.json (detector bands aimed at each class's
/// frequency region) under `dir` and returns the manifest.
Manifest write_miniature_dataset(const std::filesystem::path& dir, const MiniatureDatasetSpec& spec = {});

/// Detector settings matching the classes of the miniature corpus.
DetectorSettings miniature_detector(const FrameSpec& frame);

}  // namespace mrpcen
