#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrpcen/eval.hpp"
#include "mrpcen/pcen.hpp"
#include "mrpcen/spectrogram.hpp"

namespace mrpcen {

enum class Representation { LogMel, Pcen, MrPcen };

std::string to_string(Representation r);
Representation parse_representation(const std::string& name);

/// Either a recorded response loaded from `path`, or (path empty) a
/// synthetic exponential-decay response with time constant `tau_c`.
struct IrSource {
  std::string label;
  std::filesystem::path path;
  double tau_c = 0.0;
  double duration = 0.0;  // 0 selects 5 tau_c
  std::uint64_t seed = 0;
};

struct AugmentationPlan {
  std::vector<IrSource> impulse_responses;
  std::vector<double> pitch_shifts;
  bool keep_originals = true;
};

struct EvaluationSettings {
  double segment_length = 1.0;
  int bootstrap_samples = 100;
  int bootstrap_reps = 100;
  std::uint64_t seed = 0;
};

struct DetectorSettings {
  double threshold = 0.5;
  std::vector<DetectorBands> bands;
};

/// Everything a run needs. Default-constructed values are the reference
/// featurization: 44.1 kHz, 1024/512 STFT, 128 mel bands, eps = 1e-6,
/// alpha = 0.98, delta = 2, r = 0.5, rates 2^0 .. 2^9, multi-rate output.
struct PipelineConfig {
  FrameSpec frame;
  PcenParams pcen;
  RateSchedule schedule = RateSchedule::standard();
  Representation representation = Representation::MrPcen;
  AugmentationPlan augmentation;
  EvaluationSettings evaluation;
  DetectorSettings detector;

  /// Throws FormatError on unknown keys or ill-typed values and
  /// InvalidArgument when the values break a parameter invariant.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
  [[nodiscard]] nlohmann::json to_json() const;

  /// 16 hex digits identifying the featurization settings (frame spec,
  /// PCEN parameters, schedule, representation). Augmentation, detector and
  /// evaluation settings do not affect it.
  [[nodiscard]] std::string feature_hash() const;

  void validate() const;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace mrpcen
