#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mrpcen/config.hpp"
#include "mrpcen/eval.hpp"
#include "mrpcen/npy.hpp"

namespace mrpcen {

struct ManifestEntry {
  std::string clip_id;
  std::filesystem::path audio_path;
  std::filesystem::path annotation_path;
};

/// Dataset listing. On disk:
///   {"vocabulary": [...], "clips": [{"id", "audio", "annotation"}, ...]}
/// with paths relative to the manifest's directory.
struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> vocabulary;

  /// Unique, nonempty clip ids. File existence is checked per clip at run time.
  void validate() const;

  static Manifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct RunOptions {
  bool force = false;
  int jobs = 1;
  std::uint64_t seed = 0;
};

/// Feature layers for one clip: one log-mel layer, one PCEN layer, or one
/// layer per scheduled rate.
std::vector<Eigen::MatrixXd> compute_features(const AudioClip& clip, const PipelineConfig& config);

struct ClipStatus {
  std::string clip_id;
  std::string status;  // "written", "cached", "failed"
  std::vector<std::size_t> shape;
  std::string error;
};

struct FeaturizeSummary {
  std::vector<ClipStatus> clips;
  int written = 0;
  int cached = 0;
  int failed = 0;
};

/// Writes `{id}.npy` and a `{id}.json` sidecar per clip plus
/// `featurize_run.json`. Clips whose sidecar already carries the active
/// config hash are skipped unless options.force. Unreadable audio is
/// logged and counted; an unwritable output directory throws IoError.
FeaturizeSummary featurize_dataset(const Manifest& manifest, const PipelineConfig& config,
                                   const std::filesystem::path& out_dir, const RunOptions& options = {});

/// `{id}__ir-{label}` and `{id}__ps{+n}` clip ids.
std::string reverb_clip_id(const std::string& clip_id, const std::string& ir_label);
std::string pitch_clip_id(const std::string& clip_id, double semitones);

struct AugmentSummary {
  Manifest manifest;
  int failed = 0;
};

/// Writes one WAV and one (unchanged) annotation copy per clip and
/// augmentation under out_dir, and out_dir/manifest.json listing the
/// originals (when kept) followed by the duplicates.
AugmentSummary augment_dataset(const Manifest& manifest, const PipelineConfig& config,
                               const std::filesystem::path& out_dir, const RunOptions& options = {});

struct DetectSummary {
  int written = 0;
  int failed = 0;
};

/// Runs the threshold detector over each clip's feature file and writes
/// `{id}.csv` predictions into out_dir.
DetectSummary detect_dataset(const Manifest& manifest, const std::filesystem::path& features_dir,
                             const PipelineConfig& config, const std::filesystem::path& out_dir);

struct EvaluationSummary {
  MetricsReport overall;
  std::vector<MetricsReport> replicates;
  int missing_predictions = 0;
  int failed = 0;
};

/// Scores `{id}.csv` predictions against the manifest annotations. A
/// missing prediction file counts as an empty prediction (with a warning).
/// Writes metrics.json, metrics.csv and bootstrap.csv into out_dir.
EvaluationSummary evaluate_run(const Manifest& manifest, const std::filesystem::path& predictions_dir,
                               const PipelineConfig& config, const std::filesystem::path& out_dir);

/// Prints shape, dtype, per-layer min/mean/max and the sidecar's config
/// hash. Throws FormatError on a malformed file.
void inspect_feature(const std::filesystem::path& feature_file, std::ostream& out);

/// Sidecar path next to a feature file.
std::filesystem::path sidecar_path(const std::filesystem::path& feature_file);

}  // namespace mrpcen
