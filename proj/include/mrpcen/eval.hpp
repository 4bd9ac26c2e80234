#pragma once

// Segment-based sound event detection metrics and bootstrap resampling.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mrpcen/pcen.hpp"

namespace mrpcen {

struct Event {
  double onset = 0.0;
  double offset = 0.0;
  std::string label;
};

struct EventList {
  std::vector<Event> events;
  double duration = 0.0;
  std::vector<std::string> vocabulary;

  /// Throws InvalidArgument when an event breaks 0 <= onset < offset <=
  /// duration or carries a label outside the vocabulary.
  void validate() const;
  [[nodiscard]] int class_index(const std::string& label) const;
};

/// Reads `onset,offset,label` CSV (header required).
std::vector<Event> read_event_csv(const std::filesystem::path& path);
void write_event_csv(const std::filesystem::path& path, const std::vector<Event>& events);

/// Binary activity, [n_classes x n_segments]; a segment [kL, (k+1)L) is
/// active for a class when some event overlaps it by a positive amount.
Eigen::MatrixXi segmentize(const EventList& events, double segment_length);

struct SegmentTally {
  int n_ref = 0;
  int n_est = 0;
  int false_negatives = 0;
  int false_positives = 0;
};

struct SegmentCounts {
  std::vector<std::string> vocabulary;
  Eigen::VectorXi true_positives;
  Eigen::VectorXi false_positives;
  Eigen::VectorXi false_negatives;
  std::vector<SegmentTally> segments;
  double segment_length = 1.0;

  /// Adds per-class counts and appends segment tallies.
  SegmentCounts& operator+=(const SegmentCounts& other);
};

SegmentCounts segment_counts(const EventList& reference, const EventList& estimate,
                             double segment_length = 1.0);

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;  // reference-active segments
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Empty when the reference has no active segment at all.
  std::optional<double> error_rate;
  double substitution_rate = 0.0;
  double deletion_rate = 0.0;
  double insertion_rate = 0.0;
};

/// F1 = 2PR / (P + R), or 0 when P + R = 0.
double f1_score(double precision, double recall);

MetricsReport compute_metrics(const SegmentCounts& counts);

/// n_reps reports, each pooling the counts of n_samples clips drawn
/// uniformly with replacement. Deterministic for a given seed.
std::vector<MetricsReport> bootstrap_evaluate(const std::vector<SegmentCounts>& per_clip,
                                              int n_samples, int n_reps, std::uint64_t seed);

/// Linear-interpolated percentile (q in [0, 100]) of a sample.
double percentile(std::vector<double> values, double q);

struct DetectorBands {
  std::string label;
  int first_band = 0;  // half-open [first_band, last_band)
  int last_band = 0;
};

/// Stand-in detector: a class is active in frame t when the mean feature
/// value over its band range exceeds `threshold`. Contiguous active runs
/// become events [t0 / frame_rate, (t1 + 1) / frame_rate), clipped to
/// `duration` (defaults to n_frames / frame_rate when <= 0).
EventList threshold_detector(const Eigen::MatrixXd& features, double frame_rate,
                             const std::vector<std::string>& vocabulary,
                             const std::vector<DetectorBands>& bands, double threshold,
                             double duration = 0.0);

/// Same rule on a multi-rate stack, averaging over the rate layers too.
EventList threshold_detector(const MultiRateStack& stack, const std::vector<std::string>& vocabulary,
                             const std::vector<DetectorBands>& bands, double threshold,
                             double duration = 0.0);

}  // namespace mrpcen
