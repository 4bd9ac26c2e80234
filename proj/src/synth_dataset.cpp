#include "mrpcen/synth_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "mrpcen/augment.hpp"
#include "mrpcen/error.hpp"

namespace mrpcen {

namespace fs = std::filesystem;

namespace {

struct ClassBand {
  const char* label;
  double f_lo;
  double f_hi;
};

constexpr ClassBand kClasses[] = {
    {"tone", 900.0, 1800.0},
    {"chirp", 2500.0, 5000.0},
    {"noise_burst", 7000.0, 11000.0},
};

constexpr double kEventGain = 0.25;
constexpr double kBackgroundGain = 0.2;
constexpr double kFadeSeconds = 0.01;

double fade(double t, double length) {
  const double edge = std::min({t, length - t, kFadeSeconds});
  if (edge >= kFadeSeconds) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * std::max(edge, 0.0) / kFadeSeconds);
}

void add_event(Eigen::VectorXd& mix, int sr, const std::string& label, double onset, double length,
               std::mt19937_64& rng) {
  const auto start = static_cast<Eigen::Index>(std::llround(onset * sr));
  const auto n = static_cast<Eigen::Index>(std::llround(length * sr));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (label == "tone") {
    const double f = 1000.0 + 600.0 * unit(rng);
    for (Eigen::Index i = 0; i < n && start + i < mix.size(); ++i) {
      const double t = static_cast<double>(i) / sr;
      mix[start + i] += kEventGain * fade(t, length) * std::sin(2.0 * std::numbers::pi * f * t);
    }
  } else if (label == "chirp") {
    const double f0 = 2500.0;
    const double f1 = 5000.0;
    for (Eigen::Index i = 0; i < n && start + i < mix.size(); ++i) {
      const double t = static_cast<double>(i) / sr;
      const double phase = 2.0 * std::numbers::pi * (f0 * t + 0.5 * (f1 - f0) / length * t * t);
      mix[start + i] += kEventGain * fade(t, length) * std::sin(phase);
    }
  } else {
    // Low-passed white noise moved up to ~9 kHz by ring modulation.
    const Eigen::VectorXd w = white_noise(n + 8, rng());
    for (Eigen::Index i = 0; i < n && start + i < mix.size(); ++i) {
      const double t = static_cast<double>(i) / sr;
      const double lp = w.segment(i, 8).mean();
      mix[start + i] += 2.0 * kEventGain * fade(t, length) * lp * std::cos(2.0 * std::numbers::pi * 9000.0 * t);
    }
  }
}

}  // namespace

DetectorSettings miniature_detector(const FrameSpec& frame) {
  DetectorSettings d;
  d.threshold = 0.5;
  for (const auto& c : kClasses) {
    const auto [first, last] = mel_band_range(frame, c.f_lo, c.f_hi);
    d.bands.push_back({c.label, first, last});
  }
  return d;
}

Manifest write_miniature_dataset(const fs::path& dir, const MiniatureDatasetSpec& spec) {
  require(spec.n_clips >= 1 && spec.clip_seconds >= 2.0 && spec.sample_rate > 0,
          "write_miniature_dataset: need >= 1 clip of >= 2 s");
  fs::create_directories(dir / "audio");
  fs::create_directories(dir / "annotations");

  Manifest manifest;
  for (const auto& c : kClasses) manifest.vocabulary.emplace_back(c.label);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(std::llround(spec.clip_seconds * spec.sample_rate));
  for (int clip = 0; clip < spec.n_clips; ++clip) {
    char id[32];
    std::snprintf(id, sizeof id, "mini_%02d", clip);

    Eigen::VectorXd mix = kBackgroundGain * brown_noise(spec.clip_seconds, spec.sample_rate, rng()).samples;
    mix.conservativeResize(n);
    std::vector<Event> events;
    for (std::size_t k = 0; k < std::size(kClasses); ++k) {
      // Every class appears in at least every third clip.
      const bool forced = static_cast<std::size_t>(clip) % std::size(kClasses) == k;
      if (!forced && unit(rng) > 0.5) continue;
      const std::string label = kClasses[k].label;
      const double length = label == "tone" ? 0.6 + 0.6 * unit(rng)
                            : label == "chirp" ? 0.4 + 0.4 * unit(rng)
                                               : 0.2 + 0.3 * unit(rng);
      const double onset = 0.2 + (spec.clip_seconds - length - 0.4) * unit(rng);
      add_event(mix, spec.sample_rate, label, onset, length, rng);
      events.push_back({onset, onset + length, label});
    }
    const double peak = mix.cwiseAbs().maxCoeff();
    if (peak > 0.95) mix *= 0.95 / peak;
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.onset < b.onset; });

    ManifestEntry entry{id, dir / "audio" / (std::string(id) + ".wav"),
                        dir / "annotations" / (std::string(id) + ".csv")};
    write_wav(entry.audio_path, AudioClip(std::move(mix), spec.sample_rate), WavEncoding::Pcm16);
    write_event_csv(entry.annotation_path, events);
    manifest.entries.push_back(std::move(entry));
  }
  manifest.save(dir / "manifest.json");

  PipelineConfig config;
  config.frame = FrameSpec::at_rate(spec.sample_rate);
  config.detector = miniature_detector(config.frame);
  std::ofstream out(dir / "config.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "config.json").string());
  out << config.to_json().dump(2) << "\n";
  return manifest;
}

}  // namespace mrpcen
