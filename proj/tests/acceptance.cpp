// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `--only N` runs a single criterion.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include "mrpcen/augment.hpp"
#include "mrpcen/pipeline.hpp"
#include "mrpcen/synth_dataset.hpp"
#include "test_util.hpp"

using namespace mrpcen;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Tolerances and sizes, one place.
constexpr double kMaxFeatureSeconds = 5.0;
constexpr int kOracleSeeds = 20;
constexpr double kLimitTolerance = 1e-12;
constexpr double kCutoffRelTol = 0.01;
constexpr double kFalloffLo = 8.0;
constexpr double kFalloffHi = 12.0;
constexpr double kFalloffRate = 64.0;
constexpr int kGaussClips = 50;
constexpr int kGaussRequired = 45;
constexpr double kGaussClipSeconds = 10.0;
constexpr double kGaussRate = 64.0;
constexpr double kImpulseTolerance = 1e-12;
constexpr double kDecayRelTol = 0.05;
constexpr int kDecaySeeds = 20;
constexpr int kPeakFftSize = 8192;
constexpr int kCountTables = 100;
constexpr double kMicroF1Tolerance = 1e-12;
constexpr int kBootstrapSamples = 100;
constexpr int kBootstrapReps = 100;
constexpr double kMaxEndToEndSeconds = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
  std::vector<std::string> info;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd random_spectrogram(std::uint64_t seed) {
  // Exponentially distributed energies, loosely like a power spectrogram.
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  Eigen::MatrixXd e(128, 400);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = expo(rng) * std::exp2(static_cast<double>(i % 128) / 16.0);
  return e;
}

double power_response(double s, double w) {
  const std::complex<double> h = s / (1.0 - (1.0 - s) * std::polar(1.0, -w));
  return std::norm(h);
}

double measured_cutoff(double s) {
  double lo = 0.0;
  double hi = M_PI;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (power_response(s, mid) > 0.5 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

double population_skewness(const Eigen::MatrixXd& m) {
  const Eigen::ArrayXd v = Eigen::Map<const Eigen::ArrayXd>(m.data(), m.size());
  const Eigen::ArrayXd c = v - v.mean();
  const double var = c.square().mean();
  return c.cube().mean() / std::pow(var, 1.5);
}

// Criterion bodies.

Outcome shape_fidelity() {
  mrpcen::testing::TempDir dir("accept1");
  Eigen::VectorXd x = 0.5 * brown_noise(10.0, 44100, 1).samples;
  x += mrpcen::testing::sine(1000.0, 10.0, 44100, 0.2);
  write_wav(dir / "clip.wav", AudioClip(std::move(x), 44100), WavEncoding::Pcm16);
  Manifest m;
  m.entries.push_back({"clip", dir / "clip.wav", {}});

  Outcome o;
  o.pass = true;
  for (const Representation r : {Representation::LogMel, Representation::MrPcen}) {
    PipelineConfig config;
    config.representation = r;
    RunOptions single;
    single.jobs = 1;
    const fs::path out = dir / to_string(r);
    const auto t0 = std::chrono::steady_clock::now();
    const FeaturizeSummary s = featurize_dataset(m, config, out, single);
    const double elapsed = seconds_since(t0);
    const Tensor3f t = read_npy(out / "clip.npy");
    const std::vector<std::size_t> want = {128, 862, r == Representation::LogMel ? 1u : 10u};
    const bool ok = s.written == 1 && t.shape == want && elapsed < kMaxFeatureSeconds;
    o.pass = o.pass && ok;
    o.detail += to_string(r) + " (" + std::to_string(t.shape[0]) + ", " + std::to_string(t.shape[1]) + ", " +
                std::to_string(t.shape[2]) + ") in " + fmt("%.3f", elapsed) + " s; ";
  }
  return o;
}

Outcome smoother_oracle() {
  Outcome o;
  o.pass = true;
  int compared = 0;
  for (int seed = 0; seed < kOracleSeeds; ++seed) {
    const Eigen::MatrixXd e = random_spectrogram(static_cast<std::uint64_t>(seed));
    const double s = smoothing_coefficient(std::exp2(seed % 10));
    Eigen::MatrixXd ref(e.rows(), e.cols());
    for (Eigen::Index f = 0; f < e.rows(); ++f) {
      double m = e(f, 0);
      ref(f, 0) = m;
      for (Eigen::Index t = 1; t < e.cols(); ++t) {
        m = s * e(f, t) + (1.0 - s) * m;
        ref(f, t) = m;
      }
    }
    const bool same = ar1_smooth(e, s) == ref;
    o.pass = o.pass && same;
    compared += same;
  }
  o.detail = std::to_string(compared) + "/" + std::to_string(kOracleSeeds) + " spectrograms bitwise equal";
  return o;
}

Outcome limiting_cases() {
  Outcome o;
  const PcenParams p(16.0);
  const double zero_out = pcen_transform(Eigen::MatrixXd::Zero(128, 200), p).cwiseAbs().maxCoeff();

  PcenParams no_gain(16.0);
  no_gain.alpha = 0.0;
  double identity_err = 0.0;
  double scale_err = 0.0;
  const auto limit = PcenParams::zero_offset_limit(16.0);
  for (int seed = 0; seed < kOracleSeeds; ++seed) {
    const Eigen::MatrixXd e = random_spectrogram(100 + static_cast<std::uint64_t>(seed));
    const Eigen::MatrixXd direct = ((e.array() + no_gain.delta).pow(no_gain.r) - std::pow(no_gain.delta, no_gain.r)).matrix();
    identity_err = std::max(identity_err, (pcen_transform(e, no_gain) - direct).cwiseAbs().maxCoeff());
    const Eigen::MatrixXd base = pcen_transform(e, limit);
    for (double k : {0.1, 10.0, 1000.0}) {
      const Eigen::MatrixXd scaled = pcen_transform(Eigen::MatrixXd(k * e), limit);
      scale_err = std::max(scale_err, (scaled - base).cwiseAbs().maxCoeff() / base.cwiseAbs().maxCoeff());
    }
  }
  o.pass = zero_out == 0.0 && identity_err <= kLimitTolerance && scale_err <= kLimitTolerance;
  o.detail = "zero max |out| " + fmt("%g", zero_out) + ", alpha=0 max err " + fmt("%.2e", identity_err) +
             ", scale invariance max rel err " + fmt("%.2e", scale_err);
  o.info.push_back("scale invariance is bitwise only for power-of-two k; tolerance " + fmt("%g", kLimitTolerance));
  return o;
}

Outcome cutoff_relation() {
  Outcome o;
  double worst = 0.0;
  for (int k = 1; k <= 9; ++k) {
    const double s = smoothing_coefficient(std::exp2(k));
    const double predicted = std::acos(1.0 - s * s / (2.0 * (1.0 - s)));
    worst = std::max(worst, std::abs(measured_cutoff(s) - predicted) / predicted);
  }
  const bool cutoff_ok = worst <= kCutoffRelTol;

  // Attenuation slope of the magnitude response in dB per decade of
  // frequency, fitted over the band one to one-and-a-bit decades above the
  // cutoff (2 wc to 20 wc).
  const double s = smoothing_coefficient(kFalloffRate);
  const double wc = cutoff_frequency(kFalloffRate);
  std::vector<double> log_w;
  std::vector<double> db;
  for (int i = 0; i <= 200; ++i) {
    const double w = 2.0 * wc * std::pow(10.0, static_cast<double>(i) / 200.0);
    log_w.push_back(std::log10(w));
    db.push_back(10.0 * std::log10(power_response(s, w)));
  }
  const double falloff = -fit_slope(log_w, db);
  const bool falloff_ok = falloff >= kFalloffLo && falloff <= kFalloffHi;

  const double step = 1.001;
  const double local = -10.0 * (std::log10(power_response(s, wc * step)) - std::log10(power_response(s, wc / step))) /
                       (2.0 * std::log10(step));

  o.pass = cutoff_ok && falloff_ok;
  o.detail = "cutoff max rel err " + fmt("%.2e", worst) + (cutoff_ok ? " ok" : " BAD") +
             "; falloff over [2wc, 20wc] at T=64 " + fmt("%.2f", falloff) + " dB/decade, want [" +
             fmt("%g", kFalloffLo) + ", " + fmt("%g", kFalloffHi) + "]";
  o.info.push_back("local slope at wc for T=64: " + fmt("%.2f", local) + " dB/decade");
  o.info.push_back("a one-pole smoother has no sidelobes; its stopband slope tends to 20 dB/decade");
  return o;
}

Outcome streaming_equals_batch() {
  Outcome o;
  int equal = 0;
  int total = 0;
  for (int seed = 0; seed < kOracleSeeds; ++seed) {
    const Eigen::MatrixXd e = random_spectrogram(200 + static_cast<std::uint64_t>(seed));
    for (double rate : {2.0, 64.0, 512.0}) {
      const PcenParams p(rate);
      const Eigen::MatrixXd batch = pcen_transform(e, p);
      SmootherState state(e.rows());
      Eigen::MatrixXd streamed(e.rows(), e.cols());
      for (Eigen::Index t = 0; t < e.cols(); ++t) streamed.col(t) = pcen_stream_step(e.col(t), state, p);
      equal += streamed == batch;
      ++total;
    }
  }
  o.pass = equal == total;
  o.detail = std::to_string(equal) + "/" + std::to_string(total) + " (spectrogram, rate) pairs bitwise equal";
  return o;
}

Outcome gaussianization() {
  Outcome o;
  const FrameSpec spec;
  const PcenParams p(kGaussRate);
  int wins = 0;
  double sum_pcen = 0.0;
  double sum_log = 0.0;
  for (int seed = 0; seed < kGaussClips; ++seed) {
    const AudioClip clip = brown_noise(kGaussClipSeconds, spec.sample_rate, static_cast<std::uint64_t>(seed));
    const MelSpectrogram mel = mel_spectrogram(clip, spec);
    const double skew_pcen = std::abs(population_skewness(pcen_transform(mel, p)));
    const double skew_log = std::abs(population_skewness(log_compress(mel)));
    wins += skew_pcen < skew_log;
    sum_pcen += skew_pcen;
    sum_log += skew_log;
  }
  o.pass = wins >= kGaussRequired;
  o.detail = std::to_string(wins) + "/" + std::to_string(kGaussClips) + " clips with |skew(PCEN)| < |skew(log-mel)|, need " +
             std::to_string(kGaussRequired);
  o.info.push_back("mean |skew|: PCEN " + fmt("%.3f", sum_pcen / kGaussClips) + ", log-mel " +
                   fmt("%.3f", sum_log / kGaussClips));
  return o;
}

double fft_peak_hz(const Eigen::VectorXd& x, int sr) {
  const Eigen::Index start = (x.size() - kPeakFftSize) / 2;
  std::vector<double> frame(kPeakFftSize);
  for (int i = 0; i < kPeakFftSize; ++i) {
    frame[i] = x[start + i] * (0.5 - 0.5 * std::cos(2.0 * M_PI * i / kPeakFftSize));
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, frame);
  int best = 1;
  for (int k = 1; k < kPeakFftSize / 2; ++k) {
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  }
  return static_cast<double>(best) * sr / kPeakFftSize;
}

Outcome augmentation() {
  Outcome o;
  const int sr = 44100;
  const AudioClip noise(0.5 * white_noise(sr, 3), sr);
  const AudioClip wet = convolve_reverb(noise, ImpulseResponse{Eigen::VectorXd::Ones(1), sr, "unit"});
  const double impulse_err = (wet.samples - noise.samples).cwiseAbs().maxCoeff();
  const bool impulse_ok = impulse_err <= kImpulseTolerance;

  bool decay_ok = true;
  std::string decay;
  for (double tau : {0.1, 0.3, 0.5}) {
    const Eigen::Index n = synth_impulse_response(tau, 0.0, sr, 0).samples.size();
    Eigen::VectorXd power = Eigen::VectorXd::Zero(n);
    for (int seed = 0; seed < kDecaySeeds; ++seed) {
      power += synth_impulse_response(tau, 0.0, sr, static_cast<std::uint64_t>(seed)).samples.cwiseAbs2();
    }
    const Eigen::Index block = n / 50;
    std::vector<double> t;
    std::vector<double> log_rms;
    for (Eigen::Index b = 0; b < 50; ++b) {
      t.push_back((static_cast<double>(b * block) + 0.5 * static_cast<double>(block - 1)) / sr);
      log_rms.push_back(0.5 * std::log(power.segment(b * block, block).mean()));
    }
    const double slope = fit_slope(t, log_rms);
    const double rel = std::abs(slope + 1.0 / tau) * tau;
    decay_ok = decay_ok && rel <= kDecayRelTol;
    decay += fmt("tau %.1f: ", tau) + fmt("%.3f", slope) + fmt(" vs %.3f; ", -1.0 / tau);
  }

  const double bin = static_cast<double>(sr) / kPeakFftSize;
  const AudioClip tone(mrpcen::testing::sine(440.0, 2.0, sr, 0.5), sr);
  const double peak_in = fft_peak_hz(tone.samples, sr);
  const double peak_out = fft_peak_hz(pitch_shift(tone, 12.0).samples, sr);
  // Peak bins are quantized, so the shifted peak is held to the exact
  // doubled frequency rather than to twice the quantized input peak.
  const bool pitch_ok = std::abs(peak_in - 440.0) <= bin && std::abs(peak_out - 880.0) <= bin;

  o.pass = impulse_ok && decay_ok && pitch_ok;
  o.detail = "unit impulse max err " + fmt("%.2e", impulse_err) + "; log-RMS slope " + decay + "+12 st peak " +
             fmt("%.2f", peak_in) + " -> " + fmt("%.2f", peak_out) + " Hz, target 880 (bin " + fmt("%.2f", bin) + ")";
  return o;
}

Outcome metrics_oracle() {
  Outcome o;
  const std::vector<std::string> vocab = {"a"};
  const EventList ref{{{0.0, 3.0, "a"}}, 10.0, vocab};
  const EventList est{{{1.0, 4.0, "a"}}, 10.0, vocab};
  const SegmentCounts counts = segment_counts(ref, est);
  const MetricsReport r = compute_metrics(counts);
  const bool hand_ok = counts.true_positives[0] == 2 && counts.false_positives[0] == 1 &&
                       counts.false_negatives[0] == 1 && r.precision == 2.0 / 3.0 && r.recall == 2.0 / 3.0 &&
                       r.f1 == 2.0 / 3.0;
  const MetricsReport perfect = compute_metrics(segment_counts(ref, ref));
  const bool perfect_ok = perfect.f1 == 1.0 && perfect.error_rate && *perfect.error_rate == 0.0;

  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(0, 50);
  double worst = 0.0;
  for (int table = 0; table < kCountTables; ++table) {
    SegmentCounts c;
    c.vocabulary = {"a", "b", "c", "d"};
    c.true_positives = Eigen::VectorXi(4);
    c.false_positives = Eigen::VectorXi(4);
    c.false_negatives = Eigen::VectorXi(4);
    long tp = 0;
    long fp = 0;
    long fn = 0;
    for (int k = 0; k < 4; ++k) {
      tp += c.true_positives[k] = count(rng);
      fp += c.false_positives[k] = count(rng);
      fn += c.false_negatives[k] = count(rng);
    }
    const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double rc = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f1 = p + rc > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0;
    worst = std::max(worst, std::abs(compute_metrics(c).f1 - f1));
  }
  const bool micro_ok = worst <= kMicroF1Tolerance;

  o.pass = hand_ok && perfect_ok && micro_ok;
  o.detail = "hand case P=" + fmt("%.17g", r.precision) + " R=" + fmt("%.17g", r.recall) + " F1=" + fmt("%.17g", r.f1) +
             "; perfect F1=" + fmt("%g", perfect.f1) + " ER=" + fmt("%g", perfect.error_rate.value_or(-1.0)) +
             "; micro-F1 max err " + fmt("%.2e", worst) + " over " + std::to_string(kCountTables) + " tables";
  return o;
}

Outcome bootstrap_protocol() {
  Outcome o;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> vocab = {"a", "b"};
  std::vector<SegmentCounts> clips;
  for (int k = 0; k < 40; ++k) {
    EventList ref{{}, 10.0, vocab};
    EventList est{{}, 10.0, vocab};
    for (EventList* list : {&ref, &est}) {
      for (int e = 0; e < 3; ++e) {
        const double onset = 9.0 * u(rng);
        list->events.push_back({onset, onset + 0.1 + 0.9 * u(rng), vocab[static_cast<std::size_t>(e % 2)]});
      }
    }
    clips.push_back(segment_counts(ref, est));
  }
  const auto a = bootstrap_evaluate(clips, kBootstrapSamples, kBootstrapReps, 2024);
  const auto b = bootstrap_evaluate(clips, kBootstrapSamples, kBootstrapReps, 2024);
  bool same = a.size() == static_cast<std::size_t>(kBootstrapReps) && a.size() == b.size();
  double lo = 1.0;
  double hi = 0.0;
  for (std::size_t i = 0; same && i < a.size(); ++i) {
    same = a[i].f1 == b[i].f1 && a[i].precision == b[i].precision && a[i].recall == b[i].recall &&
           a[i].error_rate == b[i].error_rate;
    lo = std::min(lo, a[i].f1);
    hi = std::max(hi, a[i].f1);
  }

  const auto single = bootstrap_evaluate({clips[0]}, kBootstrapSamples, kBootstrapReps, 7);
  const MetricsReport only = compute_metrics(clips[0]);
  bool constant = single.size() == static_cast<std::size_t>(kBootstrapReps);
  for (const auto& r : single) {
    constant = constant && r.f1 == single.front().f1 && r.precision == single.front().precision &&
               r.recall == single.front().recall && std::abs(r.f1 - only.f1) <= 1e-12;
  }

  o.pass = same && constant;
  o.detail = std::string("repeat run ") + (same ? "identical" : "DIFFERS") + " (F1 range " + fmt("%.3f", lo) + ".." +
             fmt("%.3f", hi) + "); single-clip replicates " + (constant ? "constant" : "VARY");
  return o;
}

Outcome end_to_end() {
  Outcome o;
  mrpcen::testing::TempDir dir("accept10");
  const auto t0 = std::chrono::steady_clock::now();
  const Manifest m = write_miniature_dataset(dir / "mini");
  const PipelineConfig config = PipelineConfig::load(dir / "mini" / "config.json");
  const FeaturizeSummary f = featurize_dataset(m, config, dir / "features");
  const DetectSummary d = detect_dataset(m, dir / "features", config, dir / "predictions");
  const EvaluationSummary e = evaluate_run(m, dir / "predictions", config, dir / "eval");
  const double elapsed = seconds_since(t0);

  bool files_ok = f.failed == 0 && d.failed == 0 && e.failed == 0;
  for (const auto& entry : m.entries) {
    try {
      const Tensor3f t = read_npy(dir / "features" / (entry.clip_id + ".npy"));
      std::ifstream side(dir / "features" / (entry.clip_id + ".json"));
      const json j = json::parse(side);
      files_ok = files_ok && t.shape == std::vector<std::size_t>{128, 345, 10} &&
                 j.at("config_hash") == config.feature_hash() && j.at("clip_id") == entry.clip_id;
    } catch (const std::exception&) {
      files_ok = false;
    }
  }
  try {
    std::ifstream metrics(dir / "eval" / "metrics.json");
    files_ok = files_ok && json::parse(metrics).contains("per_class");
  } catch (const std::exception&) {
    files_ok = false;
  }

  double tone_f1 = -1.0;
  for (const auto& c : e.overall.per_class) {
    if (c.label == "tone") tone_f1 = c.f1;
    o.info.push_back("class " + c.label + ": F1 " + fmt("%.3f", c.f1));
  }
  o.pass = elapsed < kMaxEndToEndSeconds && files_ok && tone_f1 > 0.0;
  o.detail = std::to_string(m.entries.size()) + " clips in " + fmt("%.2f", elapsed) + " s, outputs " +
             (files_ok ? "valid" : "INVALID") + ", tone F1 " + fmt("%.3f", tone_f1) + ", micro F1 " +
             fmt("%.3f", e.overall.f1);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the multi-rate PCEN library"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "shape fidelity", shape_fidelity},
      {2, "smoother scalar oracle", smoother_oracle},
      {3, "PCEN limiting cases", limiting_cases},
      {4, "cutoff relation and falloff", cutoff_relation},
      {5, "streaming equals batch", streaming_equals_batch},
      {6, "gaussianization", gaussianization},
      {7, "augmentation", augmentation},
      {8, "metrics oracle", metrics_oracle},
      {9, "bootstrap protocol", bootstrap_protocol},
      {10, "end to end", end_to_end},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail << "\n";
    for (const auto& line : o.info) std::cout << "      info: " << line << "\n";
  }
  return failures == 0 ? 0 : 1;
}
