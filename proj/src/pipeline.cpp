#include "mrpcen/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "mrpcen/augment.hpp"
#include "mrpcen/error.hpp"

namespace mrpcen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::mutex log_mutex;

void warn(const std::string& msg) {
  const std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "warning: " << msg << "\n";
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// thrown by any task is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("short write: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  }
}

fs::path relative_to(const fs::path& p, const fs::path& base) {
  const fs::path abs = fs::absolute(p).lexically_normal();
  const fs::path rel = abs.lexically_relative(fs::absolute(base).lexically_normal());
  return rel.empty() ? abs : rel;
}

}  // namespace

void Manifest::validate() const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    require(!e.clip_id.empty(), "manifest: empty clip id");
    require(e.clip_id.find('/') == std::string::npos, "manifest: clip id '" + e.clip_id + "' contains '/'");
    require(seen.insert(e.clip_id).second, "manifest: duplicate clip id '" + e.clip_id + "'");
  }
}

Manifest Manifest::load(const fs::path& path) {
  const json j = read_json(path);
  const fs::path base = path.parent_path();
  Manifest m;
  try {
    if (j.contains("vocabulary")) m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    for (const json& c : j.at("clips")) {
      ManifestEntry e;
      e.clip_id = c.at("id").get<std::string>();
      const fs::path audio = c.at("audio").get<std::string>();
      e.audio_path = audio.is_absolute() ? audio : base / audio;
      if (c.contains("annotation") && !c.at("annotation").is_null()) {
        const fs::path ann = c.at("annotation").get<std::string>();
        e.annotation_path = ann.is_absolute() ? ann : base / ann;
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void Manifest::save(const fs::path& path) const {
  validate();
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  json clips = json::array();
  for (const auto& e : entries) {
    json c = {{"id", e.clip_id}, {"audio", relative_to(e.audio_path, base).generic_string()}};
    c["annotation"] = e.annotation_path.empty() ? json(nullptr)
                                                : json(relative_to(e.annotation_path, base).generic_string());
    clips.push_back(std::move(c));
  }
  write_json(path, {{"vocabulary", vocabulary}, {"clips", clips}});
}

std::vector<Eigen::MatrixXd> compute_features(const AudioClip& clip, const PipelineConfig& config) {
  config.validate();
  const MelSpectrogram mel = mel_spectrogram(clip, config.frame);
  switch (config.representation) {
    case Representation::LogMel:
      return {log_compress(mel)};
    case Representation::Pcen:
      return {pcen_transform(mel, config.pcen.with_rate(config.schedule[0]))};
    case Representation::MrPcen:
      return multi_rate_pcen(mel, config.schedule, config.pcen).layers;
  }
  return {};
}

fs::path sidecar_path(const fs::path& feature_file) {
  fs::path p = feature_file;
  p.replace_extension(".json");
  return p;
}

namespace {

bool cache_hit(const fs::path& npy, const std::string& hash, std::vector<std::size_t>& shape) {
  const fs::path side = sidecar_path(npy);
  if (!fs::exists(npy) || !fs::exists(side)) return false;
  try {
    const json j = read_json(side);
    if (j.value("config_hash", std::string()) != hash) return false;
    shape = read_npy(npy).shape;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

FeaturizeSummary featurize_dataset(const Manifest& manifest, const PipelineConfig& config,
                                   const fs::path& out_dir, const RunOptions& options) {
  manifest.validate();
  config.validate();
  ensure_directory(out_dir);
  const std::string hash = config.feature_hash();

  FeaturizeSummary summary;
  summary.clips.resize(manifest.entries.size());
  parallel_for(manifest.entries.size(), options.jobs, [&](std::size_t i) {
    const ManifestEntry& entry = manifest.entries[i];
    ClipStatus& status = summary.clips[i];
    status.clip_id = entry.clip_id;
    const fs::path npy = out_dir / (entry.clip_id + ".npy");
    if (!options.force && cache_hit(npy, hash, status.shape)) {
      status.status = "cached";
      return;
    }

    std::vector<Eigen::MatrixXd> layers;
    try {
      layers = compute_features(load_wav(entry.audio_path), config);
    } catch (const IoError& e) {
      status.status = "failed";
      status.error = e.what();
    } catch (const FormatError& e) {
      status.status = "failed";
      status.error = e.what();
    } catch (const InvalidArgument& e) {
      status.status = "failed";
      status.error = e.what();
    }
    if (status.status == "failed") {
      warn("featurize: skipping " + entry.clip_id + ": " + status.error);
      return;
    }

    const Tensor3f tensor = pack_layers(layers);
    write_npy(npy, tensor);
    write_json(sidecar_path(npy), {{"clip_id", entry.clip_id},
                                   {"config_hash", hash},
                                   {"representation", to_string(config.representation)},
                                   {"schedule", config.representation == Representation::LogMel
                                                    ? json::array()
                                                    : json(config.representation == Representation::Pcen
                                                               ? std::vector<double>{config.schedule[0]}
                                                               : config.schedule.rates())},
                                   {"frame_rate", config.frame.frame_rate()}});
    status.status = "written";
    status.shape = tensor.shape;
  });

  json clips = json::array();
  for (const auto& c : summary.clips) {
    if (c.status == "written") ++summary.written;
    if (c.status == "cached") ++summary.cached;
    if (c.status == "failed") ++summary.failed;
    json item = {{"clip_id", c.clip_id}, {"status", c.status}, {"shape", c.shape}};
    if (!c.error.empty()) item["error"] = c.error;
    clips.push_back(std::move(item));
  }
  write_json(out_dir / "featurize_run.json", {{"config_hash", hash},
                                              {"config", config.to_json()},
                                              {"clips", clips},
                                              {"written", summary.written},
                                              {"cached", summary.cached},
                                              {"failed", summary.failed}});
  return summary;
}

std::string reverb_clip_id(const std::string& clip_id, const std::string& ir_label) {
  return clip_id + "__ir-" + ir_label;
}

std::string pitch_clip_id(const std::string& clip_id, double semitones) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+g", semitones);
  return clip_id + "__ps" + buf;
}

AugmentSummary augment_dataset(const Manifest& manifest, const PipelineConfig& config,
                               const fs::path& out_dir, const RunOptions& options) {
  manifest.validate();
  config.validate();
  const AugmentationPlan& plan = config.augmentation;
  AugmentSummary summary;
  summary.manifest.vocabulary = manifest.vocabulary;
  if (plan.impulse_responses.empty() && plan.pitch_shifts.empty()) {
    summary.manifest = manifest;
    return summary;
  }
  ensure_directory(out_dir / "audio");
  ensure_directory(out_dir / "annotations");

  // Impulse responses are shared by every clip; a bad IR file is fatal.
  std::vector<ImpulseResponse> irs;
  for (const auto& src : plan.impulse_responses) {
    if (src.path.empty()) {
      ImpulseResponse ir = synth_impulse_response(src.tau_c, src.duration, config.frame.sample_rate,
                                                  src.seed + options.seed);
      ir.label = src.label;
      irs.push_back(std::move(ir));
    } else {
      AudioClip wav = load_wav(src.path);
      irs.push_back({std::move(wav.samples), wav.sample_rate, src.label});
    }
  }

  std::vector<std::vector<ManifestEntry>> per_clip(manifest.entries.size());
  std::vector<int> failures(manifest.entries.size(), 0);
  parallel_for(manifest.entries.size(), options.jobs, [&](std::size_t i) {
    const ManifestEntry& entry = manifest.entries[i];
    if (plan.keep_originals) per_clip[i].push_back(entry);
    AudioClip clip;
    try {
      clip = load_wav(entry.audio_path);
    } catch (const std::exception& e) {
      warn("augment: skipping " + entry.clip_id + ": " + e.what());
      ++failures[i];
      return;
    }

    auto emit = [&](const std::string& id, const AudioClip& audio) {
      ManifestEntry out{id, out_dir / "audio" / (id + ".wav"), {}};
      write_wav(out.audio_path, audio, WavEncoding::Float32);
      if (!entry.annotation_path.empty()) {
        out.annotation_path = out_dir / "annotations" / (id + ".csv");
        fs::copy_file(entry.annotation_path, out.annotation_path, fs::copy_options::overwrite_existing);
      }
      per_clip[i].push_back(std::move(out));
    };

    for (const auto& ir : irs) {
      try {
        emit(reverb_clip_id(entry.clip_id, ir.label), convolve_reverb(clip, ir));
      } catch (const InvalidArgument& e) {
        warn("augment: " + entry.clip_id + " x IR '" + ir.label + "': " + e.what());
        ++failures[i];
      }
    }
    for (double shift : plan.pitch_shifts) {
      emit(pitch_clip_id(entry.clip_id, shift), pitch_shift(clip, shift));
    }
  });

  for (auto& entries : per_clip) {
    for (auto& e : entries) summary.manifest.entries.push_back(std::move(e));
  }
  summary.failed = std::accumulate(failures.begin(), failures.end(), 0);
  summary.manifest.save(out_dir / "manifest.json");
  return summary;
}

namespace {

double clip_duration(const fs::path& audio) {
  const auto [rate, frames] = wav_info(audio);
  return static_cast<double>(frames) / rate;
}

}  // namespace

DetectSummary detect_dataset(const Manifest& manifest, const fs::path& features_dir,
                             const PipelineConfig& config, const fs::path& out_dir) {
  manifest.validate();
  config.validate();
  ensure_directory(out_dir);
  require(!config.detector.bands.empty(), "detect: config has no detector.bands");
  DetectSummary summary;
  for (const auto& entry : manifest.entries) {
    try {
      const fs::path npy = features_dir / (entry.clip_id + ".npy");
      const Tensor3f t = read_npy(npy);
      if (t.shape.size() != 3) throw FormatError(npy.string() + ": expected a rank-3 tensor");
      const json side = read_json(sidecar_path(npy));
      const double frame_rate = side.at("frame_rate").get<double>();

      Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t.shape[0]),
                                                   static_cast<Eigen::Index>(t.shape[1]));
      for (std::size_t b = 0; b < t.shape[0]; ++b) {
        for (std::size_t f = 0; f < t.shape[1]; ++f) {
          double acc = 0.0;
          for (std::size_t k = 0; k < t.shape[2]; ++k) acc += t.at(b, f, k);
          mean(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(f)) = acc / static_cast<double>(t.shape[2]);
        }
      }
      const EventList events = threshold_detector(mean, frame_rate, manifest.vocabulary, config.detector.bands,
                                                  config.detector.threshold, clip_duration(entry.audio_path));
      write_event_csv(out_dir / (entry.clip_id + ".csv"), events.events);
      ++summary.written;
    } catch (const IoError& e) {
      warn("detect: " + entry.clip_id + ": " + e.what());
      ++summary.failed;
    } catch (const FormatError& e) {
      warn("detect: " + entry.clip_id + ": " + e.what());
      ++summary.failed;
    } catch (const json::exception& e) {
      warn("detect: " + entry.clip_id + ": bad sidecar: " + e.what());
      ++summary.failed;
    }
  }
  return summary;
}

namespace {

json metrics_json(const MetricsReport& r) {
  return {{"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"error_rate", r.error_rate ? json(*r.error_rate) : json(nullptr)},
          {"substitution_rate", r.substitution_rate},
          {"deletion_rate", r.deletion_rate},
          {"insertion_rate", r.insertion_rate}};
}

json distribution_json(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  return {{"mean", mean}, {"p2_5", percentile(v, 2.5)}, {"p97_5", percentile(v, 97.5)}};
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

EvaluationSummary evaluate_run(const Manifest& manifest, const fs::path& predictions_dir,
                               const PipelineConfig& config, const fs::path& out_dir) {
  manifest.validate();
  config.validate();
  require(!manifest.vocabulary.empty(), "evaluate: manifest has an empty vocabulary");
  ensure_directory(out_dir);
  const double seg = config.evaluation.segment_length;

  EvaluationSummary summary;
  std::vector<SegmentCounts> per_clip;
  for (const auto& entry : manifest.entries) {
    try {
      const double duration = clip_duration(entry.audio_path);
      EventList ref{entry.annotation_path.empty() ? std::vector<Event>{} : read_event_csv(entry.annotation_path),
                    duration, manifest.vocabulary};
      EventList est{{}, duration, manifest.vocabulary};
      const fs::path pred = predictions_dir / (entry.clip_id + ".csv");
      if (fs::exists(pred)) {
        est.events = read_event_csv(pred);
        for (auto& e : est.events) e.offset = std::min(e.offset, duration);
        std::erase_if(est.events, [](const Event& e) { return e.offset <= e.onset; });
      } else {
        warn("evaluate: no prediction for " + entry.clip_id + ", scoring it as empty");
        ++summary.missing_predictions;
      }
      per_clip.push_back(segment_counts(ref, est, seg));
    } catch (const std::exception& e) {
      warn("evaluate: skipping " + entry.clip_id + ": " + e.what());
      ++summary.failed;
    }
  }

  SegmentCounts pooled;
  pooled.vocabulary = manifest.vocabulary;
  pooled.segment_length = seg;
  const auto n_classes = static_cast<Eigen::Index>(manifest.vocabulary.size());
  pooled.true_positives = pooled.false_positives = pooled.false_negatives = Eigen::VectorXi::Zero(n_classes);
  for (const auto& c : per_clip) pooled += c;
  summary.overall = compute_metrics(pooled);
  if (!per_clip.empty()) {
    summary.replicates = bootstrap_evaluate(per_clip, config.evaluation.bootstrap_samples,
                                            config.evaluation.bootstrap_reps, config.evaluation.seed);
  }

  json per_class = json::array();
  for (const auto& m : summary.overall.per_class) {
    per_class.push_back({{"label", m.label},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support},
                         {"true_positives", m.true_positives},
                         {"false_positives", m.false_positives},
                         {"false_negatives", m.false_negatives}});
  }
  std::vector<double> f1s;
  std::vector<double> precisions;
  std::vector<double> recalls;
  std::vector<double> error_rates;
  for (const auto& r : summary.replicates) {
    f1s.push_back(r.f1);
    precisions.push_back(r.precision);
    recalls.push_back(r.recall);
    if (r.error_rate) error_rates.push_back(*r.error_rate);
  }
  write_json(out_dir / "metrics.json",
             {{"clips", per_clip.size()},
              {"failed", summary.failed},
              {"missing_predictions", summary.missing_predictions},
              {"segment_length", seg},
              {"overall", metrics_json(summary.overall)},
              {"per_class", per_class},
              {"bootstrap",
               {{"n_samples", config.evaluation.bootstrap_samples},
                {"n_reps", static_cast<int>(summary.replicates.size())},
                {"seed", config.evaluation.seed},
                {"f1", distribution_json(f1s)},
                {"precision", distribution_json(precisions)},
                {"recall", distribution_json(recalls)},
                {"error_rate", distribution_json(error_rates)}}}});

  {
    std::ofstream csv(out_dir / "metrics.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (out_dir / "metrics.csv").string());
    csv << "scope,label,precision,recall,f1,support\n";
    for (const auto& m : summary.overall.per_class) {
      csv << "class," << m.label << ',' << csv_number(m.precision) << ',' << csv_number(m.recall) << ','
          << csv_number(m.f1) << ',' << m.support << '\n';
    }
    int support = 0;
    for (const auto& m : summary.overall.per_class) support += m.support;
    csv << "overall,micro," << csv_number(summary.overall.precision) << ','
        << csv_number(summary.overall.recall) << ',' << csv_number(summary.overall.f1) << ',' << support << '\n';
  }
  {
    std::ofstream csv(out_dir / "bootstrap.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (out_dir / "bootstrap.csv").string());
    csv << "replicate,precision,recall,f1,error_rate\n";
    for (std::size_t i = 0; i < summary.replicates.size(); ++i) {
      const auto& r = summary.replicates[i];
      csv << i << ',' << csv_number(r.precision) << ',' << csv_number(r.recall) << ',' << csv_number(r.f1) << ','
          << (r.error_rate ? csv_number(*r.error_rate) : std::string("nan")) << '\n';
    }
  }
  return summary;
}

void inspect_feature(const fs::path& feature_file, std::ostream& out) {
  const Tensor3f t = read_npy(feature_file);
  std::string hash = "none";
  std::vector<double> schedule;
  const fs::path side = sidecar_path(feature_file);
  if (fs::exists(side)) {
    const json j = read_json(side);
    hash = j.value("config_hash", std::string("none"));
    if (j.contains("schedule")) schedule = j.at("schedule").get<std::vector<double>>();
  }

  out << "file: " << feature_file.string() << "\n";
  out << "shape: (";
  for (std::size_t i = 0; i < t.shape.size(); ++i) out << (i ? ", " : "") << t.shape[i];
  out << ")\n";
  out << "dtype: float32\n";
  out << "config_hash: " << hash << "\n";
  out << "layer,rate,min,mean,max\n";
  if (t.shape.size() != 3) return;
  const std::size_t layers = t.shape[2];
  for (std::size_t k = 0; k < layers; ++k) {
    double lo = 0.0;
    double hi = 0.0;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < t.shape[0]; ++b) {
      for (std::size_t f = 0; f < t.shape[1]; ++f) {
        const double v = t.at(b, f, k);
        lo = count == 0 ? v : std::min(lo, v);
        hi = count == 0 ? v : std::max(hi, v);
        sum += v;
        ++count;
      }
    }
    const double mean = count ? sum / static_cast<double>(count) : 0.0;
    out << k << ',' << (k < schedule.size() ? csv_number(schedule[k]) : std::string("")) << ','
        << csv_number(lo) << ',' << csv_number(mean) << ',' << csv_number(hi) << '\n';
  }
}

}  // namespace mrpcen
