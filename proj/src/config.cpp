#include "mrpcen/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "mrpcen/error.hpp"

namespace mrpcen {

using nlohmann::json;

std::string to_string(Representation r) {
  switch (r) {
    case Representation::LogMel: return "logmel";
    case Representation::Pcen: return "pcen";
    case Representation::MrPcen: return "mrpcen";
  }
  return "?";
}

Representation parse_representation(const std::string& name) {
  if (name == "logmel") return Representation::LogMel;
  if (name == "pcen") return Representation::Pcen;
  if (name == "mrpcen") return Representation::MrPcen;
  throw FormatError("unknown representation '" + name + "' (expected logmel, pcen or mrpcen)");
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw FormatError(where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw FormatError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_into(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  reject_unknown(j, {"frame", "pcen", "representation", "augmentation", "evaluation", "detector"}, "config");

  if (j.contains("frame")) {
    const json& f = j.at("frame");
    reject_unknown(f, {"sample_rate", "window_length", "hop_length", "n_mels", "fmin", "fmax"}, "frame");
    read_into(f, "sample_rate", c.frame.sample_rate, "frame");
    c.frame.fmax = c.frame.sample_rate / 2.0;
    read_into(f, "window_length", c.frame.window_length, "frame");
    read_into(f, "hop_length", c.frame.hop_length, "frame");
    read_into(f, "n_mels", c.frame.n_mels, "frame");
    read_into(f, "fmin", c.frame.fmin, "frame");
    if (f.contains("fmax") && !f.at("fmax").is_null()) read_into(f, "fmax", c.frame.fmax, "frame");
  }

  if (j.contains("pcen")) {
    const json& p = j.at("pcen");
    reject_unknown(p, {"epsilon", "alpha", "delta", "r", "rates"}, "pcen");
    read_into(p, "epsilon", c.pcen.epsilon, "pcen");
    read_into(p, "alpha", c.pcen.alpha, "pcen");
    read_into(p, "delta", c.pcen.delta, "pcen");
    read_into(p, "r", c.pcen.r, "pcen");
    if (p.contains("rates")) {
      std::vector<double> rates;
      read_into(p, "rates", rates, "pcen");
      c.schedule = RateSchedule(std::move(rates));
    }
  }

  if (j.contains("representation")) {
    std::string name;
    read_into(j, "representation", name, "config");
    c.representation = parse_representation(name);
  }

  if (j.contains("augmentation")) {
    const json& a = j.at("augmentation");
    reject_unknown(a, {"impulse_responses", "pitch_shifts", "keep_originals"}, "augmentation");
    read_into(a, "pitch_shifts", c.augmentation.pitch_shifts, "augmentation");
    read_into(a, "keep_originals", c.augmentation.keep_originals, "augmentation");
    if (a.contains("impulse_responses")) {
      const json& list = a.at("impulse_responses");
      if (!list.is_array()) throw FormatError("augmentation.impulse_responses: expected an array");
      for (const json& item : list) {
        reject_unknown(item, {"label", "path", "tau_c", "duration", "seed"}, "impulse_responses[]");
        IrSource ir;
        read_into(item, "label", ir.label, "impulse_responses[]");
        std::string path;
        read_into(item, "path", path, "impulse_responses[]");
        ir.path = path;
        read_into(item, "tau_c", ir.tau_c, "impulse_responses[]");
        read_into(item, "duration", ir.duration, "impulse_responses[]");
        read_into(item, "seed", ir.seed, "impulse_responses[]");
        if (ir.path.empty() && ir.tau_c <= 0.0) {
          throw FormatError("impulse_responses[]: need either 'path' or a positive 'tau_c'");
        }
        if (ir.label.empty()) {
          char tag[32];
          std::snprintf(tag, sizeof tag, "tau%g", ir.tau_c);
          ir.label = ir.path.empty() ? tag : ir.path.stem().string();
        }
        c.augmentation.impulse_responses.push_back(std::move(ir));
      }
    }
  }

  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    reject_unknown(e, {"segment_length", "bootstrap_samples", "bootstrap_reps", "seed"}, "evaluation");
    read_into(e, "segment_length", c.evaluation.segment_length, "evaluation");
    read_into(e, "bootstrap_samples", c.evaluation.bootstrap_samples, "evaluation");
    read_into(e, "bootstrap_reps", c.evaluation.bootstrap_reps, "evaluation");
    read_into(e, "seed", c.evaluation.seed, "evaluation");
  }

  if (j.contains("detector")) {
    const json& d = j.at("detector");
    reject_unknown(d, {"threshold", "bands"}, "detector");
    read_into(d, "threshold", c.detector.threshold, "detector");
    if (d.contains("bands")) {
      const json& bands = d.at("bands");
      if (!bands.is_object()) throw FormatError("detector.bands: expected an object of label -> [first, last)");
      for (const auto& [label, range] : bands.items()) {
        if (!range.is_array() || range.size() != 2) {
          throw FormatError("detector.bands." + label + ": expected [first, last)");
        }
        c.detector.bands.push_back({label, range[0].get<int>(), range[1].get<int>()});
      }
    }
  }

  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

json PipelineConfig::to_json() const {
  json j;
  j["frame"] = {{"sample_rate", frame.sample_rate}, {"window_length", frame.window_length},
                {"hop_length", frame.hop_length},   {"n_mels", frame.n_mels},
                {"fmin", frame.fmin},               {"fmax", frame.fmax}};
  j["pcen"] = {{"epsilon", pcen.epsilon}, {"alpha", pcen.alpha}, {"delta", pcen.delta},
               {"r", pcen.r},             {"rates", schedule.rates()}};
  j["representation"] = to_string(representation);

  json irs = json::array();
  for (const auto& ir : augmentation.impulse_responses) {
    json item = {{"label", ir.label}};
    if (!ir.path.empty()) {
      item["path"] = ir.path.string();
    } else {
      item["tau_c"] = ir.tau_c;
      item["duration"] = ir.duration;
      item["seed"] = ir.seed;
    }
    irs.push_back(item);
  }
  j["augmentation"] = {{"impulse_responses", irs},
                       {"pitch_shifts", augmentation.pitch_shifts},
                       {"keep_originals", augmentation.keep_originals}};
  j["evaluation"] = {{"segment_length", evaluation.segment_length},
                     {"bootstrap_samples", evaluation.bootstrap_samples},
                     {"bootstrap_reps", evaluation.bootstrap_reps},
                     {"seed", evaluation.seed}};
  json bands = json::object();
  for (const auto& b : detector.bands) bands[b.label] = {b.first_band, b.last_band};
  j["detector"] = {{"threshold", detector.threshold}, {"bands", bands}};
  return j;
}

std::string PipelineConfig::feature_hash() const {
  const json j = to_json();
  const json key = {{"frame", j["frame"]}, {"pcen", j["pcen"]}, {"representation", j["representation"]}};
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(key.dump())));
  return hex;
}

void PipelineConfig::validate() const {
  frame.validate();
  pcen.validate();
  if (representation == Representation::Pcen) {
    require(schedule.size() == 1,
            "config: representation 'pcen' needs exactly one rate in pcen.rates, got " +
                std::to_string(schedule.size()));
  }
  for (double shift : augmentation.pitch_shifts) {
    require(std::abs(shift) <= 12.0 && shift != 0.0, "config: pitch shifts must be nonzero with |n| <= 12");
  }
  require(evaluation.segment_length > 0.0, "config: evaluation.segment_length must be positive");
  require(evaluation.bootstrap_samples >= 1 && evaluation.bootstrap_reps >= 1,
          "config: bootstrap_samples and bootstrap_reps must be >= 1");
  for (const auto& b : detector.bands) {
    require(b.first_band >= 0 && b.first_band < b.last_band && b.last_band <= frame.n_mels,
            "config: detector band range for '" + b.label + "' must satisfy 0 <= first < last <= n_mels");
  }
}

}  // namespace mrpcen
