// mrpcen: featurize, augment, detect, evaluate and inspect datasets.
//
// Exit codes: 0 success, 1 some clips failed, 2 fatal error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mrpcen/error.hpp"
#include "mrpcen/pipeline.hpp"
#include "mrpcen/synth_dataset.hpp"

namespace fs = std::filesystem;
using namespace mrpcen;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitFatal = 2;

struct CommonArgs {
  std::string manifest;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool force = false;
  int jobs = 1;
};

PipelineConfig load_config(const CommonArgs& args) {
  PipelineConfig config = args.config.empty() ? PipelineConfig{} : PipelineConfig::load(args.config);
  if (args.seed) config.evaluation.seed = *args.seed;
  return config;
}

// --out wins, then MRPCEN_CACHE_DIR, then ./mrpcen_out.
fs::path output_dir(const CommonArgs& args) {
  if (!args.out.empty()) return args.out;
  if (const char* env = std::getenv("MRPCEN_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return "mrpcen_out";
}

RunOptions run_options(const CommonArgs& args) {
  return RunOptions{args.force, args.jobs, args.seed.value_or(0)};
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_manifest) {
  auto* m = cmd->add_option("--manifest", args.manifest, "Dataset manifest (JSON)");
  if (needs_manifest) m->required()->check(CLI::ExistingFile);
  cmd->add_option("--config", args.config, "Pipeline config (JSON); defaults apply when omitted")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "Output directory (default: $MRPCEN_CACHE_DIR or ./mrpcen_out)");
  cmd->add_option("--seed", args.seed, "Seed for augmentation and bootstrap resampling");
  cmd->add_flag("--force", args.force, "Recompute outputs even when cached");
  cmd->add_option("--jobs", args.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-channel energy normalization features and evaluation for sound event detection"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string features_dir;
  std::string predictions_dir;
  std::string feature_file;
  int n_clips = 10;

  auto* featurize = app.add_subcommand("featurize", "Compute log-mel / PCEN / multi-rate PCEN tensors (NPY)");
  add_common(featurize, args, true);

  auto* augment = app.add_subcommand("augment", "Write reverberant and pitch-shifted duplicates");
  add_common(augment, args, true);

  auto* detect = app.add_subcommand("detect", "Threshold detector over feature files -> prediction CSVs");
  add_common(detect, args, true);
  detect->add_option("--features", features_dir, "Directory of feature files")->required()->check(CLI::ExistingDirectory);

  auto* evaluate = app.add_subcommand("evaluate", "Segment-based metrics with bootstrap replicates");
  add_common(evaluate, args, true);
  evaluate->add_option("--predictions", predictions_dir, "Directory of {clip_id}.csv predictions")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* inspect = app.add_subcommand("inspect", "Summarize a feature file");
  inspect->add_option("feature_file", feature_file, "NPY feature file")->required();

  auto* synth = app.add_subcommand("synth-dataset", "Write the miniature synthetic test corpus");
  add_common(synth, args, false);
  synth->add_option("--clips", n_clips, "Number of clips")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; usage errors are fatal.
    return app.exit(e) == 0 ? kExitOk : kExitFatal;
  }

  try {
    if (*featurize) {
      const auto summary = featurize_dataset(Manifest::load(args.manifest), load_config(args), output_dir(args),
                                             run_options(args));
      std::cout << "featurize: " << summary.written << " written, " << summary.cached << " cached, "
                << summary.failed << " failed\n";
      return summary.failed > 0 ? kExitPartial : kExitOk;
    }
    if (*augment) {
      const fs::path out = output_dir(args);
      const auto summary = augment_dataset(Manifest::load(args.manifest), load_config(args), out, run_options(args));
      std::cout << "augment: " << summary.manifest.entries.size() << " manifest entries, " << summary.failed
                << " failed -> " << (out / "manifest.json").string() << "\n";
      return summary.failed > 0 ? kExitPartial : kExitOk;
    }
    if (*detect) {
      const auto summary = detect_dataset(Manifest::load(args.manifest), features_dir, load_config(args), output_dir(args));
      std::cout << "detect: " << summary.written << " written, " << summary.failed << " failed\n";
      return summary.failed > 0 ? kExitPartial : kExitOk;
    }
    if (*evaluate) {
      const fs::path out = output_dir(args);
      const auto summary = evaluate_run(Manifest::load(args.manifest), predictions_dir, load_config(args), out);
      std::cout << "evaluate: micro P=" << summary.overall.precision << " R=" << summary.overall.recall
                << " F1=" << summary.overall.f1 << " ER="
                << (summary.overall.error_rate ? std::to_string(*summary.overall.error_rate) : "undefined") << "\n";
      for (const auto& m : summary.overall.per_class) {
        std::cout << "  " << m.label << ": P=" << m.precision << " R=" << m.recall << " F1=" << m.f1
                  << " support=" << m.support << "\n";
      }
      std::cout << "reports in " << out.string() << "\n";
      return summary.failed > 0 ? kExitPartial : kExitOk;
    }
    if (*inspect) {
      inspect_feature(feature_file, std::cout);
      return kExitOk;
    }
    if (*synth) {
      MiniatureDatasetSpec spec;
      spec.n_clips = n_clips;
      spec.seed = args.seed.value_or(0);
      const fs::path out = output_dir(args);
      const auto manifest = write_miniature_dataset(out, spec);
      std::cout << "synth-dataset: " << manifest.entries.size() << " clips -> " << (out / "manifest.json").string()
                << "\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}
