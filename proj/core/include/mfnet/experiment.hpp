#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfnet/data.hpp"
#include "mfnet/diagnostics.hpp"
#include "mfnet/embedding.hpp"

namespace mfnet {

enum class RunKind { TrainFinite, TrainMf, Couple, Diversity, GradCheck };

struct ModelConfig {
  int L = 0;
  int d = 0;
  std::vector<int> widths;
  ActKind hidden = ActKind::Tanh;
  ActKind output = ActKind::Identity;
  LossSpec loss;
  ScheduleSpec schedules;
};

struct DataConfig {
  DataModel model;
  int panel_size = 256;
};

struct InitConfig {
  EmbedScheme scheme = EmbedScheme::Bidiverse;
  LatentSpace latent;
  EmbedOptions opts;
  uint64_t codes_seed = 0;
  bool codes_seed_set = false;
};

struct TrainFiniteConfig {
  double eps = 1e-3;
  long steps = 0;
  long log_every = 1;
  TrainMode mode = TrainMode::Sgd;
};

struct TrainMfConfig {
  Scheme scheme = Scheme::Rk4;
  double step_size = 0.0;
  long steps = 0;
  long checkpoint_every = 1;
};

struct DiversityConfig {
  TrainMfConfig mf;
  std::vector<int> layers;
  int probes_per_layer = 8;
  double probe_scale = 1.0;
  uint64_t probe_seed = 0;
};

struct GradCheckConfig {
  int instances = 10;
  double fd_h = 1e-6;
  int max_depth = 4;
  int max_width = 6;
  uint64_t instance_seed = 0;
};

/// Fully validated experiment description.  `echo` holds the canonical
/// JSON text (sorted keys, overrides applied) recorded in manifests and
/// used for replay.
struct ExperimentConfig {
  RunKind kind = RunKind::TrainFinite;
  uint64_t seed = 0;
  std::string out_dir;
  int threads = 1;
  bool deterministic = true;

  ModelConfig model;
  DataConfig data;
  InitConfig init;

  std::optional<TrainFiniteConfig> train_finite;
  std::optional<TrainMfConfig> train_mf;
  std::optional<TrainFiniteConfig> couple_finite;
  std::optional<TrainMfConfig> couple_mf;
  std::optional<DiversityConfig> diversity;
  std::optional<GradCheckConfig> grad_check;

  std::string echo;

  ExecContext exec() const { return {threads, deterministic}; }
};

/// CLI-level overrides merged into the JSON before validation.
struct ConfigOverrides {
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<bool> deterministic;
};

/// Parses and validates; throws ConfigError listing every violation.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const ConfigOverrides& overrides = {});

struct RunOutput {
  std::string out_dir;
  std::string manifest_path;
  std::vector<std::pair<std::string, std::string>> files;  // name -> fnv1a64 hex
  std::string summary;
};

/// Executes the experiment, writing its outputs and `manifest.json` under
/// cfg.out_dir (created if absent).
RunOutput run_experiment(const ExperimentConfig& cfg);

struct ReplayMismatch {
  std::string file;
  std::string want_hash;
  std::string got_hash;
};

/// Re-runs the configuration embedded in a manifest into `out_dir` and
/// compares output hashes against the recorded ones.
RunOutput replay_run(const std::string& manifest_path, const std::string& out_dir,
                     std::vector<ReplayMismatch>* mismatches);

/// FNV-1a 64-bit hash of a file's bytes, hex-encoded.
std::string hash_file(const std::string& path);

}  // namespace mfnet
