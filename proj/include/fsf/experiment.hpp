#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fsf/evaluation.hpp"

namespace fsf {

// Full experiment description. Every field has a default; a JSON config file
// may override any block, and CLI flags override the file.
struct ExperimentConfig {
  std::string name = "experiment";
  std::filesystem::path out_dir = "out";

  struct Dataset {
    std::string type = "synthetic";  // synthetic | manifest
    std::filesystem::path manifest_path;
    std::filesystem::path data_root;
    std::string domain_preset = "single";  // single | cross
    int base_classes = 10;
    int val_classes = 6;  // must cover eval.n_way for tuning episodes
    int novel_classes = 6;
    int examples_per_class = 50;
    int image_size = 32;
    double domain_a = 0.0;  // base-class domain knob
    double domain_b = 1.0;  // val/novel domain knob (cross preset)
    std::uint64_t seed = 7;
  } dataset;

  std::string resolution = "toy";  // low | high | toy

  struct BackboneBlock {
    std::string architecture = "reference-convnet";
    int input_resolution = 32;
  } backbone;

  struct HeadBlock {
    std::string kind = "normalized";  // normalized | simple
    double initial_scale = 10.0;
    bool scale_trainable = true;
    double svm_c = 1.0;
  } head;

  struct PretrainBlock {
    std::string optimizer = "adam";
    double learning_rate = 0.001;
    int epochs = 30;       // desk default; full-scale runs use hundreds
    int batch_size = 32;
    std::uint64_t seed = 1;
  } pretrain;

  struct FinetuneBlock {
    std::string regime = "all";
    std::string optimizer = "adam";
    double learning_rate = 0.001;          // used when tuning is skipped
    std::vector<double> lr_candidates = {0.01, 0.001, 0.0001};
    int max_epochs = 100;
    int tuning_trials = 20;
    int epochs = 20;                        // used when tuning is skipped
    bool freeze_bn_stats = false;
  } finetune;

  struct EvalBlock {
    int n_way = 5;
    int k_shot = 5;
    int q_query = 15;
    int trials = 600;
    std::uint64_t master_seed = 42;
  } eval;

  // -- derived helpers --
  PreprocessConfig preprocess() const;
  EpisodeSpec episode_spec() const;
  std::filesystem::path experiment_dir() const { return out_dir / name; }
  std::string resolved_json() const;  // full resolved config, echoed into outputs
  std::string content_hash() const;   // FNV-1a over the resolved config
};

ExperimentConfig load_experiment_config(const std::filesystem::path& json_path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

// Applies a named preset on top of the current config. Presets:
//   low       — 84px pipeline
//   high      — 224px pipeline
//   cross-toy — synthetic cross-domain desk benchmark (32px, 100 trials)
void apply_preset(ExperimentConfig& cfg, const std::string& preset);

struct DatasetBundle {
  ClassSection base, val, novel;
};

// Generates or loads the three splits per the dataset block.
DatasetBundle resolve_dataset(const ExperimentConfig& cfg);

// Subcommand bodies shared by the CLI and the acceptance suite. Each writes
// its artifacts under <out>/<name>/ and returns the primary artifact path.
std::filesystem::path cmd_synth_data(const ExperimentConfig& cfg);
std::filesystem::path cmd_pretrain(const ExperimentConfig& cfg);

struct TunedParams {
  double learning_rate = 0;
  int epochs = 0;
  bool without_finetune = false;
};
TunedParams cmd_tune(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint);

EvalReport cmd_benchmark(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                         const std::optional<TunedParams>& tuned = std::nullopt);

// grid_kind: "regimes" (all/bn_fc/fc/none) or "optimizers" (the 7-way suite).
std::vector<EvalReport> cmd_compare(const ExperimentConfig& cfg,
                                    const std::filesystem::path& checkpoint,
                                    const std::string& grid_kind);

TunedParams load_tuned_params(const std::filesystem::path& path);

}  // namespace fsf
