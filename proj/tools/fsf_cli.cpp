// fsf: few-shot fine-tuning benchmark runner.
//
// Subcommands: pretrain, tune, benchmark, compare, synth-data.
// Exit codes: 0 success, 2 config error, 3 data/IO error, 4 training failure.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "fsf/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string regime;
  std::string optimizer;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--preset", f.preset, "preset: low, high, cross-toy")
      ->check(CLI::IsMember({"low", "high", "cross-toy"}));
  cmd->add_option("--seed", f.seed, "master seed override");
  cmd->add_option("--trials", f.trials, "evaluation trials override");
  cmd->add_option("--regime", f.regime, "update regime: all, bn_fc, fc, none")
      ->check(CLI::IsMember({"all", "bn_fc", "fc", "none"}));
  cmd->add_option("--optimizer", f.optimizer, "fine-tune optimizer name");
}

fsf::ExperimentConfig build_config(const CommonFlags& f) {
  fsf::ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = fsf::load_experiment_config(f.config_path);
  if (!f.preset.empty()) fsf::apply_preset(cfg, f.preset);
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (f.seed) {
    cfg.eval.master_seed = *f.seed;
    cfg.dataset.seed = fsf::splitmix64(*f.seed ^ 0xDA7AULL);
    cfg.pretrain.seed = fsf::splitmix64(*f.seed ^ 0x93E7ULL);
  }
  if (f.trials) cfg.eval.trials = *f.trials;
  if (!f.regime.empty()) cfg.finetune.regime = f.regime;
  if (!f.optimizer.empty()) cfg.finetune.optimizer = f.optimizer;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-shot fine-tuning toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string checkpoint, tuned_path, grid_kind = "regimes";

  CLI::App* c_pretrain = app.add_subcommand("pretrain", "pretrain on base classes");
  add_common(c_pretrain, flags);

  CLI::App* c_tune = app.add_subcommand("tune", "select lr/epochs on validation classes");
  add_common(c_tune, flags);
  c_tune->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required();

  CLI::App* c_bench = app.add_subcommand("benchmark", "episodic evaluation on novel classes");
  add_common(c_bench, flags);
  c_bench->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required();
  c_bench->add_option("--tuned-params", tuned_path, "tuned_params.json from `tune`");

  CLI::App* c_cmp = app.add_subcommand("compare", "paired-seed condition grid");
  add_common(c_cmp, flags);
  c_cmp->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required();
  c_cmp->add_option("--grid", grid_kind, "grid: regimes or optimizers")
      ->check(CLI::IsMember({"regimes", "optimizers"}));

  CLI::App* c_synth = app.add_subcommand("synth-data", "generate a synthetic dataset");
  add_common(c_synth, flags);

  CLI11_PARSE(app, argc, argv);

  fsf::ExperimentConfig cfg;
  try {
    cfg = build_config(flags);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (c_synth->parsed()) {
      auto manifest = fsf::cmd_synth_data(cfg);
      std::cout << "wrote " << manifest.string() << "\n";
    } else if (c_pretrain->parsed()) {
      try {
        auto ckpt = fsf::cmd_pretrain(cfg);
        std::cout << "wrote " << ckpt.string() << "\n";
      } catch (const std::runtime_error& e) {
        std::cerr << "training failure: " << e.what() << "\n";
        return kExitTraining;
      }
    } else if (c_tune->parsed()) {
      auto tuned = fsf::cmd_tune(cfg, checkpoint);
      std::cout << "selected lr=" << tuned.learning_rate << " epochs=" << tuned.epochs
                << (tuned.without_finetune ? " (w/o FT)" : "") << "\n";
    } else if (c_bench->parsed()) {
      std::optional<fsf::TunedParams> tuned;
      if (!tuned_path.empty()) tuned = fsf::load_tuned_params(tuned_path);
      auto report = fsf::cmd_benchmark(cfg, checkpoint, tuned);
      std::printf("%s: %.2f%% +/- %.2f%% over %d trials (%d failed)\n",
                  report.condition_name.c_str(), 100 * report.mean_accuracy,
                  100 * report.ci95_halfwidth, report.trials, report.failed_episodes);
    } else if (c_cmp->parsed()) {
      auto reports = fsf::cmd_compare(cfg, checkpoint, grid_kind);
      for (const auto& r : reports)
        std::printf("%-12s %.2f%% +/- %.2f%%%s\n", r.condition_name.c_str(),
                    100 * r.mean_accuracy, 100 * r.ci95_halfwidth,
                    r.without_finetune ? " (w/o FT)" : "");
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
