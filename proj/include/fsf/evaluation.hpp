#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fsf/training.hpp"

namespace fsf {

struct EpisodeResult {
  int index = 0;
  std::uint64_t seed = 0;
  double accuracy = 0;
  int epochs_used = 0;
  bool failed = false;
  std::string error;
};

struct EvalReport {
  int trials = 0;
  std::vector<EpisodeResult> episodes;      // all trials, in index order
  std::vector<double> per_episode_accuracy; // successful episodes only
  double mean_accuracy = 0;
  double ci95_halfwidth = 0;
  int failed_episodes = 0;
  bool valid = true;  // false when failures exceed 5% of trials
  // Metadata for report emission.
  std::string condition_name;
  std::string regime;
  std::string optimizer;
  std::string backbone;
  std::string head;
  int n_way = 0, k_shot = 0, q_query = 0;
  std::uint64_t master_seed = 0;
  bool without_finetune = false;  // dagger semantics: resolved to 0 epochs
};

// mean = arithmetic mean; ci95 = 1.96 * sd / sqrt(T) with the sample (T-1)
// standard deviation. Recomputed from scratch here so reports can be
// cross-checked independently.
void finalize_report(EvalReport& report);

// Fraction of correctly classified queries under eval-mode preprocessing and
// inference. Deterministic.
double evaluate_episode(Model& model, const Episode& episode, const PreprocessConfig& pcfg);

struct BenchmarkCondition {
  std::string name;
  FinetuneConfig finetune;
  double svm_c = 1.0;
  // epochs==0 or regime none both mean imprint/SVM-init then evaluate.
};

// Episodic benchmark: per trial, fork the pretrained model, reset the head
// from the support set, fine-tune per regime, score the query set.
// Per-episode seeds derive from the master seed; episodes may run in
// parallel (FSF_NUM_WORKERS) with a deterministic, order-independent
// reduction.
EvalReport run_benchmark(const Model& pretrained, const BenchmarkCondition& condition,
                         const ClassSection& novel_section, const EpisodeSpec& spec,
                         int trials, std::uint64_t master_seed,
                         const PreprocessConfig& pcfg);

// Paired comparison: every condition sees identical episode realizations.
std::vector<EvalReport> compare_conditions(const Model& pretrained,
                                           const std::vector<BenchmarkCondition>& grid,
                                           const ClassSection& novel_section,
                                           const EpisodeSpec& spec, int trials,
                                           std::uint64_t master_seed,
                                           const PreprocessConfig& pcfg);

// Flat CSV: episode,seed,accuracy,epochs_used (failed episodes carry an
// empty accuracy field).
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
// Versioned structured-text report.
void write_report_json(const EvalReport& report, const std::filesystem::path& path);
// Comparison table, one row per condition: CSV and markdown layouts.
void write_comparison_csv(const std::vector<EvalReport>& reports,
                          const std::filesystem::path& path);
void write_comparison_markdown(const std::vector<EvalReport>& reports,
                               const std::filesystem::path& path);

// Worker cap: FSF_NUM_WORKERS, default 1.
int num_workers();

}  // namespace fsf
