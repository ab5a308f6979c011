#pragma once

#include <functional>
#include <optional>

#include "fsf/model.hpp"
#include "fsf/optim.hpp"

namespace fsf {

// Which parameter groups may change during fine-tuning. `None` is the
// "w/o FT" baseline. Regimes govern gradient updates only; BN running
// statistics keep tracking in train mode unless explicitly frozen.
enum class UpdateRegime { All, BnAndFc, FcOnly, None };

UpdateRegime regime_from_string(const std::string& s);
const char* regime_to_string(UpdateRegime r);

// Union of the regime's tag groups. Throws "regime inapplicable" when
// bn_and_fc is requested on a BN-free architecture.
std::vector<Param*> select_trainable(Model& model, UpdateRegime regime);

struct EpochStats {
  int epoch = 0;
  double loss = 0;
  double accuracy = 0;
};

struct PretrainLog {
  std::vector<EpochStats> epochs;
  bool loss_decreased = true;  // false mirrors the "loss did not decrease" outcome
};

struct PretrainConfig {
  OptimizerConfig optimizer;  // default: adam, lr 0.001
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

// Cross-entropy training of the full model over base classes with train-mode
// augmentation. Deterministic given the seed.
PretrainLog pretrain(Model& model, const ClassSection& base_section,
                     const PreprocessConfig& pcfg, const PretrainConfig& cfg);

struct FinetuneConfig {
  UpdateRegime regime = UpdateRegime::All;
  OptimizerConfig optimizer;
  int epochs = 20;
  std::uint64_t seed = 0;
  bool freeze_bn_stats = false;
};

struct FinetuneLog {
  std::vector<double> epoch_loss;
};

// Episode fine-tuning: every epoch is one full-support-batch step (batch size
// N*K by construction). Only the regime's parameters change; the normalized
// head is re-projected to unit columns after every step. Throws on NaN loss.
// `after_epoch` (optional) runs after each step, e.g. to record validation
// accuracy curves.
FinetuneLog finetune(Model& model, const std::vector<LabeledExample>& support,
                     const FinetuneConfig& cfg, const PreprocessConfig& pcfg,
                     const std::function<void(int epoch)>& after_epoch = {});

struct TuneCurvePoint {
  double lr = 0;
  int trial = 0;
  int epoch = 0;
  double loss = 0;
  double val_accuracy = 0;
};

struct TuneResult {
  double best_lr = 0;
  int best_epochs = 0;  // 0 reproduces the "w/o FT" (dagger) outcome
  double best_mean_accuracy = 0;
  double epoch0_mean_accuracy = 0;
  std::vector<TuneCurvePoint> curves;
};

// Validation-driven selection of (lr, epochs): for each candidate lr, runs
// `trials` validation episodes recording query accuracy after every epoch,
// then picks the (lr, epoch) with the best mean accuracy. Ties prefer the
// smaller lr, then fewer epochs. Never selects a configuration below the
// epoch-0 (no-fine-tune) baseline.
TuneResult tune_hyperparams(const Model& pretrained, const ClassSection& validation_section,
                            const EpisodeSpec& episode_spec,
                            const std::vector<double>& lr_candidates, int max_epochs,
                            int trials, const FinetuneConfig& base_cfg,
                            const PreprocessConfig& pcfg, double svm_c = 1.0);

}  // namespace fsf
