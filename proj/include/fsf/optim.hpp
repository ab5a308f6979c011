#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "fsf/layers.hpp"

namespace fsf {

// The seven optimizers of the comparison suite. Auxiliary hyperparameters
// default to the canonical values; every field can be overridden in config.
struct OptimizerConfig {
  std::string name = "adam";  // adam adamax adadelta adagrad rmsprop momentum_sgd asgd
  double learning_rate = 0.001;
  double momentum = 0.9;      // momentum_sgd
  double beta1 = 0.9;         // adam, adamax
  double beta2 = 0.999;       // adam, adamax
  double rho = 0.9;           // adadelta
  double alpha = 0.99;        // rmsprop
  double eps = 1e-8;
  // ASGD averaging start; at desk-scale step counts this never triggers, so
  // ASGD behaves as plain SGD (the non-adaptive baseline it is meant to be).
  double asgd_t0 = 1e6;

  void validate() const;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config, std::vector<Param*> params);

  // Applies one update from the accumulated grads. Does not zero them.
  void step();

  const std::vector<Param*>& params() const { return params_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  enum class Kind { Adam, Adamax, Adadelta, Adagrad, RmsProp, MomentumSgd, Asgd };
  Kind kind_;
  OptimizerConfig config_;
  std::vector<Param*> params_;
  std::vector<Eigen::VectorXd> state1_, state2_;  // per-param moment buffers
  long t_ = 0;
};

// Errors on unknown optimizer names.
Optimizer build_optimizer(const OptimizerConfig& config, std::vector<Param*> trainable);

bool is_adaptive_optimizer(const std::string& name);
std::vector<std::string> optimizer_names();

}  // namespace fsf
