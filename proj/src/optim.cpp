#include "fsf/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fsf {

void OptimizerConfig::validate() const {
  // lr 0 is allowed: it is the exact no-op point used by sanity checks.
  if (learning_rate < 0) throw std::invalid_argument("learning rate must be >= 0");
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<Param*> params)
    : config_(std::move(config)), params_(std::move(params)) {
  const std::string& n = config_.name;
  if (n == "adam") kind_ = Kind::Adam;
  else if (n == "adamax") kind_ = Kind::Adamax;
  else if (n == "adadelta") kind_ = Kind::Adadelta;
  else if (n == "adagrad") kind_ = Kind::Adagrad;
  else if (n == "rmsprop") kind_ = Kind::RmsProp;
  else if (n == "momentum_sgd") kind_ = Kind::MomentumSgd;
  else if (n == "asgd") kind_ = Kind::Asgd;
  else throw std::invalid_argument("unknown optimizer: " + n);
  config_.validate();
  state1_.reserve(params_.size());
  state2_.reserve(params_.size());
  for (Param* p : params_) {
    state1_.push_back(Eigen::VectorXd::Zero(p->value.size()));
    state2_.push_back(Eigen::VectorXd::Zero(p->value.size()));
  }
}

void Optimizer::step() {
  ++t_;
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Eigen::VectorXd& w = params_[i]->value;
    const Eigen::VectorXd& g = params_[i]->grad;
    Eigen::VectorXd& s1 = state1_[i];
    Eigen::VectorXd& s2 = state2_[i];
    switch (kind_) {
      case Kind::Adam: {
        s1 = config_.beta1 * s1 + (1 - config_.beta1) * g;
        s2 = config_.beta2 * s2 + (1 - config_.beta2) * g.cwiseProduct(g);
        const double bc1 = 1 - std::pow(config_.beta1, t_);
        const double bc2 = 1 - std::pow(config_.beta2, t_);
        w.array() -= lr * (s1.array() / bc1) /
                     ((s2.array() / bc2).sqrt() + config_.eps);
        break;
      }
      case Kind::Adamax: {
        s1 = config_.beta1 * s1 + (1 - config_.beta1) * g;
        s2 = (config_.beta2 * s2).cwiseMax(g.cwiseAbs());
        const double bc1 = 1 - std::pow(config_.beta1, t_);
        w.array() -= (lr / bc1) * s1.array() / (s2.array() + config_.eps);
        break;
      }
      case Kind::Adadelta: {
        s1 = config_.rho * s1 + (1 - config_.rho) * g.cwiseProduct(g);
        Eigen::VectorXd delta =
            ((s2.array() + config_.eps).sqrt() / (s1.array() + config_.eps).sqrt()) *
            g.array();
        s2 = config_.rho * s2 + (1 - config_.rho) * delta.cwiseProduct(delta);
        w -= lr * delta;
        break;
      }
      case Kind::Adagrad: {
        s1 += g.cwiseProduct(g);
        w.array() -= lr * g.array() / (s1.array().sqrt() + config_.eps);
        break;
      }
      case Kind::RmsProp: {
        s1 = config_.alpha * s1 + (1 - config_.alpha) * g.cwiseProduct(g);
        w.array() -= lr * g.array() / (s1.array().sqrt() + config_.eps);
        break;
      }
      case Kind::MomentumSgd: {
        s1 = config_.momentum * s1 + g;
        w -= lr * s1;
        break;
      }
      case Kind::Asgd: {
        w -= lr * g;
        if (t_ > config_.asgd_t0) {
          const double mu = 1.0 / (t_ - config_.asgd_t0);
          s1 += mu * (w - s1);
        } else {
          s1 = w;
        }
        break;
      }
    }
  }
}

Optimizer build_optimizer(const OptimizerConfig& config, std::vector<Param*> trainable) {
  return Optimizer(config, std::move(trainable));
}

bool is_adaptive_optimizer(const std::string& name) {
  return name == "adam" || name == "adamax" || name == "adadelta" || name == "adagrad" ||
         name == "rmsprop";
}

std::vector<std::string> optimizer_names() {
  return {"adam", "adamax", "adadelta", "adagrad", "rmsprop", "momentum_sgd", "asgd"};
}

}  // namespace fsf
