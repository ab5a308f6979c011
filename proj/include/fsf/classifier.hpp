#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "fsf/layers.hpp"

namespace fsf {

// Unit-normalizes v. Throws on near-zero norm (eps 1e-12) instead of
// dividing silently.
Eigen::VectorXd normalize_vector(const Eigen::VectorXd& v);

// Weight imprinting: per class, normalize each feature, average, renormalize
// the mean. Returns columns in the iteration order of `features_per_class`.
struct ImprintResult {
  std::vector<std::string> class_ids;
  Eigen::MatrixXd columns;  // d x C, unit columns
};
ImprintResult imprint_weights(
    const std::map<std::string, std::vector<Eigen::VectorXd>>& features_per_class);

// Cosine head: logits = s * W^T zhat, unit-norm columns, no bias.
class NormalizedClassifier {
 public:
  NormalizedClassifier() = default;
  NormalizedClassifier(int feature_dim, std::vector<std::string> class_ids, Rng& rng,
                       double initial_scale = 10.0);
  // Head with imprinted columns and an explicitly chosen scale.
  NormalizedClassifier(const ImprintResult& imprint, double scale);

  int feature_dim() const { return d_; }
  int num_classes() const { return static_cast<int>(class_ids_.size()); }
  const std::vector<std::string>& class_ids() const { return class_ids_; }
  double scale() const { return scale_.value[0]; }

  Eigen::Map<const Eigen::MatrixXd> weight() const {
    return {weight_.value.data(), d_, num_classes()};
  }

  // z: B x d raw (pre-normalization) features. Caches for backward.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& z);
  // Returns d(loss)/dz; accumulates weight/scale grads.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dlogits);

  // Projects every column back to unit norm; called after optimizer steps.
  void renormalize_columns();

  std::vector<Param*> parameters();
  bool scale_trainable = true;

 private:
  int d_ = 0;
  std::vector<std::string> class_ids_;
  Param weight_;  // d x C column-major
  Param scale_;   // 1
  Eigen::MatrixXd zhat_;         // cached B x d
  Eigen::VectorXd znorm_;        // cached B
  Eigen::MatrixXd cos_logits_;   // cached B x C (pre-scale)
};

// Plain FC head: logits = W^T z + b.
class SimpleClassifier {
 public:
  SimpleClassifier() = default;
  SimpleClassifier(int feature_dim, std::vector<std::string> class_ids, Rng& rng);
  SimpleClassifier(Eigen::MatrixXd weight, Eigen::VectorXd bias,
                   std::vector<std::string> class_ids);

  int feature_dim() const { return d_; }
  int num_classes() const { return static_cast<int>(class_ids_.size()); }
  const std::vector<std::string>& class_ids() const { return class_ids_; }

  Eigen::Map<const Eigen::MatrixXd> weight() const {
    return {weight_.value.data(), d_, num_classes()};
  }
  Eigen::Map<const Eigen::VectorXd> bias() const {
    return {bias_.value.data(), num_classes()};
  }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& z);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dlogits);

  std::vector<Param*> parameters();

 private:
  int d_ = 0;
  std::vector<std::string> class_ids_;
  Param weight_, bias_;
  Eigen::MatrixXd z_;  // cached
};

// One-vs-rest linear SVM with squared hinge loss, used to initialize the
// simple head from support features. Deterministic (zero init, fixed
// tolerance/iteration budget).
struct SvmInitResult {
  Eigen::MatrixXd weight;  // d x C
  Eigen::VectorXd bias;    // C
};
SvmInitResult init_simple_svm(const Eigen::MatrixXd& features,
                              const std::vector<int>& labels, int num_classes,
                              double regularization_c = 1.0,
                              double grad_tol = 1e-6, int max_iters = 20000);

// Argmax with ties broken toward the lowest class index.
int predict(const Eigen::VectorXd& logits);

}  // namespace fsf
