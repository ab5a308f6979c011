#pragma once

#include <filesystem>
#include <optional>

#include "fsf/backbone.hpp"
#include "fsf/classifier.hpp"
#include "fsf/episode.hpp"
#include "fsf/preprocess.hpp"

namespace fsf {

enum class HeadKind { Normalized, Simple };

HeadKind head_kind_from_string(const std::string& s);
const char* head_kind_to_string(HeadKind k);

// Full model: feature extractor plus one classification head. Value
// semantics; copying forks an independent model.
class Model {
 public:
  Model() = default;
  Model(Backbone backbone, NormalizedClassifier head)
      : backbone_(std::move(backbone)), kind_(HeadKind::Normalized),
        normalized_(std::move(head)) {}
  Model(Backbone backbone, SimpleClassifier head)
      : backbone_(std::move(backbone)), kind_(HeadKind::Simple), simple_(std::move(head)) {}

  Backbone& backbone() { return backbone_; }
  const Backbone& backbone() const { return backbone_; }
  HeadKind head_kind() const { return kind_; }
  NormalizedClassifier& normalized_head();
  SimpleClassifier& simple_head();
  int num_classes() const;
  const std::vector<std::string>& class_ids() const;

  Eigen::MatrixXd forward_logits(const Tensor4& batch, bool train);
  void backward(const Eigen::MatrixXd& dlogits, bool need_backbone_grads);

  // Backbone params plus head params (head params carry the classifier tag).
  std::vector<Param*> parameters();
  void zero_grads();

  // After an optimizer step: restores unit-norm columns on the normalized head.
  void project_head();

  void save_checkpoint(const std::filesystem::path& path,
                       const std::string& config_echo = "") const;
  static Model load_checkpoint(const std::filesystem::path& path);

 private:
  Backbone backbone_;
  HeadKind kind_ = HeadKind::Normalized;
  NormalizedClassifier normalized_;
  SimpleClassifier simple_;
};

// Builds a freshly initialized model for the given class list.
Model build_model(const BackboneSpec& spec, HeadKind kind,
                  std::vector<std::string> class_ids, std::uint64_t seed,
                  double initial_scale = 10.0, bool scale_trainable = true);

// Discards the old head and installs a fresh C=N head for the episode's
// classes: imprinted columns (normalized head, scale carried over) or
// SVM-initialized weights (simple head). Support features are computed with
// eval-mode preprocessing and inference.
void reset_head_for_novel(Model& model, const Episode& episode,
                          const PreprocessConfig& pcfg, double svm_c = 1.0);

struct LossResult {
  double loss = 0;
  Eigen::MatrixXd dlogits;
  int correct = 0;
};

// Mean softmax cross-entropy over the batch; dlogits is d(mean loss)/dlogits.
LossResult softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

}  // namespace fsf
