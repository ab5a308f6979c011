#pragma once

#include <Eigen/Dense>
#include <string>

#include "fsf/layers.hpp"

namespace fsf {

struct BackboneSpec {
  std::string architecture = "reference-convnet";
  int input_resolution = 32;
  int feature_dim = 64;  // filled in by build_backbone
};

// Feature extractor: image batch -> [B, d] embedding matrix. Copyable; a copy
// is an independent model fork.
class Backbone {
 public:
  Backbone() = default;
  Backbone(BackboneSpec spec, Sequential net) : spec_(std::move(spec)), net_(std::move(net)) {}

  const BackboneSpec& spec() const { return spec_; }
  int feature_dim() const { return spec_.feature_dim; }

  // Forward pass to embeddings. Caches activations for backward().
  Eigen::MatrixXd extract_features(const Tensor4& batch, bool train);

  // Backprop d(loss)/d(features) into parameter grads. When
  // need_param_grads is false this is a no-op (nothing below the head
  // trains), keeping frozen-backbone fine-tuning cheap.
  void backward(const Eigen::MatrixXd& dfeatures, bool need_param_grads);

  std::vector<Param*> parameters();
  std::vector<BufferRef> buffers();
  bool has_batch_norm();
  void set_bn_update_running_stats(bool update);

 private:
  BackboneSpec spec_;
  Sequential net_;
  int cached_batch_ = 0;
};

// Known architectures: reference-convnet, resnet-18/34/50/101/152, vgg16-gap.
// Initialization is deterministic in rng_seed.
Backbone build_backbone(const BackboneSpec& spec, std::uint64_t rng_seed);

}  // namespace fsf
