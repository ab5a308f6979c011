#pragma once

#include <array>

#include "fsf/image.hpp"
#include "fsf/rng.hpp"
#include "fsf/tensor.hpp"

namespace fsf {

struct PreprocessConfig {
  int train_crop_size = 84;
  int eval_resize = 96;
  int eval_crop = 84;
  std::array<double, 3> channel_means = {0.485, 0.456, 0.406};
  std::array<double, 3> channel_stds = {0.229, 0.224, 0.225};
  double jitter_strength = 0.4;
  double flip_probability = 0.5;
  // Lower bound of the area fraction for random-resized cropping.
  double min_crop_scale = 0.5;

  static PreprocessConfig low_resolution();   // crop 84, eval 96 -> 84
  static PreprocessConfig high_resolution();  // crop 224, eval 256 -> 224
  static PreprocessConfig toy(int size = 32); // synthetic desk preset

  void validate() const;
};

// Training-time pipeline: random-resized crop, color jitter, random
// horizontal flip, channel normalization. Output shape (1, 3, crop, crop).
Tensor4 preprocess_train(const Image& image, const PreprocessConfig& config, Rng& rng);

// Evaluation pipeline: resize, center crop, normalize. Deterministic.
Tensor4 preprocess_eval(const Image& image, const PreprocessConfig& config);

// Stacks per-image tensors into one batch; all must share C/H/W.
Tensor4 stack_batch(const std::vector<Tensor4>& items);

}  // namespace fsf
