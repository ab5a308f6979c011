#include "fsf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fsf {

PreprocessConfig PreprocessConfig::low_resolution() {
  PreprocessConfig c;
  c.train_crop_size = 84;
  c.eval_resize = 96;
  c.eval_crop = 84;
  return c;
}

PreprocessConfig PreprocessConfig::high_resolution() {
  PreprocessConfig c;
  c.train_crop_size = 224;
  c.eval_resize = 256;
  c.eval_crop = 224;
  return c;
}

PreprocessConfig PreprocessConfig::toy(int size) {
  PreprocessConfig c;
  c.train_crop_size = size;
  c.eval_resize = size + size / 8;
  c.eval_crop = size;
  c.min_crop_scale = 0.6;
  return c;
}

void PreprocessConfig::validate() const {
  if (train_crop_size <= 0 || eval_resize <= 0 || eval_crop <= 0)
    throw std::invalid_argument("preprocess sizes must be positive");
  if (eval_crop > eval_resize)
    throw std::invalid_argument("eval_crop must not exceed eval_resize");
  if (flip_probability < 0 || flip_probability > 1)
    throw std::invalid_argument("flip_probability must be in [0,1]");
  for (double s : channel_stds)
    if (s <= 0) throw std::invalid_argument("channel stds must be positive");
}

namespace {

Tensor4 normalize_to_tensor(const Image& img, const PreprocessConfig& cfg) {
  Tensor4 t(1, 3, img.h, img.w);
  for (int ch = 0; ch < 3; ++ch) {
    const double mean = cfg.channel_means[ch];
    const double inv_std = 1.0 / cfg.channel_stds[ch];
    double* dst = t.plane(0, ch);
    const float* src = img.pix.data() + static_cast<std::size_t>(ch) * img.h * img.w;
    for (std::size_t i = 0; i < static_cast<std::size_t>(img.h) * img.w; ++i)
      dst[i] = (src[i] - mean) * inv_std;
  }
  return t;
}

void apply_color_jitter(Image& img, double strength, Rng& rng) {
  std::uniform_real_distribution<double> factor(1.0 - strength, 1.0 + strength);
  const double fb = factor(rng), fc = factor(rng), fs = factor(rng);
  const std::size_t hw = static_cast<std::size_t>(img.h) * img.w;

  // Brightness.
  for (auto& p : img.pix) p = static_cast<float>(std::clamp(p * fb, 0.0, 1.0));

  // Contrast about the mean luminance.
  double lum_mean = 0;
  for (std::size_t i = 0; i < hw; ++i)
    lum_mean += 0.299 * img.pix[i] + 0.587 * img.pix[hw + i] + 0.114 * img.pix[2 * hw + i];
  lum_mean /= static_cast<double>(hw);
  for (auto& p : img.pix)
    p = static_cast<float>(std::clamp(lum_mean + (p - lum_mean) * fc, 0.0, 1.0));

  // Saturation: blend with per-pixel grayscale.
  for (std::size_t i = 0; i < hw; ++i) {
    double gray = 0.299 * img.pix[i] + 0.587 * img.pix[hw + i] + 0.114 * img.pix[2 * hw + i];
    for (int ch = 0; ch < 3; ++ch) {
      double v = gray + (img.pix[ch * hw + i] - gray) * fs;
      img.pix[ch * hw + i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
}

Image random_resized_crop(const Image& img, const PreprocessConfig& cfg, Rng& rng) {
  const int out = cfg.train_crop_size;
  if (cfg.min_crop_scale >= 1.0) return resize_bilinear(img, out, out);

  std::uniform_real_distribution<double> area_dist(cfg.min_crop_scale, 1.0);
  std::uniform_real_distribution<double> log_ratio(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
  const double full_area = static_cast<double>(img.h) * img.w;
  for (int attempt = 0; attempt < 10; ++attempt) {
    double target = area_dist(rng) * full_area;
    double ratio = std::exp(log_ratio(rng));
    int cw = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    int ch = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (cw < 1 || ch < 1 || cw > img.w || ch > img.h) continue;
    std::uniform_int_distribution<int> ydist(0, img.h - ch), xdist(0, img.w - cw);
    Image region = crop(img, ydist(rng), xdist(rng), ch, cw);
    return resize_bilinear(region, out, out);
  }
  // Fallback: center square.
  int side = std::min(img.h, img.w);
  Image region = crop(img, (img.h - side) / 2, (img.w - side) / 2, side, side);
  return resize_bilinear(region, out, out);
}

}  // namespace

Tensor4 preprocess_train(const Image& image, const PreprocessConfig& config, Rng& rng) {
  config.validate();
  if (image.pix.size() != static_cast<std::size_t>(3) * image.h * image.w)
    throw std::invalid_argument("preprocess_train expects a 3-channel image");
  Image out = random_resized_crop(image, config, rng);
  if (config.jitter_strength > 0) apply_color_jitter(out, config.jitter_strength, rng);
  if (config.flip_probability > 0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < config.flip_probability) out = hflip(out);
  }
  return normalize_to_tensor(out, config);
}

Tensor4 preprocess_eval(const Image& image, const PreprocessConfig& config) {
  config.validate();
  if (image.pix.size() != static_cast<std::size_t>(3) * image.h * image.w)
    throw std::invalid_argument("preprocess_eval expects a 3-channel image");
  Image resized = resize_bilinear(image, config.eval_resize, config.eval_resize);
  int off = (config.eval_resize - config.eval_crop) / 2;
  Image cropped = crop(resized, off, off, config.eval_crop, config.eval_crop);
  return normalize_to_tensor(cropped, config);
}

Tensor4 stack_batch(const std::vector<Tensor4>& items) {
  if (items.empty()) throw std::invalid_argument("stack_batch on empty list");
  const Tensor4& first = items.front();
  Tensor4 out(static_cast<int>(items.size()), first.c, first.h, first.w);
  std::size_t stride = first.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].c != first.c || items[i].h != first.h || items[i].w != first.w ||
        items[i].n != 1)
      throw std::invalid_argument("stack_batch shape mismatch");
    std::copy(items[i].v.begin(), items[i].v.end(), out.v.begin() + i * stride);
  }
  return out;
}

}  // namespace fsf
