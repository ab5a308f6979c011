#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fsf {

// RGB image, CHW layout, float values in [0,1].
struct Image {
  int h = 0, w = 0;
  std::vector<float> pix;  // size 3*h*w

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), pix(static_cast<std::size_t>(3) * h_ * w_, 0.f) {}

  float& at(int ch, int y, int x) {
    return pix[(static_cast<std::size_t>(ch) * h + y) * w + x];
  }
  float at(int ch, int y, int x) const {
    return pix[(static_cast<std::size_t>(ch) * h + y) * w + x];
  }
};

// Binary PPM (P6, 8-bit). Lossless for the quantized representation we store.
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

// Bilinear resample to (out_h, out_w). Returns the input untouched when the
// size already matches.
Image resize_bilinear(const Image& img, int out_h, int out_w);

Image crop(const Image& img, int y0, int x0, int ch, int cw);
Image hflip(const Image& img);

}  // namespace fsf
