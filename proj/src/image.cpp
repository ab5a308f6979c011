#include "fsf/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace fsf {

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.w) * 3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        float v = std::clamp(img.at(ch, y, x), 0.f, 1.f);
        row[static_cast<std::size_t>(x) * 3 + ch] =
            static_cast<unsigned char>(std::lround(v * 255.f));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6") throw std::runtime_error("unsupported image format (expected P6): " + path.string());
  auto skip_ws_comments = [&in]() {
    while (true) {
      int ch = in.peek();
      if (ch == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(ch)) {
        in.get();
      } else {
        break;
      }
    }
  };
  int w = 0, h = 0, maxval = 0;
  skip_ws_comments();
  in >> w;
  skip_ws_comments();
  in >> h;
  skip_ws_comments();
  in >> maxval;
  in.get();  // single whitespace before raster
  if (w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error("malformed PPM header: " + path.string());
  Image img(h, w);
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("truncated PPM raster: " + path.string());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch)
        img.at(ch, y, x) = raw[(static_cast<std::size_t>(y) * w + x) * 3 + ch] / 255.f;
  return img;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (img.h == out_h && img.w == out_w) return img;
  Image out(out_h, out_w);
  const double sy = static_cast<double>(img.h) / out_h;
  const double sx = static_cast<double>(img.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, img.h - 1);
    int y1c = std::clamp(y0 + 1, 0, img.h - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, img.w - 1);
      int x1c = std::clamp(x0 + 1, 0, img.w - 1);
      for (int ch = 0; ch < 3; ++ch) {
        double top = img.at(ch, y0c, x0c) * (1 - wx) + img.at(ch, y0c, x1c) * wx;
        double bot = img.at(ch, y1c, x0c) * (1 - wx) + img.at(ch, y1c, x1c) * wx;
        out.at(ch, y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Image crop(const Image& img, int y0, int x0, int ch_, int cw) {
  if (y0 < 0 || x0 < 0 || y0 + ch_ > img.h || x0 + cw > img.w)
    throw std::out_of_range("crop outside image bounds");
  Image out(ch_, cw);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < ch_; ++y)
      for (int x = 0; x < cw; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

Image hflip(const Image& img) {
  Image out(img.h, img.w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(c, y, img.w - 1 - x);
  return out;
}

}  // namespace fsf
