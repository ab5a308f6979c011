#include "fsf/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fsf/rng.hpp"

namespace fsf {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

SplitManifest load_split_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest not found: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty manifest: " + path.string());
  if (trim(line) != "class,split,path")
    throw std::runtime_error("manifest header must be 'class,split,path', got: " + trim(line));

  SplitManifest m;
  std::map<std::string, std::string> class_split;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string cls, split, ref;
    if (!std::getline(ss, cls, ',') || !std::getline(ss, split, ',') || !std::getline(ss, ref))
      throw std::runtime_error("malformed manifest row at line " + std::to_string(lineno));
    cls = trim(cls);
    split = trim(split);
    ref = trim(ref);
    if (cls.empty() || ref.empty())
      throw std::runtime_error("malformed manifest row at line " + std::to_string(lineno));
    if (split != "base" && split != "val" && split != "novel")
      throw std::runtime_error("unknown split '" + split + "' at line " + std::to_string(lineno));
    auto it = class_split.find(cls);
    if (it == class_split.end()) {
      class_split.emplace(cls, split);
      if (split == "base") m.base_classes.push_back(cls);
      else if (split == "val") m.validation_classes.push_back(cls);
      else m.novel_classes.push_back(cls);
    } else if (it->second != split) {
      throw std::runtime_error("overlapping splits: class '" + cls + "' appears in " +
                               it->second + " and " + split);
    }
    m.records[cls].push_back(ref);
  }
  for (const auto& [cls, refs] : m.records)
    if (refs.empty()) throw std::runtime_error("class '" + cls + "' has no examples");
  if (m.records.empty()) throw std::runtime_error("manifest has no data rows: " + path.string());
  return m;
}

ClassSection load_section(const SplitManifest& manifest, Split split,
                          const std::filesystem::path& root) {
  const std::vector<std::string>* classes = nullptr;
  switch (split) {
    case Split::Base: classes = &manifest.base_classes; break;
    case Split::Val: classes = &manifest.validation_classes; break;
    case Split::Novel: classes = &manifest.novel_classes; break;
  }
  ClassSection section;
  for (const auto& cls : *classes) {
    auto& imgs = section[cls];
    for (const auto& ref : manifest.records.at(cls)) {
      std::filesystem::path p(ref);
      if (p.is_relative()) p = root / p;
      imgs.push_back(read_ppm(p));
    }
  }
  return section;
}

namespace {

void hsv_to_rgb(double hue, double sat, double val, double rgb[3]) {
  hue = hue - std::floor(hue);
  double h6 = hue * 6.0;
  int i = static_cast<int>(h6) % 6;
  double f = h6 - std::floor(h6);
  double p = val * (1 - sat);
  double q = val * (1 - sat * f);
  double t = val * (1 - sat * (1 - f));
  switch (i) {
    case 0: rgb[0] = val; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = val; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = val; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = val; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = val; break;
    default: rgb[0] = val; rgb[1] = p; rgb[2] = q; break;
  }
}

// Signed distance to the class shape in unit coordinates (negative inside).
double shape_sdf(int shape, double x, double y) {
  double r = std::hypot(x, y);
  switch (shape % 8) {
    case 0:  // disk
      return r - 1.0;
    case 1:  // square
      return std::max(std::abs(x), std::abs(y)) - 1.0;
    case 2: {  // triangle (equilateral, pointing up)
      double d = std::max(std::abs(x) * 0.866 + y * 0.5, -y) - 0.5;
      return d * 1.6;
    }
    case 3:  // ring
      return std::abs(r - 0.75) - 0.25;
    case 4: {  // cross
      double dx = std::max(std::abs(x) - 1.0, std::abs(y) - 0.35);
      double dy = std::max(std::abs(y) - 1.0, std::abs(x) - 0.35);
      return std::min(dx, dy);
    }
    case 5:  // diamond
      return (std::abs(x) + std::abs(y)) - 1.0;
    case 6: {  // two horizontal bars
      double yy = std::abs(std::abs(y) - 0.55);
      return std::max(std::abs(x) - 1.0, yy - 0.28);
    }
    default: {  // four-dot cluster
      double dx = std::abs(x) - 0.55, dy = std::abs(y) - 0.55;
      return std::hypot(dx, dy) - 0.42;
    }
  }
}

Image render_example(const SyntheticConfig& cfg, int class_idx, int example_idx) {
  Rng rng(derive_seed(cfg.seed, (static_cast<std::uint64_t>(class_idx) << 24) + example_idx));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int size = cfg.image_size;
  const double t = cfg.domain;

  Image img(size, size);

  // Background: domain 0 is a dim smooth gradient, domain 1 is bright with
  // strong per-pixel noise and a cool color cast.
  double bg_level = 0.18 + 0.55 * t;
  double noise_amp = 0.02 + 0.30 * t;
  double grad_angle = uni(rng) * 2 * M_PI;
  double grad_amp = 0.10 * (1.0 - t) + 0.03;
  double cast[3] = {1.0 - 0.35 * t, 1.0 - 0.10 * t, 1.0 + 0.0 * t};
  std::uniform_real_distribution<double> noise(-noise_amp, noise_amp);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double u = (x + 0.5) / size - 0.5, v = (y + 0.5) / size - 0.5;
      double g = bg_level + grad_amp * (u * std::cos(grad_angle) + v * std::sin(grad_angle));
      for (int ch = 0; ch < 3; ++ch) {
        double val = g * cast[ch] + noise(rng);
        img.at(ch, y, x) = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }

  // Class identity: shape family plus hue; instance pose jittered. The
  // domain knob washes out the hue cue: at t=0 hue is fully determined by
  // the class (an easy color shortcut), at t=1 it is uniform per example,
  // so only the shape itself remains class-informative.
  double hue = std::fmod(0.61803398875 * class_idx + t * uni(rng), 1.0);
  double shade = std::clamp(0.85 - 0.25 * t + cfg.shade_jitter * (uni(rng) * 2 - 1), 0.1, 1.0);
  double rgb[3];
  hsv_to_rgb(hue, 0.85, shade, rgb);

  double cx = 0.5 + cfg.position_jitter * (uni(rng) * 2 - 1);
  double cy = 0.5 + cfg.position_jitter * (uni(rng) * 2 - 1);
  double scale = (0.28 + 0.04 * ((class_idx / 8) % 3)) * (1.0 + cfg.scale_jitter * (uni(rng) * 2 - 1));
  double angle = uni(rng) * 2 * M_PI;
  double ca = std::cos(angle), sa = std::sin(angle);
  const double edge = 1.5 / size / scale;  // anti-alias width in shape units

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double u = ((x + 0.5) / size - cx) / scale;
      double v = ((y + 0.5) / size - cy) / scale;
      double rx = ca * u + sa * v, ry = -sa * u + ca * v;
      double d = shape_sdf(class_idx, rx, ry);
      double cover = std::clamp(0.5 - d / edge, 0.0, 1.0);
      if (cover <= 0) continue;
      for (int ch = 0; ch < 3; ++ch) {
        double val = (1 - cover) * img.at(ch, y, x) + cover * rgb[ch];
        img.at(ch, y, x) = static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }
  return img;
}

}  // namespace

ClassSection make_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.n_classes <= 0 || cfg.examples_per_class <= 0 || cfg.image_size <= 0)
    throw std::invalid_argument("synthetic dataset counts must be positive");
  ClassSection section;
  for (int ci = 0; ci < cfg.n_classes; ++ci) {
    int global_idx = cfg.class_id_offset + ci;
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%03d", global_idx);
    auto& imgs = section[name];
    imgs.reserve(cfg.examples_per_class);
    for (int ei = 0; ei < cfg.examples_per_class; ++ei)
      imgs.push_back(render_example(cfg, global_idx, ei));
  }
  return section;
}

void write_synthetic_section(const ClassSection& section, Split split,
                             const std::filesystem::path& dir,
                             const std::filesystem::path& manifest_csv) {
  std::filesystem::create_directories(dir);
  bool fresh = !std::filesystem::exists(manifest_csv);
  std::ofstream mf(manifest_csv, std::ios::app);
  if (!mf) throw std::runtime_error("cannot open manifest for writing: " + manifest_csv.string());
  if (fresh) mf << "class,split,path\n";
  const char* split_name = split == Split::Base ? "base" : split == Split::Val ? "val" : "novel";
  for (const auto& [cls, imgs] : section) {
    std::filesystem::create_directories(dir / cls);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      char fname[32];
      std::snprintf(fname, sizeof(fname), "%04zu.ppm", i);
      auto rel = std::filesystem::path(dir.filename()) / cls / fname;
      write_ppm(dir / cls / fname, imgs[i]);
      mf << cls << "," << split_name << "," << rel.generic_string() << "\n";
    }
  }
}

std::array<double, 3> section_channel_means(const ClassSection& section) {
  std::array<double, 3> sum{0, 0, 0};
  std::size_t count = 0;
  for (const auto& [cls, imgs] : section) {
    for (const auto& img : imgs) {
      std::size_t hw = static_cast<std::size_t>(img.h) * img.w;
      for (int ch = 0; ch < 3; ++ch) {
        const float* p = img.pix.data() + ch * hw;
        double s = 0;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
        sum[ch] += s;
      }
      count += hw;
    }
  }
  if (count == 0) return {0, 0, 0};
  for (auto& s : sum) s /= static_cast<double>(count);
  return sum;
}

}  // namespace fsf
