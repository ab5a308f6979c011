#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsf/image.hpp"

namespace fsf {

// One split's worth of loaded data: class id -> examples. std::map keeps
// class order deterministic.
using ClassSection = std::map<std::string, std::vector<Image>>;

enum class Split { Base, Val, Novel };

struct SplitManifest {
  std::vector<std::string> base_classes;
  std::vector<std::string> validation_classes;
  std::vector<std::string> novel_classes;
  std::map<std::string, std::vector<std::string>> records;  // class -> example refs
};

// Parses a `class,split,path` CSV and validates disjointness / non-emptiness.
SplitManifest load_split_manifest(const std::filesystem::path& path);

// Loads the images behind one split of a manifest. Relative refs are resolved
// against `root`.
ClassSection load_section(const SplitManifest& manifest, Split split,
                          const std::filesystem::path& root);

struct SyntheticConfig {
  int n_classes = 10;
  int examples_per_class = 50;
  int image_size = 32;
  // Within-class variation of shape placement/scale/rotation and shade.
  double position_jitter = 0.22;
  double scale_jitter = 0.25;
  double shade_jitter = 0.15;
  // Domain knob. 0 = dark smooth-gradient backgrounds, 1 = bright noisy
  // backgrounds with shifted shape shading. Anything in between interpolates
  // the background statistics.
  double domain = 0.0;
  std::uint64_t seed = 0;
  // First class id index; lets disjoint sections share one generator family.
  int class_id_offset = 0;
};

// Parametric families of colored geometric shapes on textured backgrounds.
// Deterministic given the config. Class ids are "synth_<index>".
ClassSection make_synthetic_dataset(const SyntheticConfig& cfg);

// Writes a generated section to `dir` as PPM files and appends rows to a
// `class,split,path` manifest CSV (created with header if absent).
void write_synthetic_section(const ClassSection& section, Split split,
                             const std::filesystem::path& dir,
                             const std::filesystem::path& manifest_csv);

// Per-channel mean over every pixel of every image in the section.
std::array<double, 3> section_channel_means(const ClassSection& section);

}  // namespace fsf
