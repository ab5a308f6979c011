#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsf/dataset.hpp"

namespace fsf {

struct EpisodeSpec {
  int n_way = 5;
  int k_shot = 5;
  int q_query = 15;
  std::uint64_t seed = 0;
};

struct LabeledExample {
  const Image* image = nullptr;
  int label = 0;  // index into Episode::classes
};

struct Episode {
  std::vector<std::string> classes;      // length N
  std::vector<LabeledExample> support;   // length N*K
  std::vector<LabeledExample> query;     // length N*Q
};

// Deterministic in (section contents, spec.seed). Support and query are
// disjoint within each class. Returned examples point into `section`, which
// must outlive the episode.
Episode sample_episode(const ClassSection& section, const EpisodeSpec& spec);

}  // namespace fsf
