#include "fsf/episode.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "fsf/rng.hpp"

namespace fsf {

Episode sample_episode(const ClassSection& section, const EpisodeSpec& spec) {
  if (spec.n_way < 2 || spec.k_shot < 1 || spec.q_query < 1)
    throw std::invalid_argument("episode spec requires n_way>=2, k_shot>=1, q_query>=1");
  if (static_cast<int>(section.size()) < spec.n_way)
    throw std::runtime_error("insufficient classes: need " + std::to_string(spec.n_way) +
                             ", section has " + std::to_string(section.size()));

  std::vector<const std::pair<const std::string, std::vector<Image>>*> entries;
  entries.reserve(section.size());
  for (const auto& kv : section) entries.push_back(&kv);

  Rng rng(spec.seed);
  std::vector<int> class_idx(entries.size());
  std::iota(class_idx.begin(), class_idx.end(), 0);
  std::shuffle(class_idx.begin(), class_idx.end(), rng);

  Episode ep;
  const int need = spec.k_shot + spec.q_query;
  for (int li = 0; li < spec.n_way; ++li) {
    const auto* entry = entries[class_idx[li]];
    const auto& imgs = entry->second;
    if (static_cast<int>(imgs.size()) < need)
      throw std::runtime_error("insufficient examples in class '" + entry->first + "': need " +
                               std::to_string(need) + ", have " + std::to_string(imgs.size()));
    std::vector<int> ex(imgs.size());
    std::iota(ex.begin(), ex.end(), 0);
    std::shuffle(ex.begin(), ex.end(), rng);
    ep.classes.push_back(entry->first);
    for (int j = 0; j < spec.k_shot; ++j) ep.support.push_back({&imgs[ex[j]], li});
    for (int j = 0; j < spec.q_query; ++j)
      ep.query.push_back({&imgs[ex[spec.k_shot + j]], li});
  }
  return ep;
}

}  // namespace fsf
