#include "vhd/hardpairs.hpp"

#include "vhd/errors.hpp"

namespace vhd {

std::vector<int> find_watersheds(const std::vector<std::uint8_t>& labels) {
  if (labels.empty()) throw ContractError("find_watersheds: empty label mask");
  std::vector<int> sheds;
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] != labels[i - 1]) sheds.push_back(static_cast<int>(i));
  }
  return sheds;
}

HardPairSet sample_hard_pairs(const std::vector<std::uint8_t>& labels, int region_size) {
  if (region_size < 1) throw ContractError("sample_hard_pairs: region_size must be >= 1");
  const int t = static_cast<int>(labels.size());
  HardPairSet set;
  set.region_size = region_size;
  set.watersheds = find_watersheds(labels);
  const auto clamp_to_shed = [t](int idx, int shed) {
    return (idx < 0 || idx >= t) ? shed : idx;
  };
  for (int c : set.watersheds) {
    for (int k = 1; k <= region_size; ++k) {
      set.pairs.emplace_back(clamp_to_shed(c - k, c), clamp_to_shed(c + k, c));
    }
  }
  return set;
}

}  // namespace vhd
