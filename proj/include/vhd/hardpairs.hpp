#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace vhd {

// Watershed indices of a binary label mask plus the index pairs sampled
// around them for the margin rank loss.
struct HardPairSet {
  std::vector<int> watersheds;               // sorted, first index of each new run
  std::vector<std::pair<int, int>> pairs;    // region_size pairs per watershed
  int region_size = 3;
};

// Every i in [1, T) where labels[i] != labels[i-1]. Both 0->1 and 1->0
// transitions count.
std::vector<int> find_watersheds(const std::vector<std::uint8_t>& labels);

// For each watershed c and k in 1..region_size emits (c-k, c+k); an index
// falling outside [0, T) is replaced with c itself.
HardPairSet sample_hard_pairs(const std::vector<std::uint8_t>& labels, int region_size = 3);

}  // namespace vhd
