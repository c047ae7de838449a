#pragma once

#include <stdexcept>
#include <vector>

namespace loewner {

// Nested partition levels of a sampled path on m uniform steps.
// Level k has cells of stride_k grid steps, strides halving per level, so
// pi_1 (coarsest) is a subset of pi_2 and so on. Every partition point is a
// grid index; the finest stride stays >= 4 so that within-cell variation of
// the sampled path is resolved by the grid.
struct PartitionSequence {
  int path_steps = 0;
  std::vector<int> strides;  // coarse -> fine, each dividing path_steps

  int levels() const { return static_cast<int>(strides.size()); }
  int finest_stride() const { return strides.back(); }

  static PartitionSequence dyadic(int path_steps, int levels = 0) {
    if (path_steps < 8) throw std::invalid_argument("PartitionSequence: need at least 8 steps");
    int max_levels = 0;
    while ((path_steps % (1 << (max_levels + 1))) == 0 &&
           (path_steps >> (max_levels + 1)) >= 4)
      ++max_levels;
    if (max_levels < 1)
      throw std::invalid_argument("PartitionSequence: step count admits no dyadic levels");
    if (levels <= 0 || levels > max_levels) levels = max_levels;
    PartitionSequence p;
    p.path_steps = path_steps;
    p.strides.reserve(static_cast<std::size_t>(levels));
    for (int k = 1; k <= levels; ++k) p.strides.push_back(path_steps >> k);
    return p;
  }

  // Partition over the same strides, truncated to the first `steps` grid steps.
  PartitionSequence truncated(int steps) const {
    PartitionSequence p;
    p.path_steps = steps;
    for (int s : strides)
      if (s <= steps / 2 && steps % s == 0) p.strides.push_back(s);
    if (p.strides.empty())
      throw std::invalid_argument("PartitionSequence: no level survives truncation");
    return p;
  }

  void validate() const {
    if (strides.empty()) throw std::invalid_argument("PartitionSequence: empty");
    int prev = 2 * strides.front();
    for (int s : strides) {
      if (s < 1 || path_steps % s != 0 || prev % s != 0 || s >= prev)
        throw std::invalid_argument("PartitionSequence: levels are not nested");
      prev = s;
    }
  }
};

}  // namespace loewner
