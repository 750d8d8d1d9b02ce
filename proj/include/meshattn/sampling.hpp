#pragma once

#include <cstdint>
#include <vector>

#include "meshattn/common.hpp"
#include "meshattn/mesh.hpp"

namespace meshattn {

struct SampleSet {
  std::vector<Index> indices;
  Points3d positions;
  Points3d normals;
  std::uint64_t seed = 0;

  Index size() const { return static_cast<Index>(indices.size()); }
};

/// `m` distinct vertices drawn uniformly without replacement.
SampleSet uniform_sample(const Mesh& mesh, Index m, std::uint64_t seed);

}  // namespace meshattn
