#pragma once

#include <cstdint>
#include <vector>

#include "meshattn/common.hpp"

namespace meshattn {

/// Per-vertex descriptors with the number of views that contributed to
/// each row.
struct FeatureField {
  MatrixXf data;                     // n x dim, row-major
  std::vector<std::uint16_t> coverage;

  FeatureField() = default;
  FeatureField(Index n, Index dim)
      : data(MatrixXf::Zero(n, dim)),
        coverage(static_cast<std::size_t>(n), 0) {}

  Index n() const { return data.rows(); }
  Index dim() const { return data.cols(); }
};

}  // namespace meshattn
