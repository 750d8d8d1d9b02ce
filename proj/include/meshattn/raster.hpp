#pragma once

#include <limits>
#include <vector>

#include "meshattn/camera.hpp"
#include "meshattn/mesh.hpp"

namespace meshattn {

/// Camera-space depth per pixel; +inf where no surface covers the pixel
/// centre.
struct DepthBuffer {
  int height = 0;
  int width = 0;
  std::vector<double> depth;
  std::vector<Index> face;  // nearest face per pixel, -1 for background

  double at(int row, int col) const {
    return depth[static_cast<std::size_t>(row) * width + col];
  }
  Index face_at(int row, int col) const {
    return face[static_cast<std::size_t>(row) * width + col];
  }
  bool foreground(int row, int col) const {
    return at(row, col) < std::numeric_limits<double>::infinity();
  }
};

/// Z-buffer rasterisation of every face, sampled at pixel centres with
/// perspective-correct depth. Faces are clipped against a near plane at
/// 1e-6 * pose.distance; no back-face culling.
DepthBuffer rasterize_depth(const Mesh& mesh, const CameraPose& pose);

}  // namespace meshattn
