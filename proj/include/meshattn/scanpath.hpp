#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "meshattn/common.hpp"

namespace meshattn {

struct Fixation {
  Index vertex = 0;
  Vec3 position = Vec3::Zero();
  double duration = 1.0;  // seconds
};

struct Scanpath {
  std::string mesh;  // path of the mesh the indices refer to
  std::vector<Fixation> fixations;

  Index size() const { return static_cast<Index>(fixations.size()); }
};

struct MultiMatchScore {
  double shape = 0.0;
  double direction = 0.0;
  double length = 0.0;
  double position = 0.0;
  double duration = 0.0;

  double mean() const {
    return (shape + direction + length + position + duration) / 5.0;
  }
};

/// Five-dimension scanpath similarity adapted to 3D surfaces.
///
/// Saccades are 3D vectors between consecutive fixations. The two saccade
/// sequences are aligned by a minimum-cost monotone path through their
/// pairwise vector-difference matrix (steps right, down or diagonal, both
/// ends anchored). Dissimilarities are normalised by the mesh bounding-box
/// diagonal `diag`; each score is one minus the mean dissimilarity over the
/// aligned pairs, clipped to [0, 1].
MultiMatchScore multimatch(const Scanpath& a, const Scanpath& b, double diag);

/// JSON: {"mesh": ..., "fixations": [{"v": .., "p": [x,y,z], "d": ..}]}
std::string scanpath_to_json(const Scanpath& path);
Scanpath scanpath_from_json(const std::string& text);
void save_scanpath(const Scanpath& path, const std::filesystem::path& file);
Scanpath load_scanpath(const std::filesystem::path& file);

}  // namespace meshattn
