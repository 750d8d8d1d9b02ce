#pragma once

#include <vector>

#include "meshattn/common.hpp"

namespace meshattn {

struct Neighbor {
  Index index;
  double distance;
};

/// Static kd-tree over a 3D point set.
///
/// Results are ordered by (distance, index), so equidistant points resolve
/// to the smaller index and every query matches a brute-force scan.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  explicit SpatialIndex(Points3d points);

  Index size() const { return static_cast<Index>(points_.rows()); }
  const Points3d& points() const { return points_; }

  /// The min(k, size()) nearest points.
  std::vector<Neighbor> knn(const Vec3& query, Index k) const;

  /// Up to `cap` points with distance <= radius, nearest first.
  std::vector<Neighbor> radius_search(const Vec3& center, double radius,
                                      Index cap) const;

 private:
  struct Node {
    Index begin, end;       // range in order_
    Index left = -1, right = -1;
    int axis = -1;          // -1 for leaves
    double split = 0.0;
  };

  Index build(Index begin, Index end);

  Points3d points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

/// Convenience wrappers with the names used throughout the pipeline.
inline std::vector<Neighbor> knn(const SpatialIndex& index, const Vec3& query,
                                 Index k) {
  return index.knn(query, k);
}

/// Ball query: indices within `radius`, nearest first, at most `cap`.
std::vector<Index> ball_query(const SpatialIndex& index, const Vec3& center,
                              double radius, Index cap);

}  // namespace meshattn
