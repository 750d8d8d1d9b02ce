#include "meshattn/spatial_index.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace meshattn {

namespace {

constexpr Index kLeafSize = 12;

struct Candidate {
  double d2;
  Index index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

}  // namespace

SpatialIndex::SpatialIndex(Points3d points) : points_(std::move(points)) {
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), Index{0});
  if (!order_.empty()) {
    nodes_.reserve(2 * order_.size() / kLeafSize + 2);
    build(0, static_cast<Index>(order_.size()));
  }
}

Index SpatialIndex::build(Index begin, Index end) {
  const Index id = static_cast<Index>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-1e300);
  for (Index i = begin; i < end; ++i) {
    const Eigen::Vector3d p = points_.row(order_[i]).transpose();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

  const Index mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](Index a, Index b) {
                     return points_(a, axis) < points_(b, axis);
                   });
  const double split = points_(order_[mid], axis);
  const Index left = build(begin, mid);
  const Index right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

std::vector<Neighbor> SpatialIndex::knn(const Vec3& query, Index k) const {
  std::vector<Neighbor> out;
  if (nodes_.empty() || k <= 0) return out;
  k = std::min(k, size());

  std::priority_queue<Candidate> heap;  // max-heap on (d2, index)
  auto visit = [&](auto&& self, Index node_id) -> void {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index p = order_[static_cast<std::size_t>(i)];
        const Candidate c{(points_.row(p).transpose() - query).squaredNorm(),
                          p};
        if (static_cast<Index>(heap.size()) < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = query[node.axis] - node.split;
    const Index near = diff < 0.0 ? node.left : node.right;
    const Index far = diff < 0.0 ? node.right : node.left;
    self(self, near);
    // Equal plane distance must still be visited for index tie-breaking.
    if (static_cast<Index>(heap.size()) < k || diff * diff <= heap.top().d2)
      self(self, far);
  };
  visit(visit, 0);

  out.resize(heap.size());
  for (auto it = out.rbegin(); it != out.rend(); ++it) {
    *it = Neighbor{heap.top().index, std::sqrt(heap.top().d2)};
    heap.pop();
  }
  return out;
}

std::vector<Neighbor> SpatialIndex::radius_search(const Vec3& center,
                                                  double radius,
                                                  Index cap) const {
  std::vector<Candidate> found;
  if (nodes_.empty() || cap <= 0 || radius < 0.0) return {};
  const double r2 = radius * radius;
  auto visit = [&](auto&& self, Index node_id) -> void {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index p = order_[static_cast<std::size_t>(i)];
        const double d2 = (points_.row(p).transpose() - center).squaredNorm();
        if (d2 <= r2) found.push_back(Candidate{d2, p});
      }
      return;
    }
    const double diff = center[node.axis] - node.split;
    if (diff <= radius) self(self, node.left);
    if (diff >= -radius) self(self, node.right);
  };
  visit(visit, 0);

  const std::size_t keep =
      std::min(found.size(), static_cast<std::size_t>(cap));
  std::partial_sort(found.begin(), found.begin() + keep, found.end());
  std::vector<Neighbor> out(keep);
  for (std::size_t i = 0; i < keep; ++i)
    out[i] = Neighbor{found[i].index, std::sqrt(found[i].d2)};
  return out;
}

std::vector<Index> ball_query(const SpatialIndex& index, const Vec3& center,
                              double radius, Index cap) {
  std::vector<Index> out;
  for (const Neighbor& n : index.radius_search(center, radius, cap))
    out.push_back(n.index);
  return out;
}

}  // namespace meshattn
