#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "meshattn/common.hpp"
#include "meshattn/spatial_index.hpp"

namespace meshattn {

enum class MeshFormat { Off, Obj, PlyAscii };

/// Triangulated surface with derived per-vertex data. Immutable once built;
/// share freely across threads.
class Mesh {
 public:
  /// Validates faces, then computes normals (area-weighted), 1-ring
  /// adjacency, the bounding-box diagonal and a spatial index.
  static Mesh build(Points3d vertices, Faces faces);

  Index num_vertices() const { return static_cast<Index>(vertices_.rows()); }
  Index num_faces() const { return static_cast<Index>(faces_.rows()); }

  const Points3d& vertices() const { return vertices_; }
  const Faces& faces() const { return faces_; }
  const Points3d& normals() const { return normals_; }
  Vec3 vertex(Index i) const { return vertices_.row(i).transpose(); }
  Vec3 normal(Index i) const { return normals_.row(i).transpose(); }
  const std::vector<Index>& neighbors(Index i) const {
    return adjacency_[static_cast<std::size_t>(i)];
  }
  const std::vector<std::vector<Index>>& adjacency() const {
    return adjacency_;
  }
  double bbox_diagonal() const { return bbox_diagonal_; }
  Vec3 bbox_min() const { return bbox_min_; }
  Vec3 bbox_max() const { return bbox_max_; }
  Vec3 centroid() const { return centroid_; }
  const SpatialIndex& index() const { return *index_; }

  /// Edges shared by more than two faces. Such input is accepted as-is.
  Index nonmanifold_edges() const { return nonmanifold_edges_; }

 private:
  Points3d vertices_;
  Faces faces_;
  Points3d normals_;
  std::vector<std::vector<Index>> adjacency_;
  double bbox_diagonal_ = 0.0;
  Vec3 bbox_min_ = Vec3::Zero();
  Vec3 bbox_max_ = Vec3::Zero();
  Vec3 centroid_ = Vec3::Zero();
  std::shared_ptr<const SpatialIndex> index_;
  Index nonmanifold_edges_ = 0;
};

/// Format inferred from the file extension (.off, .obj, .ply).
MeshFormat format_from_path(const std::filesystem::path& path);

Mesh load_mesh(const std::filesystem::path& path, MeshFormat format);
Mesh load_mesh(const std::filesystem::path& path);

/// Writes coordinates with 17 significant digits so a reload is bit-exact.
void save_mesh(const Mesh& mesh, const std::filesystem::path& path,
               MeshFormat format);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

/// Up to `k` distinct vertices near `v`, excluding `v`.
///
/// Candidates are the 2-ring of `v` ranked by Euclidean distance; if the
/// 2-ring holds fewer than `k` vertices the list is completed with the
/// Euclidean nearest vertices of the whole mesh. Ties go to the smaller
/// index. Returns exactly `k` entries whenever the mesh has more than `k`
/// vertices.
std::vector<Index> surface_neighbors(const Mesh& mesh, Index v, Index k = 6);

}  // namespace meshattn
