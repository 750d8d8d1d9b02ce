#pragma once

#include <vector>

#include "meshattn/common.hpp"
#include "meshattn/mesh.hpp"

namespace meshattn {

/// Pinhole camera on a sphere around `look_at`.
struct CameraPose {
  double elevation = 0.0;  // degrees
  double azimuth = 0.0;    // degrees
  double distance = 1.0;
  Vec3 look_at = Vec3::Zero();
  int height = 512;
  int width = 512;
  double fov_y = 1.0;  // radians

  Vec3 eye() const;
  /// Unit forward (eye -> look_at).
  Vec3 forward() const;
  /// Unit up; the elevation tangent, so it never degenerates at the poles.
  Vec3 up() const;
  Vec3 right() const;
  /// Focal length in pixels.
  double focal() const;

  /// Camera-space coordinates (x right, y up, z depth along forward).
  Vec3 to_camera(const Vec3& world) const;
  Vec3 to_world(const Vec3& camera) const;
  /// Continuous image coordinates (row, col) of a camera-space point.
  Eigen::Vector2d to_pixel(const Vec3& camera) const;
  /// World point on the ray through the centre of pixel (row, col) at
  /// camera depth `depth`.
  Vec3 unproject_pixel(int row, int col, double depth) const;
};

/// Vertical field of view of the cone tangent to a sphere of radius diag/2
/// seen from `distance`, so the whole bounding sphere is in frame.
double fit_fov(double bbox_diagonal, double distance);

/// n_elev x n_azim poses, angles linearly spaced over [0, 360) degrees,
/// at distance dist_scale * bbox_diagonal from the vertex centroid.
std::vector<CameraPose> sample_view_sphere(const Mesh& mesh, int n_elev = 10,
                                           int n_azim = 10,
                                           double dist_scale = 0.65,
                                           int image_size = 512);

}  // namespace meshattn
