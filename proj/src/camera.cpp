#include "meshattn/camera.hpp"

#include <algorithm>
#include <cmath>

namespace meshattn {

namespace {
constexpr double kDeg = M_PI / 180.0;
}

Vec3 CameraPose::eye() const {
  const double el = elevation * kDeg, az = azimuth * kDeg;
  return look_at + distance * Vec3(std::cos(el) * std::sin(az), std::sin(el),
                                   std::cos(el) * std::cos(az));
}

Vec3 CameraPose::forward() const {
  const double el = elevation * kDeg, az = azimuth * kDeg;
  return -Vec3(std::cos(el) * std::sin(az), std::sin(el),
               std::cos(el) * std::cos(az));
}

Vec3 CameraPose::up() const {
  const double el = elevation * kDeg, az = azimuth * kDeg;
  return Vec3(-std::sin(el) * std::sin(az), std::cos(el),
              -std::sin(el) * std::cos(az));
}

Vec3 CameraPose::right() const { return forward().cross(up()); }

double CameraPose::focal() const {
  return 0.5 * height / std::tan(0.5 * fov_y);
}

Vec3 CameraPose::to_camera(const Vec3& world) const {
  const Vec3 c = world - eye();
  return Vec3(c.dot(right()), c.dot(up()), c.dot(forward()));
}

Vec3 CameraPose::to_world(const Vec3& camera) const {
  return eye() + camera.x() * right() + camera.y() * up() +
         camera.z() * forward();
}

Eigen::Vector2d CameraPose::to_pixel(const Vec3& camera) const {
  const double f = focal();
  return Eigen::Vector2d(0.5 * height - f * camera.y() / camera.z(),
                         0.5 * width + f * camera.x() / camera.z());
}

Vec3 CameraPose::unproject_pixel(int row, int col, double depth) const {
  const double f = focal();
  const double x = (col + 0.5 - 0.5 * width) * depth / f;
  const double y = -(row + 0.5 - 0.5 * height) * depth / f;
  return to_world(Vec3(x, y, depth));
}

double fit_fov(double bbox_diagonal, double distance) {
  // Cone tangent to the bounding sphere; clamped when the camera sits
  // inside it.
  const double ratio = 0.5 * bbox_diagonal / distance;
  return 2.0 * std::asin(std::min(ratio, std::sin(0.45 * M_PI)));
}

std::vector<CameraPose> sample_view_sphere(const Mesh& mesh, int n_elev,
                                           int n_azim, double dist_scale,
                                           int image_size) {
  if (n_elev < 1 || n_azim < 1)
    throw InvalidArgument("view grid needs at least one row and column");
  if (image_size < 16) throw InvalidArgument("image size must be >= 16");
  if (!(dist_scale > 0.0)) throw InvalidArgument("distance scale must be > 0");
  std::vector<CameraPose> poses;
  poses.reserve(static_cast<std::size_t>(n_elev * n_azim));
  const double distance = dist_scale * mesh.bbox_diagonal();
  for (int e = 0; e < n_elev; ++e) {
    for (int a = 0; a < n_azim; ++a) {
      CameraPose p;
      p.elevation = 360.0 * e / n_elev;
      p.azimuth = 360.0 * a / n_azim;
      p.distance = distance;
      p.look_at = mesh.centroid();
      p.height = p.width = image_size;
      p.fov_y = fit_fov(mesh.bbox_diagonal(), distance);
      poses.push_back(p);
    }
  }
  return poses;
}

}  // namespace meshattn
