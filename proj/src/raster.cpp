#include "meshattn/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace meshattn {

namespace {

// Sutherland-Hodgman against z >= near.
std::vector<Vec3> clip_near(const std::array<Vec3, 3>& tri, double near) {
  std::vector<Vec3> out;
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = tri[static_cast<std::size_t>(i)];
    const Vec3& b = tri[static_cast<std::size_t>((i + 1) % 3)];
    const bool ina = a.z() >= near, inb = b.z() >= near;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double t = (near - a.z()) / (b.z() - a.z());
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

void raster_triangle(const CameraPose& pose, const Vec3& c0, const Vec3& c1,
                     const Vec3& c2, Index face, DepthBuffer& buf) {
  const Eigen::Vector2d p0 = pose.to_pixel(c0), p1 = pose.to_pixel(c1),
                        p2 = pose.to_pixel(c2);
  // Edge function in (col, row) space.
  auto edge = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                 double r, double c) {
    return (b.y() - a.y()) * (r - a.x()) - (b.x() - a.x()) * (c - a.y());
  };
  const double area = edge(p0, p1, p2.x(), p2.y());
  if (area == 0.0 || !std::isfinite(area)) return;

  const double rmin = std::min({p0.x(), p1.x(), p2.x()});
  const double rmax = std::max({p0.x(), p1.x(), p2.x()});
  const double cmin = std::min({p0.y(), p1.y(), p2.y()});
  const double cmax = std::max({p0.y(), p1.y(), p2.y()});
  const int r0 = std::max(0, static_cast<int>(std::floor(rmin - 0.5)));
  const int r1 = std::min(buf.height - 1, static_cast<int>(std::ceil(rmax - 0.5)));
  const int col0 = std::max(0, static_cast<int>(std::floor(cmin - 0.5)));
  const int col1 = std::min(buf.width - 1, static_cast<int>(std::ceil(cmax - 0.5)));
  const double iz0 = 1.0 / c0.z(), iz1 = 1.0 / c1.z(), iz2 = 1.0 / c2.z();

  for (int r = r0; r <= r1; ++r) {
    const double pr = r + 0.5;
    for (int c = col0; c <= col1; ++c) {
      const double pc = c + 0.5;
      const double w0 = edge(p1, p2, pr, pc) / area;
      const double w1 = edge(p2, p0, pr, pc) / area;
      const double w2 = edge(p0, p1, pr, pc) / area;
      if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
      const double z = 1.0 / (w0 * iz0 + w1 * iz1 + w2 * iz2);
      const std::size_t at = static_cast<std::size_t>(r) * buf.width + c;
      if (z < buf.depth[at]) {
        buf.depth[at] = z;
        buf.face[at] = face;
      }
    }
  }
}

}  // namespace

DepthBuffer rasterize_depth(const Mesh& mesh, const CameraPose& pose) {
  DepthBuffer buf;
  buf.height = pose.height;
  buf.width = pose.width;
  buf.depth.assign(static_cast<std::size_t>(pose.height) * pose.width,
                   std::numeric_limits<double>::infinity());
  buf.face.assign(buf.depth.size(), -1);
  const double near = 1e-6 * pose.distance;

  std::vector<Vec3> cam(static_cast<std::size_t>(mesh.num_vertices()));
  for (Index i = 0; i < mesh.num_vertices(); ++i)
    cam[static_cast<std::size_t>(i)] = pose.to_camera(mesh.vertex(i));

  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const std::array<Vec3, 3> tri = {
        cam[static_cast<std::size_t>(mesh.faces()(f, 0))],
        cam[static_cast<std::size_t>(mesh.faces()(f, 1))],
        cam[static_cast<std::size_t>(mesh.faces()(f, 2))]};
    if (tri[0].z() >= near && tri[1].z() >= near && tri[2].z() >= near) {
      raster_triangle(pose, tri[0], tri[1], tri[2], f, buf);
      continue;
    }
    const std::vector<Vec3> poly = clip_near(tri, near);
    for (std::size_t i = 1; i + 1 < poly.size(); ++i)
      raster_triangle(pose, poly[0], poly[i], poly[i + 1], f, buf);
  }
  return buf;
}

}  // namespace meshattn
