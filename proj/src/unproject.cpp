#include "meshattn/unproject.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "meshattn/binary.hpp"
#include "meshattn/rng.hpp"
#include "meshattn/spatial_index.hpp"

namespace meshattn {

namespace {

constexpr float kInfF = std::numeric_limits<float>::infinity();

/// Whether face `f` crosses the eye -> vertex segment more than `tol`
/// (camera depth) in front of the vertex.
bool blocks(const Mesh& mesh, Index f, const Vec3& eye, const Vec3& dir, double depth,
            double tol) {
  const Vec3 p0 = mesh.vertex(mesh.faces()(f, 0));
  const Vec3 e1 = mesh.vertex(mesh.faces()(f, 1)) - p0;
  const Vec3 e2 = mesh.vertex(mesh.faces()(f, 2)) - p0;
  const Vec3 h = dir.cross(e2);
  const double det = e1.dot(h);
  if (std::abs(det) < 1e-14) return false;
  const Vec3 s = eye - p0;
  const double u = s.dot(h) / det;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = s.cross(e1);
  const double w = dir.dot(q) / det;
  if (w < 0.0 || u + w > 1.0) return false;
  const double t = e2.dot(q) / det;
  return t > 0.0 && t * depth < depth - tol;
}

void normalize_rows(MatrixXf& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).cast<double>().norm();
    if (norm > 0.0) m.row(i) = (m.row(i).cast<double>() / norm).cast<float>();
  }
}

void check_same_grid(const PixelFeatureMap& a, const PixelFeatureMap& b) {
  if (a.height != b.height || a.width != b.width)
    throw ShapeMismatch("pixel feature maps differ in resolution");
}

}  // namespace

PixelFeatureMap::PixelFeatureMap(int h, int w, Index dim)
    : height(h),
      width(w),
      data(MatrixXf::Zero(Index(h) * w, dim)),
      depth(static_cast<std::size_t>(h) * w, kInfF) {}

namespace {

/// Faces binned by the screen-space bounding box of their projection.
class FaceBins {
 public:
  static constexpr int kTile = 8;

  FaceBins(const Mesh& mesh, const CameraPose& pose, const std::vector<Vec3>& camera,
           const std::vector<Eigen::Vector2d>& pixel, double near)
      : rows_((pose.height + kTile - 1) / kTile),
        cols_((pose.width + kTile - 1) / kTile),
        bins_(std::size_t(rows_) * std::size_t(cols_)) {
    for (Index f = 0; f < mesh.num_faces(); ++f) {
      double r0 = 0, r1 = pose.height, c0 = 0, c1 = pose.width;
      bool in_front = true;
      for (int k = 0; k < 3; ++k)
        in_front = in_front && camera[std::size_t(mesh.faces()(f, k))].z() > near;
      if (in_front) {  // faces crossing the near plane cover the whole image
        r0 = c0 = std::numeric_limits<double>::infinity();
        r1 = c1 = -r0;
        for (int k = 0; k < 3; ++k) {
          const Eigen::Vector2d& px = pixel[std::size_t(mesh.faces()(f, k))];
          r0 = std::min(r0, px.x());
          r1 = std::max(r1, px.x());
          c0 = std::min(c0, px.y());
          c1 = std::max(c1, px.y());
        }
      }
      const int tr0 = std::max(0, int(std::floor(r0)) / kTile);
      const int tr1 = std::min(rows_ - 1, int(std::floor(std::min(r1, double(pose.height)))) / kTile);
      const int tc0 = std::max(0, int(std::floor(c0)) / kTile);
      const int tc1 = std::min(cols_ - 1, int(std::floor(std::min(c1, double(pose.width)))) / kTile);
      if (r1 < 0.0 || c1 < 0.0) continue;
      for (int tr = tr0; tr <= tr1; ++tr)
        for (int tc = tc0; tc <= tc1; ++tc) bins_[std::size_t(tr * cols_ + tc)].push_back(f);
    }
  }

  /// Faces whose projection may cover the pixel position (row, col).
  const std::vector<Index>& at(double row, double col) const {
    return bins_[std::size_t(int(row) / kTile * cols_ + int(col) / kTile)];
  }

 private:
  int rows_, cols_;
  std::vector<std::vector<Index>> bins_;
};

}  // namespace

ViewProjection project_vertices(const Mesh& mesh, const CameraPose& pose) {
  ViewProjection out;
  out.pose = pose;
  out.depth = rasterize_depth(mesh, pose);
  const std::size_t n = static_cast<std::size_t>(mesh.num_vertices());
  out.vertices.resize(n);
  const double near = 1e-6 * pose.distance;
  const double tol = 1e-4 * mesh.bbox_diagonal();
  const Vec3 eye = pose.eye();

  std::vector<Vec3> camera(n);
  std::vector<Eigen::Vector2d> pixel(n, Eigen::Vector2d::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    camera[i] = pose.to_camera(mesh.vertex(Index(i)));
    if (camera[i].z() > near) pixel[i] = pose.to_pixel(camera[i]);
  }
  const FaceBins bins(mesh, pose, camera, pixel, near);

  for (Index i = 0; i < mesh.num_vertices(); ++i) {
    VertexPixel& vp = out.vertices[static_cast<std::size_t>(i)];
    const Vec3& c = camera[std::size_t(i)];
    if (c.z() <= near) {
      vp.behind_camera = true;
      continue;
    }
    vp.row = pixel[std::size_t(i)].x();
    vp.col = pixel[std::size_t(i)].y();
    const int r = static_cast<int>(std::floor(vp.row));
    const int col = static_cast<int>(std::floor(vp.col));
    if (r < 0 || col < 0 || r >= pose.height || col >= pose.width) continue;
    auto incident = [&](Index f) {
      return mesh.faces()(f, 0) == i || mesh.faces()(f, 1) == i || mesh.faces()(f, 2) == i;
    };
    auto owns = [&](int rr, int cc) {
      const Index f = out.depth.face_at(rr, cc);
      return f >= 0 && incident(f);
    };
    if (out.depth.foreground(r, col)) {
      vp.visible = owns(r, col) || c.z() <= out.depth.at(r, col) + tol;
    } else {
      // Silhouette vertex whose pixel centre falls outside the coverage: a
      // background pixel says nothing about occluders, so require one of its
      // own faces to win a pixel in the 3x3 window.
      for (int dr = -1; dr <= 1 && !vp.visible; ++dr)
        for (int dc = -1; dc <= 1 && !vp.visible; ++dc) {
          const int rr = r + dr, cc = col + dc;
          if (rr >= 0 && cc >= 0 && rr < pose.height && cc < pose.width) vp.visible = owns(rr, cc);
        }
    }
    if (!vp.visible) continue;
    // Pixel centres miss occluder edges that pass between them and the
    // vertex, so the exact ray is tested against every face whose
    // projection may cover the vertex.
    const Vec3 dir = mesh.vertex(i) - eye;
    for (Index f : bins.at(vp.row, vp.col)) {
      if (!incident(f) && blocks(mesh, f, eye, dir, c.z(), tol)) {
        vp.visible = false;
        break;
      }
    }
  }
  return out;
}

std::vector<TimestepWeight> timestep_weights(std::size_t steps,
                                             TimestepSelection selection) {
  if (steps == 0) throw ShapeMismatch("no timesteps");
  const std::size_t n = (3 * steps + 3) / 4;  // ceil(0.75 T)
  const std::size_t first = selection == TimestepSelection::LeastNoisy ? steps - n : 0;
  std::vector<TimestepWeight> out;
  for (std::size_t s = 0; s < n; ++s) {
    const double w = n == 1 ? 1.0 : 0.1 + 0.9 * double(s) / double(n - 1);
    out.push_back({first + s, w});
  }
  return out;
}

PixelFeatureMap weight_timesteps(const std::vector<PixelFeatureMap>& per_step,
                                 TimestepSelection selection) {
  if (per_step.empty()) throw ShapeMismatch("no timesteps");
  const PixelFeatureMap& ref = per_step.front();
  for (const auto& m : per_step) {
    check_same_grid(ref, m);
    if (m.dim() != ref.dim()) throw ShapeMismatch("timestep maps differ in dim");
  }
  PixelFeatureMap out(ref.height, ref.width, ref.dim());
  out.depth = ref.depth;
  MatrixXd acc = MatrixXd::Zero(out.data.rows(), out.data.cols());
  for (const TimestepWeight& tw : timestep_weights(per_step.size(), selection))
    acc += tw.weight * per_step[tw.step].data.cast<double>();
  for (Index i = 0; i < acc.rows(); ++i) {
    const double norm = acc.row(i).norm();
    if (norm > 0.0) acc.row(i) /= norm;
  }
  out.data = acc.cast<float>();
  return out;
}

PixelFeatureMap fuse_pixel_features(const PixelFeatureMap& diff,
                                    const PixelFeatureMap& dino, double alpha) {
  check_same_grid(diff, dino);
  PixelFeatureMap out(diff.height, diff.width, diff.dim() + dino.dim());
  out.depth = diff.depth;
  for (Index p = 0; p < out.data.rows(); ++p) {
    Eigen::VectorXd v(out.dim());
    v.head(diff.dim()) = alpha * diff.data.row(p).transpose().cast<double>();
    v.tail(dino.dim()) = (1.0 - alpha) * dino.data.row(p).transpose().cast<double>();
    const double norm = v.norm();
    if (norm > 0.0) v /= norm;
    out.data.row(p) = v.transpose().cast<float>();
  }
  return out;
}

FeatureField unproject_view(const PixelFeatureMap& fused,
                            const ViewProjection& projection, const Mesh& mesh,
                            Index k, double radius_frac) {
  const DepthBuffer& depth = projection.depth;
  const CameraPose& pose = projection.pose;
  if (static_cast<Index>(projection.vertices.size()) != mesh.num_vertices())
    throw ShapeMismatch("projection does not match the mesh");

  // Foreground render pixels and their surface points.
  std::vector<Index> fg_pixels;
  for (int r = 0; r < depth.height; ++r)
    for (int c = 0; c < depth.width; ++c)
      if (depth.foreground(r, c)) fg_pixels.push_back(Index(r) * depth.width + c);
  Points3d surface(static_cast<Index>(fg_pixels.size()), 3);
  std::vector<Index> slot(static_cast<std::size_t>(depth.height) * depth.width, -1);
  for (std::size_t i = 0; i < fg_pixels.size(); ++i) {
    const int r = static_cast<int>(fg_pixels[i] / depth.width);
    const int c = static_cast<int>(fg_pixels[i] % depth.width);
    surface.row(static_cast<Index>(i)) = pose.unproject_pixel(r, c, depth.at(r, c)).transpose();
    slot[static_cast<std::size_t>(fg_pixels[i])] = static_cast<Index>(i);
  }
  const SpatialIndex index(std::move(surface));

  const bool same_grid = fused.height == depth.height && fused.width == depth.width;
  const double sy = double(fused.height) / depth.height;
  const double sx = double(fused.width) / depth.width;

  // Bilinear taps of render pixel `p` on the feature grid, restricted to
  // foreground cells and renormalised. Returns false if no tap survives.
  using Taps = std::vector<std::pair<Index, double>>;
  auto taps_of = [&](Index p, Taps& acc) {
    const int r = static_cast<int>(p / depth.width);
    const int c = static_cast<int>(p % depth.width);
    if (same_grid) {
      if (!fused.foreground(p)) return false;
      acc.emplace_back(p, 1.0);
      return true;
    }
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, fused.height - 1.0);
    const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, fused.width - 1.0);
    const int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
    const int y1 = std::min(y0 + 1, fused.height - 1), x1 = std::min(x0 + 1, fused.width - 1);
    const double ty = fy - y0, tx = fx - x0;
    const std::array<std::pair<Index, double>, 4> cand = {{
        {fused.pixel(y0, x0), (1 - ty) * (1 - tx)},
        {fused.pixel(y0, x1), (1 - ty) * tx},
        {fused.pixel(y1, x0), ty * (1 - tx)},
        {fused.pixel(y1, x1), ty * tx},
    }};
    double total = 0.0;
    for (const auto& [cell, w] : cand)
      if (w > 0.0 && fused.foreground(cell)) total += w;
    if (!(total > 0.0)) return false;
    for (const auto& [cell, w] : cand)
      if (w > 0.0 && fused.foreground(cell)) acc.emplace_back(cell, w / total);
    return true;
  };

  FeatureField out(mesh.num_vertices(), fused.dim());
  const double radius = radius_frac * mesh.bbox_diagonal();
  Taps taps;
  std::vector<Index> gathered;
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const VertexPixel& vp = projection.vertices[static_cast<std::size_t>(v)];
    if (!vp.visible) continue;
    gathered.clear();
    const Index own = Index(std::floor(vp.row)) * depth.width + Index(std::floor(vp.col));
    const Index own_slot = slot[static_cast<std::size_t>(own)];
    if (own_slot >= 0) gathered.push_back(own_slot);
    for (const Neighbor& nb : index.radius_search(mesh.vertex(v), radius, k)) {
      if (static_cast<Index>(gathered.size()) >= k) break;
      if (nb.index != own_slot) gathered.push_back(nb.index);
    }

    taps.clear();
    Index used = 0;
    for (Index g : gathered) used += taps_of(fg_pixels[static_cast<std::size_t>(g)], taps);
    if (used == 0) continue;

    std::sort(taps.begin(), taps.end());
    Eigen::VectorXd feat = Eigen::VectorXd::Zero(fused.dim());
    for (std::size_t i = 0; i < taps.size();) {
      double w = 0.0;
      const Index cell = taps[i].first;
      for (; i < taps.size() && taps[i].first == cell; ++i) w += taps[i].second;
      feat += w * fused.data.row(cell).transpose().cast<double>();
    }
    out.data.row(v) = (feat / double(used)).transpose().cast<float>();
    out.coverage[static_cast<std::size_t>(v)] = 1;
  }
  return out;
}

ViewAccumulator::ViewAccumulator(Index n, Index dim)
    : sum_(MatrixXd::Zero(n, dim)), count_(static_cast<std::size_t>(n), 0) {}

void ViewAccumulator::add(const FeatureField& view) {
  if (view.n() != sum_.rows() || view.dim() != sum_.cols())
    throw ShapeMismatch("view feature field has the wrong shape");
  for (Index i = 0; i < view.n(); ++i) {
    if (view.coverage[static_cast<std::size_t>(i)] == 0) continue;
    sum_.row(i) += view.data.row(i).cast<double>();
    count_[static_cast<std::size_t>(i)] += view.coverage[static_cast<std::size_t>(i)];
  }
}

FeatureField ViewAccumulator::finish(const Mesh& mesh) const {
  const Index n = sum_.rows();
  if (mesh.num_vertices() != n) throw ShapeMismatch("mesh does not match features");
  FeatureField out(n, sum_.cols());
  std::vector<Index> covered;
  for (Index i = 0; i < n; ++i) {
    const auto c = count_[static_cast<std::size_t>(i)];
    if (c == 0) continue;
    out.data.row(i) = (sum_.row(i) / double(c)).cast<float>();
    out.coverage[static_cast<std::size_t>(i)] =
        static_cast<std::uint16_t>(std::min<std::uint32_t>(c, 0xFFFF));
    covered.push_back(i);
  }
  if (covered.empty()) throw NoCoverage("no vertex is covered by any view");
  if (static_cast<Index>(covered.size()) == n) return out;

  Points3d pts(static_cast<Index>(covered.size()), 3);
  for (std::size_t j = 0; j < covered.size(); ++j)
    pts.row(static_cast<Index>(j)) = mesh.vertices().row(covered[j]);
  const SpatialIndex index(std::move(pts));
  for (Index i = 0; i < n; ++i) {
    if (count_[static_cast<std::size_t>(i)] != 0) continue;
    const Index src = covered[static_cast<std::size_t>(index.knn(mesh.vertex(i), 1)[0].index)];
    out.data.row(i) = out.data.row(src);
  }
  return out;
}

FeatureField aggregate_views(const std::vector<FeatureField>& per_view,
                             const Mesh& mesh) {
  if (per_view.empty()) throw NoCoverage("no views to aggregate");
  ViewAccumulator acc(per_view.front().n(), per_view.front().dim());
  for (const FeatureField& f : per_view) acc.add(f);
  return acc.finish(mesh);
}

FeatureField unproject_mesh(const Mesh& mesh, const UnprojectConfig& config,
                            const PixelFeatureSource& source) {
  const auto poses = sample_view_sphere(mesh, config.n_elev, config.n_azim,
                                        config.dist_scale, config.image_size);
  std::unique_ptr<ViewAccumulator> acc;
  for (std::size_t v = 0; v < poses.size(); ++v) {
    const ViewProjection proj = project_vertices(mesh, poses[v]);
    const PixelFeatureMap fused = source(v, proj);
    const FeatureField field = unproject_view(fused, proj, mesh, config.k, config.radius_frac);
    if (!acc) acc = std::make_unique<ViewAccumulator>(field.n(), field.dim());
    acc->add(field);
  }
  if (!acc) throw NoCoverage("no views");
  return acc->finish(mesh);
}

PixelFeatureMap constant_pixel_features(const ViewProjection& view,
                                        const Eigen::VectorXf& value) {
  PixelFeatureMap out(view.depth.height, view.depth.width, value.size());
  for (Index p = 0; p < out.data.rows(); ++p) {
    const double d = view.depth.depth[static_cast<std::size_t>(p)];
    if (d < std::numeric_limits<double>::infinity()) {
      out.depth[static_cast<std::size_t>(p)] = static_cast<float>(d);
      out.data.row(p) = value.transpose();
    }
  }
  return out;
}

PixelFeatureMap SyntheticPixelFeatures::operator()(const Mesh& mesh,
                                                   const ViewProjection& view) const {
  // Channel c: sin(2 pi f_c <w_c, (p - centroid) / diag> + phi_c).
  struct Wave {
    Vec3 dir;
    double freq, phase;
  };
  auto waves = [&](std::uint64_t salt, Index dim) {
    Rng rng(Rng::mix(seed, salt));
    std::vector<Wave> out(static_cast<std::size_t>(dim));
    for (Wave& w : out) {
      w.dir = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
      w.freq = rng.uniform(0.5, 2.0);
      w.phase = rng.uniform(0.0, 2.0 * M_PI);
    }
    return out;
  };
  const auto diff_base = waves(1, diff_dim), diff_noise = waves(2, diff_dim);
  const auto dino_base = waves(3, dino_dim);

  // Late steps carry less noise: step s of the selection has noise
  // amplitude 1 - s / n; the weighted sum is linear in the two fields.
  double base_coef = 0.0, noise_coef = 0.0;
  const auto weights = timestep_weights(static_cast<std::size_t>(steps), selection);
  for (std::size_t s = 0; s < weights.size(); ++s) {
    base_coef += weights[s].weight;
    noise_coef += weights[s].weight * (1.0 - double(s + 1) / double(weights.size()));
  }

  const int fs = feature_size;
  PixelFeatureMap diff(fs, fs, diff_dim), dino(fs, fs, dino_dim);
  const DepthBuffer& depth = view.depth;
  const double diag = mesh.bbox_diagonal();
  for (int r = 0; r < fs; ++r) {
    for (int c = 0; c < fs; ++c) {
      const int rr = std::min(depth.height - 1, static_cast<int>((r + 0.5) * depth.height / fs));
      const int rc = std::min(depth.width - 1, static_cast<int>((c + 0.5) * depth.width / fs));
      if (!depth.foreground(rr, rc)) continue;
      const double d = depth.at(rr, rc);
      const Vec3 q = (view.pose.unproject_pixel(rr, rc, d) - mesh.centroid()) / diag;
      const Index p = diff.pixel(r, c);
      diff.depth[static_cast<std::size_t>(p)] = static_cast<float>(d);
      dino.depth[static_cast<std::size_t>(p)] = static_cast<float>(d);
      auto wave = [&](const Wave& w) {
        return std::sin(2.0 * M_PI * w.freq * w.dir.dot(q) + w.phase);
      };
      for (Index ch = 0; ch < diff_dim; ++ch)
        diff.data(p, ch) = static_cast<float>(
            base_coef * wave(diff_base[static_cast<std::size_t>(ch)]) +
            0.3 * noise_coef * wave(diff_noise[static_cast<std::size_t>(ch)]));
      for (Index ch = 0; ch < dino_dim; ++ch)
        dino.data(p, ch) = static_cast<float>(wave(dino_base[static_cast<std::size_t>(ch)]));
    }
  }
  normalize_rows(diff.data);
  normalize_rows(dino.data);
  return fuse_pixel_features(diff, dino, alpha);
}

PixelFeatureMap load_pxf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  binary::expect_magic(in, "SGPX");
  if (binary::read<std::uint32_t>(in) != 1) throw ParseError("unsupported .pxf version");
  const auto h = binary::read<std::uint32_t>(in);
  const auto w = binary::read<std::uint32_t>(in);
  const auto d = binary::read<std::uint32_t>(in);
  if (h == 0 || w == 0 || h > 16384 || w > 16384) throw ParseError(".pxf size out of range");
  PixelFeatureMap map(static_cast<int>(h), static_cast<int>(w), d);
  for (Index p = 0; p < map.data.rows(); ++p)
    for (Index c = 0; c < map.data.cols(); ++c) map.data(p, c) = binary::read<float>(in);
  for (auto& z : map.depth) z = binary::read<float>(in);
  return map;
}

void save_pxf(const PixelFeatureMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  binary::write_magic(out, "SGPX");
  binary::write<std::uint32_t>(out, 1);
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(map.height));
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(map.width));
  binary::write<std::uint32_t>(out, static_cast<std::uint32_t>(map.dim()));
  for (Index p = 0; p < map.data.rows(); ++p)
    for (Index c = 0; c < map.data.cols(); ++c) binary::write<float>(out, map.data(p, c));
  for (float z : map.depth) binary::write<float>(out, z);
}

PixelFeatureMap load_view_features(const std::filesystem::path& dir,
                                   std::size_t view, double alpha,
                                   TimestepSelection selection) {
  char name[64];
  std::vector<PixelFeatureMap> steps;
  for (int t = 0;; ++t) {
    std::snprintf(name, sizeof name, "view_%03zu_diff_%02d.pxf", view, t);
    if (!std::filesystem::exists(dir / name)) break;
    steps.push_back(load_pxf(dir / name));
  }
  if (steps.empty())
    throw IoError("no diffusion feature steps for view " + std::to_string(view) +
                  " in '" + dir.string() + "'");
  std::snprintf(name, sizeof name, "view_%03zu_dino.pxf", view);
  const PixelFeatureMap dino = load_pxf(dir / name);
  return fuse_pixel_features(weight_timesteps(steps, selection), dino, alpha);
}

}  // namespace meshattn
