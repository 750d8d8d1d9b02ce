#include "meshattn/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "meshattn/rng.hpp"
#include "meshattn/spatial_index.hpp"

namespace meshattn {

VectorXd curvature_proxy(const Mesh& mesh, Index k) {
  const Index n = mesh.num_vertices();
  VectorXd raw(n);
  for (Index v = 0; v < n; ++v) {
    double sum = 0.0;
    Index used = 0;
    for (const Neighbor& nb : mesh.index().knn(mesh.vertex(v), k + 1)) {
      if (nb.index == v || used == k) continue;
      sum += 1.0 - mesh.normal(v).dot(mesh.normal(nb.index));
      ++used;
    }
    raw[v] = used ? sum / double(used) : 0.0;
  }
  const double mean = raw.mean();
  const double sd = std::sqrt((raw.array() - mean).square().mean());
  if (!(sd > 1e-12)) return VectorXd::Zero(n);
  return ((raw.array() - mean) / sd).cwiseMax(-3.0).cwiseMin(3.0);
}

PlantedTask make_planted_task(const Mesh& mesh, const PlantedTaskConfig& cfg) {
  if (cfg.sem_dim < 1 || cfg.bumps < 1) throw InvalidArgument("planted task needs dim, bumps >= 1");
  const Index n = mesh.num_vertices();
  const double diag = mesh.bbox_diagonal();
  Rng rng(cfg.seed);

  PlantedTask task;
  task.planted = VectorXd::Zero(n);
  const double sigma = cfg.bump_width * diag;
  for (Index b = 0; b < cfg.bumps; ++b) {
    const Vec3 centre = mesh.vertex(static_cast<Index>(rng.uniform_index(std::uint64_t(n))));
    const double sign = b % 2 == 0 ? 1.0 : -1.0;
    for (Index v = 0; v < n; ++v)
      task.planted[v] += sign * std::exp(-(mesh.vertex(v) - centre).squaredNorm() / (2 * sigma * sigma));
  }
  const double peak = task.planted.cwiseAbs().maxCoeff();
  if (peak > 0.0) task.planted /= peak;

  task.curvature = curvature_proxy(mesh, cfg.curvature_k);
  VectorXd gt(n);
  for (Index v = 0; v < n; ++v)
    gt[v] = 1.0 / (1.0 + std::exp(-(cfg.planted_gain * task.planted[v] + task.curvature[v])));
  task.gt = SaliencyMap{gt}.normalized();

  task.features = FeatureField(n, cfg.sem_dim);
  const Index positional = std::min<Index>(21, cfg.sem_dim - 1);
  for (Index v = 0; v < n; ++v) {
    const Vec3 offset = mesh.vertex(v) - mesh.centroid();
    const double len = offset.norm();
    const Vec3 dir = len > 0.0 ? Vec3(offset / len) : Vec3::UnitZ();
    auto row = task.features.data.row(v);
    row[0] = static_cast<float>(task.planted[v]);
    for (Index c = 0; c < positional; ++c) {
      double value;
      if (c < 3) {
        value = dir[c];
      } else {
        const Index j = c - 3, freq = 1 + j / 6, axis = (j / 2) % 3;
        const double arg = M_PI * double(freq) * dir[axis];
        value = j % 2 == 0 ? std::sin(arg) : std::cos(arg);
      }
      row[1 + c] = static_cast<float>(value);
    }
    for (Index c = 0; c < cfg.sem_dim; ++c) row[c] += static_cast<float>(cfg.noise * rng.normal());
    if (cfg.planted_noise > 0.0) row[0] += static_cast<float>(cfg.planted_noise * rng.normal());
    task.features.coverage[static_cast<std::size_t>(v)] = 1;
  }
  return task;
}

SaliencyMap two_lobe_saliency(const Mesh& mesh, double width) {
  if (!(width > 0.0)) throw InvalidArgument("lobe width must be positive");
  const Index n = mesh.num_vertices();
  Index lo = 0, hi = 0;
  for (Index v = 1; v < n; ++v) {
    if (mesh.vertex(v).x() < mesh.vertex(lo).x()) lo = v;
    if (mesh.vertex(v).x() > mesh.vertex(hi).x()) hi = v;
  }
  const double sigma = width * mesh.bbox_diagonal();
  VectorXd s(n);
  for (Index v = 0; v < n; ++v) {
    const double a = (mesh.vertex(v) - mesh.vertex(lo)).squaredNorm();
    const double b = (mesh.vertex(v) - mesh.vertex(hi)).squaredNorm();
    s[v] = std::exp(-std::min(a, b) / (2 * sigma * sigma));
  }
  return SaliencyMap{s};
}

FeatureField constant_features(Index n, Index dim, float value) {
  FeatureField f(n, dim);
  f.data.setConstant(value);
  std::fill(f.coverage.begin(), f.coverage.end(), std::uint16_t{1});
  return f;
}

}  // namespace meshattn
