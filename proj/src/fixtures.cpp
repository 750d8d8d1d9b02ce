#include "meshattn/fixtures.hpp"

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "meshattn/rng.hpp"

namespace meshattn::fixtures {

namespace {

Mesh assemble(const std::vector<Vec3>& verts,
              const std::vector<std::array<Index, 3>>& tris) {
  Points3d v(static_cast<Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i)
    v.row(static_cast<Index>(i)) = verts[i].transpose();
  Faces f(static_cast<Index>(tris.size()), 3);
  for (std::size_t i = 0; i < tris.size(); ++i)
    f.row(static_cast<Index>(i)) << tris[i][0], tris[i][1], tris[i][2];
  return Mesh::build(std::move(v), std::move(f));
}

}  // namespace

Mesh cube() {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i)
    v.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  // Counter-clockwise seen from outside.
  const std::vector<std::array<Index, 3>> t = {
      {0, 2, 3}, {0, 3, 1},  // z = 0
      {4, 5, 7}, {4, 7, 6},  // z = 1
      {0, 1, 5}, {0, 5, 4},  // y = 0
      {2, 6, 7}, {2, 7, 3},  // y = 1
      {0, 4, 6}, {0, 6, 2},  // x = 0
      {1, 3, 7}, {1, 7, 5},  // x = 1
  };
  return assemble(v, t);
}

Mesh icosphere(int subdiv) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (Vec3& p : v) p.normalize();
  std::vector<std::array<Index, 3>> t = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  for (int s = 0; s < subdiv; ++s) {
    std::map<std::pair<Index, Index>, Index> midpoint;
    auto mid = [&](Index a, Index b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)])
                      .normalized());
      const Index id = static_cast<Index>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<Index, 3>> next;
    next.reserve(t.size() * 4);
    for (const auto& tri : t) {
      const Index a = mid(tri[0], tri[1]);
      const Index b = mid(tri[1], tri[2]);
      const Index c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    t = std::move(next);
  }
  return assemble(v, t);
}

Mesh torus(double major_radius, double minor_radius, int nu, int nv) {
  std::vector<Vec3> v;
  for (int i = 0; i < nu; ++i) {
    const double u = 2.0 * M_PI * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double w = 2.0 * M_PI * j / nv;
      const double ring = major_radius + minor_radius * std::cos(w);
      v.emplace_back(ring * std::cos(u), ring * std::sin(u),
                     minor_radius * std::sin(w));
    }
  }
  std::vector<std::array<Index, 3>> t;
  auto id = [&](int i, int j) {
    return static_cast<Index>(((i + nu) % nu) * nv + (j + nv) % nv);
  };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      t.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      t.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return assemble(v, t);
}

Mesh bumpy_sphere(int subdiv, double amplitude, std::uint64_t seed, int waves) {
  const Mesh base = icosphere(subdiv);
  Rng rng(seed);
  std::vector<Vec3> axes;
  std::vector<double> freq, phase;
  for (int w = 0; w < waves; ++w) {
    Vec3 a(rng.normal(), rng.normal(), rng.normal());
    axes.push_back(a.normalized());
    freq.push_back(rng.uniform(2.0, 5.0));
    phase.push_back(rng.uniform(0.0, 2.0 * M_PI));
  }
  Points3d v = base.vertices();
  for (Index i = 0; i < v.rows(); ++i) {
    const Vec3 d = v.row(i).transpose();
    double r = 0.0;
    for (int w = 0; w < waves; ++w) r += std::sin(freq[w] * d.dot(axes[w]) + phase[w]);
    v.row(i) *= 1.0 + amplitude * r / waves;
  }
  return Mesh::build(std::move(v), base.faces());
}

}  // namespace meshattn::fixtures
