#include "meshattn/sampling.hpp"

#include <numeric>

#include "meshattn/rng.hpp"

namespace meshattn {

SampleSet uniform_sample(const Mesh& mesh, Index m, std::uint64_t seed) {
  const Index n = mesh.num_vertices();
  if (m <= 0 || m > n)
    throw InvalidCount("sample count " + std::to_string(m) +
                       " outside [1, " + std::to_string(n) + "]");
  // Partial Fisher-Yates: the first m slots are a uniform m-subset in
  // uniformly random order.
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  for (Index i = 0; i < m; ++i) {
    const Index j = i + static_cast<Index>(rng.uniform_index(
                            static_cast<std::uint64_t>(n - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  perm.resize(static_cast<std::size_t>(m));

  SampleSet s;
  s.indices = std::move(perm);
  s.seed = seed;
  s.positions.resize(m, 3);
  s.normals.resize(m, 3);
  for (Index i = 0; i < m; ++i) {
    s.positions.row(i) = mesh.vertices().row(s.indices[static_cast<std::size_t>(i)]);
    s.normals.row(i) = mesh.normals().row(s.indices[static_cast<std::size_t>(i)]);
  }
  return s;
}

}  // namespace meshattn
