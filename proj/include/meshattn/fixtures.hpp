#pragma once

#include <cstdint>

#include "meshattn/mesh.hpp"

namespace meshattn::fixtures {

/// Unit cube [0,1]^3, 8 vertices and 12 outward-facing triangles.
Mesh cube();

/// Unit-radius icosphere centred at the origin; 10 * 4^subdiv + 2 vertices.
Mesh icosphere(int subdiv);

/// Torus around the z axis with major radius R and tube radius r.
Mesh torus(double major_radius, double minor_radius, int nu, int nv);

}  // namespace meshattn::fixtures

namespace meshattn::fixtures {

/// Icosphere with its radius modulated by a few seeded low-frequency
/// waves: 1 + amplitude * sum of sin(f * d . axis + phase) / waves.
Mesh bumpy_sphere(int subdiv, double amplitude, std::uint64_t seed, int waves = 3);

}  // namespace meshattn::fixtures
