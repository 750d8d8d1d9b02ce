#pragma once

// Desk-scale supervised task for the saliency network: a smooth planted
// signal is carried by the semantic features, the ground truth mixes it
// with a curvature cue only the geometry can see.

#include <cstdint>

#include "meshattn/feature_field.hpp"
#include "meshattn/mesh.hpp"
#include "meshattn/metrics.hpp"

namespace meshattn {

struct PlantedTaskConfig {
  Index sem_dim = 2048;
  Index bumps = 4;            // signed Gaussian bumps making up the planted field
  double bump_width = 0.15;   // bump sigma as a fraction of the bbox diagonal
  double planted_gain = 3.0;
  double noise = 0.05;        // per-channel Gaussian noise
  double planted_noise = 0.3; // extra per-vertex noise on the planted channel
  Index curvature_k = 8;
  std::uint64_t seed = 0;
};

struct PlantedTask {
  FeatureField features;
  SaliencyMap gt;     // normalised
  VectorXd planted;   // in [-1, 1]
  VectorXd curvature; // standardised proxy, clipped to +-3
};

/// Mean of (1 - n_v . n_u) over the k nearest other vertices, standardised
/// over the mesh and clipped to [-3, 3]; zero when the mesh is uniform.
VectorXd curvature_proxy(const Mesh& mesh, Index k = 8);

/// Channel 0 carries the planted field, channels 1..3 the unit direction
/// from the centroid, channels 4..21 sin/cos of (1, 2, 3) * pi * that
/// direction; all channels get seeded noise and the planted channel extra
/// noise, so pooling evidence from nearby points pays off. The direction
/// lets attention keys be matched by location without revealing the local
/// shape.
/// gt = normalize(logistic(gain * planted + curvature)).
PlantedTask make_planted_task(const Mesh& mesh, const PlantedTaskConfig& config);

/// Two Gaussian lobes of width `width` (fraction of the bbox diagonal)
/// centred on the vertices extremal along -x and +x; values in [0, 1]
/// (the larger of the two lobes).
SaliencyMap two_lobe_saliency(const Mesh& mesh, double width = 0.15);

/// Every row equal to `value` in every channel.
FeatureField constant_features(Index n, Index dim, float value);

}  // namespace meshattn
