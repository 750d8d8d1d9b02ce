#pragma once

// Central finite-difference oracle for the saliency network and small
// fixtures shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "meshattn/fixtures.hpp"
#include "meshattn/fusion_net.hpp"
#include "meshattn/rng.hpp"
#include "meshattn/sampling.hpp"
#include "meshattn/scanpath_rl.hpp"
#include "meshattn/synthetic.hpp"

namespace oracle {

struct TensorCheck {
  std::string name;
  double rel_error = 0.0;  // ||analytic - numeric|| / max(norms)
  double norm = 0.0;       // analytic gradient norm
  std::size_t probed = 0;
};

/// Relative error per trainable tensor. `max_entries` > 0 probes that many
/// seeded entries per tensor instead of all of them.
inline std::vector<TensorCheck> check_fusion_gradients(
    const meshattn::FusionParams<double>& params, const meshattn::FusionExample<double>& ex,
    meshattn::LossWeights weights = {}, double step = 1e-4, std::size_t max_entries = 0,
    std::uint64_t seed = 1) {
  using namespace meshattn;
  FusionParams<double> grad;
  loss_and_gradient(params, ex, weights, &grad);
  FusionParams<double> probe = params;
  std::vector<TensorCheck> out;
  Rng rng(seed);
  for (const auto& [name, member] : FusionParams<double>::trainable()) {
    nn::Mat<double>& t = probe.*member;
    const nn::Mat<double>& g = grad.*member;
    std::vector<Index> entries;
    if (max_entries == 0 || std::size_t(t.size()) <= max_entries) {
      for (Index i = 0; i < t.size(); ++i) entries.push_back(i);
    } else {
      for (std::size_t i = 0; i < max_entries; ++i)
        entries.push_back(Index(rng.uniform_index(std::uint64_t(t.size()))));
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (Index e : entries) {
      const double saved = t.data()[e];
      t.data()[e] = saved + step;
      const double up = loss_and_gradient<double>(probe, ex, weights, nullptr).loss;
      t.data()[e] = saved - step;
      const double down = loss_and_gradient<double>(probe, ex, weights, nullptr).loss;
      t.data()[e] = saved;
      const double numeric = (up - down) / (2 * step);
      const double analytic = g.data()[e];
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
    const double scale = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    out.push_back({name, std::sqrt(diff2) / scale, std::sqrt(a2), entries.size()});
  }
  return out;
}

/// Small architecture for exhaustive probing.
inline meshattn::FusionArch tiny_arch(meshattn::FusionMode mode) {
  meshattn::FusionArch a;
  a.sem_in = 12;
  a.sem_hidden = 10;
  a.hidden = 8;
  a.heads = 4;
  a.point_dim = 6;
  a.pool_k = 4;
  a.head_hidden = 8;
  a.mode = mode;
  return a;
}

/// Planted-task example on a bumpy sphere with `m` sampled points.
inline meshattn::FusionExample<double> planted_example(const meshattn::FusionArch& arch,
                                                       meshattn::Index m, std::uint64_t seed) {
  using namespace meshattn;
  const Mesh mesh = fixtures::bumpy_sphere(1, 0.15, seed);
  PlantedTaskConfig cfg;
  cfg.sem_dim = arch.sem_in;
  cfg.noise = 0.3;
  cfg.seed = seed;
  const PlantedTask task = make_planted_task(mesh, cfg);
  const SampleSet sample = uniform_sample(mesh, m, seed + 7);
  return make_fusion_example<double>(mesh, task.features, task.gt, sample, arch);
}

/// Initial parameters with nonzero norm offsets and biases so every
/// tensor carries gradient signal.
inline meshattn::FusionParams<double> perturbed_params(const meshattn::FusionArch& arch,
                                                       std::uint64_t seed) {
  using namespace meshattn;
  auto p = FusionParams<double>::init(arch, seed);
  Rng rng(seed ^ 0xABCDEF);
  for (const auto& [name, member] : FusionParams<double>::trainable()) {
    nn::Mat<double>& t = p.*member;
    for (Index i = 0; i < t.size(); ++i) t.data()[i] += 0.1 * rng.normal();
  }
  return p;
}

/// Central differences of the total clipped-policy loss with respect to
/// every policy and value tensor.
inline std::vector<TensorCheck> check_policy_gradients(const meshattn::PolicyParams& params,
                                                       const meshattn::Rollout& batch,
                                                       const meshattn::PpoConfig& cfg,
                                                       double step = 1e-5) {
  using namespace meshattn;
  PolicyParams grad;
  ppo_loss(params, batch, cfg, &grad);
  PolicyParams probe = params;
  std::vector<TensorCheck> out;
  for (auto net : {&PolicyParams::policy, &PolicyParams::value}) {
    const std::string prefix = net == &PolicyParams::policy ? "policy." : "value.";
    for (const auto& [name, member] : Mlp<double>::tensors()) {
      nn::Mat<double>& t = (probe.*net).*member;
      const nn::Mat<double>& g = (grad.*net).*member;
      double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
      for (Index e = 0; e < t.size(); ++e) {
        const double saved = t.data()[e];
        t.data()[e] = saved + step;
        const double up = ppo_loss(probe, batch, cfg).total;
        t.data()[e] = saved - step;
        const double down = ppo_loss(probe, batch, cfg).total;
        t.data()[e] = saved;
        const double numeric = (up - down) / (2 * step);
        diff2 += (g.data()[e] - numeric) * (g.data()[e] - numeric);
        a2 += g.data()[e] * g.data()[e];
        n2 += numeric * numeric;
      }
      const double scale = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
      out.push_back({prefix + name, std::sqrt(diff2) / scale, std::sqrt(a2),
                     std::size_t(t.size())});
    }
  }
  return out;
}

/// Random minibatch of `rows` transitions whose behaviour log-probabilities
/// sit near the current policy, so ratios straddle 1 without touching the
/// clip boundary exactly.
inline meshattn::Rollout policy_batch(const meshattn::PolicyParams& params, meshattn::Index rows,
                                      std::uint64_t seed) {
  using namespace meshattn;
  Rng rng(seed);
  Rollout b;
  b.observations.resize(rows, kObservationSize);
  for (Index i = 0; i < b.observations.size(); ++i) b.observations.data()[i] = rng.normal();
  b.log_probs.resize(rows);
  b.advantages.resize(rows);
  b.returns.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    const Observation obs = b.observations.row(i).transpose();
    const Index a = Index(rng.uniform_index(kActions));
    b.actions.push_back(a);
    b.log_probs[i] = std::log(params.distribution(obs)[a]) + 0.1 * rng.normal();
    b.advantages[i] = rng.normal();
    b.returns[i] = rng.normal();
  }
  return b;
}

/// Policy with output layers scaled up so the action distribution is far
/// from uniform and every tensor carries gradient.
inline meshattn::PolicyParams sharp_policy(meshattn::Index hidden, std::uint64_t seed) {
  using namespace meshattn;
  PolicyParams p = PolicyParams::init(hidden, seed);
  Rng rng(seed ^ 0x5151);
  p.policy.w3 *= 100.0;
  for (auto* net : {&p.policy, &p.value})
    for (auto* t : {&net->b1, &net->b2, &net->b3})
      for (Index i = 0; i < t->size(); ++i) t->data()[i] = 0.3 * rng.normal();
  return p;
}

}  // namespace oracle
