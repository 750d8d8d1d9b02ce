#pragma once

// Fixation sequences as a partially observable walk over mesh vertices:
// environment, reward with inhibition of return, small tanh MLPs with
// hand-written reverse mode, generalised advantage estimation and clipped
// policy optimisation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "meshattn/common.hpp"
#include "meshattn/mesh.hpp"
#include "meshattn/metrics.hpp"
#include "meshattn/nn.hpp"
#include "meshattn/rng.hpp"
#include "meshattn/scanpath.hpp"

namespace meshattn {

inline constexpr Index kEpisodeLength = 20;  // moves per episode
inline constexpr Index kActions = 6;         // candidate neighbours per step
inline constexpr Index kObservationSize = 16;

using Observation = Eigen::Matrix<double, kObservationSize, 1>;

struct RewardConfig {
  double saliency = 1.0;
  double ior = 0.2;
  double ior_scale = 2.0;
  double new_region = 0.15;
  double diversity = 0.1;
  double step_penalty = 0.05;
  Index region_grid = 4;          // cells per bbox axis
  Index diversity_window = 5;     // recent fixations considered
  double diversity_scale = 0.2;   // fraction of the bbox diagonal
};

/// The five reward terms, signed as they enter the sum.
struct RewardTerms {
  double saliency = 0.0;
  double ior = 0.0;        // <= 0
  double new_region = 0.0;
  double diversity = 0.0;
  double step = 0.0;       // <= 0

  double total() const { return saliency + ior + new_region + diversity + step; }
};

/// Reward terms for moving to a vertex with the given saliency, prior
/// visit count, region novelty and diversity in [0, 1].
RewardTerms reward_terms(double saliency, Index visits, bool new_region, double diversity,
                         const RewardConfig& config);

enum class StartMode {
  Sample,  // start drawn from the normalised saliency
  Argmax,  // most salient vertex, smallest index on ties
};

std::string_view to_string(StartMode mode);
StartMode parse_start_mode(std::string_view name);  // InvalidArgument

struct EnvState {
  Index current = 0;
  std::vector<Index> visits;    // per vertex
  std::vector<Index> history;   // fixations in order, start included
  Index step = 0;
  std::vector<char> regions;    // occupied grid cells
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

/// Saliency values are used as given (expected in [0, 1]); neighbour
/// candidates come from `surface_neighbors` and are precomputed.
class ScanpathEnv {
 public:
  ScanpathEnv(const Mesh& mesh, SaliencyMap saliency, RewardConfig config = {});

  Observation reset(StartMode mode, Rng& rng);
  /// Starts at a chosen vertex.
  Observation reset_at(Index vertex);
  /// Moves to neighbour `action` of the current vertex.
  StepResult step(Index action);

  RewardTerms reward_terms(Index next) const;
  double reward(Index next) const { return reward_terms(next).total(); }
  bool is_new_region(Index next) const;
  double diversity(Index next) const;
  Index region_of(Index vertex) const { return cell_[std::size_t(vertex)]; }

  Observation observe() const;
  const EnvState& state() const { return state_; }
  const std::array<Index, kActions>& candidates(Index vertex) const {
    return neighbors_[std::size_t(vertex)];
  }
  const Mesh& mesh() const { return *mesh_; }
  const SaliencyMap& saliency() const { return saliency_; }
  const RewardConfig& config() const { return config_; }
  bool done() const { return state_.step >= kEpisodeLength; }

 private:
  const Mesh* mesh_;
  SaliencyMap saliency_;
  RewardConfig config_;
  std::vector<std::array<Index, kActions>> neighbors_;
  std::vector<Index> cell_;
  VectorXd centre_dist_;  // distance to the centroid over the diagonal
  EnvState state_;
};

/// delta_t = r_t + gamma V_{t+1} - V_t, advantages accumulated backwards
/// with gamma * lambda; returns = advantages + values. `values` carries one
/// bootstrap entry more than `rewards`. LengthMismatch otherwise.
struct GaeResult {
  VectorXd advantages;
  VectorXd returns;
};
GaeResult gae(const VectorXd& rewards, const VectorXd& values, double gamma, double lambda);
/// Same over several episodes: `terminal[t]` cuts the bootstrap after t.
GaeResult gae(const VectorXd& rewards, const VectorXd& values, const std::vector<char>& terminal,
              double gamma, double lambda);

/// in -> hidden -> hidden -> out with tanh on both hidden layers.
template <typename Scalar>
struct Mlp {
  using Mat = nn::Mat<Scalar>;
  Mat w1, b1, w2, b2, w3, b3;

  using Entry = std::pair<const char*, Mat Mlp::*>;
  static constexpr std::array<Entry, 6> tensors() {
    return {{{"w1", &Mlp::w1},
             {"b1", &Mlp::b1},
             {"w2", &Mlp::w2},
             {"b2", &Mlp::b2},
             {"w3", &Mlp::w3},
             {"b3", &Mlp::b3}}};
  }

  struct Cache {
    Mat x, h1, h2;
  };

  /// Uniform +-1/sqrt(fan_in) weights, zero biases; the output layer is
  /// scaled by `out_gain`.
  static Mlp init(Index in, Index hidden, Index out, double out_gain, Rng& rng);
  static Mlp zeros_like(const Mlp& other);

  Index inputs() const { return w1.rows(); }
  Index outputs() const { return w3.cols(); }

  /// Rows of `x` are samples.
  Mat forward(const Mat& x, Cache* cache = nullptr) const;
  /// Parameter gradients for d loss / d output.
  Mlp backward(const Cache& cache, const Mat& dout) const;

  std::vector<Mat*> parameters();
  std::vector<const Mat*> parameters() const;
  bool all_finite() const;
};

struct PolicyParams {
  Mlp<double> policy;  // 16 -> 64 -> 64 -> 6 logits
  Mlp<double> value;   // 16 -> 64 -> 64 -> 1

  static PolicyParams init(Index hidden, std::uint64_t seed);
  /// Action probabilities of one observation.
  Eigen::Matrix<double, kActions, 1> distribution(const Observation& obs) const;
  double state_value(const Observation& obs) const;
};

struct PpoConfig {
  double clip = 0.2;
  double gae_lambda = 0.95;
  double gamma = 0.99;
  Index total_timesteps = 200000;
  Index rollout = 2048;
  Index epochs = 10;
  Index minibatch = 64;
  double lr = 3e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  Index hidden = 64;
  StartMode start = StartMode::Sample;
  std::uint64_t seed = 0;

  void validate() const;  // InvalidArgument
};

/// One collected transition batch, flattened.
struct Rollout {
  RowMatrix<double> observations;  // T x 16
  std::vector<Index> actions;
  VectorXd log_probs;              // behaviour policy, chosen action
  VectorXd advantages;             // normalised
  VectorXd returns;
};

struct PpoLoss {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double total = 0.0;
};

/// Clipped surrogate, value error and entropy bonus on a minibatch:
/// total = policy + value_coef * value - entropy_coef * entropy. When
/// `grad` is given it receives the gradient of `total`.
PpoLoss ppo_loss(const PolicyParams& params, const Rollout& batch, const PpoConfig& config,
                 PolicyParams* grad = nullptr);

struct RolloutStats {
  Index timestep = 0;       // environment steps so far
  double mean_return = 0.0; // over episodes finished in this rollout
  double entropy = 0.0;     // mean policy entropy over the rollout
  Index episodes = 0;
};

struct ScanpathTrainResult {
  PolicyParams params;  // parameters behind the best mean episode return
  std::vector<RolloutStats> curve;
  double best_return = 0.0;
};

/// NonFinite if any update produces a non-finite loss or weight.
ScanpathTrainResult train_scanpath(const Mesh& mesh, const SaliencyMap& saliency,
                                   const PpoConfig& config, const RewardConfig& reward = {},
                                   const std::function<void(const RolloutStats&)>& on_rollout = {});

/// Start plus kEpisodeLength moves, unit durations. `deterministic` takes
/// the most probable action (smallest index on ties); otherwise actions
/// are sampled from `seed`, which also draws a sampled start.
Scanpath generate_scanpath(const Mesh& mesh, const SaliencyMap& saliency,
                           const PolicyParams& params, bool deterministic, std::uint64_t seed,
                           StartMode start = StartMode::Sample, const RewardConfig& reward = {});

/// Baseline walkers.
enum class Walker {
  Policy,
  Greedy,  // neighbour with the largest immediate reward, smallest slot on ties
  Random,  // uniform over the candidates
};

struct EpisodeReport {
  std::vector<Index> path;  // start included
  double total_reward = 0.0;
  Index revisits = 0;       // moves landing on an already visited vertex
  double revisit_rate() const { return double(revisits) / double(kEpisodeLength); }
};

/// One episode from a fixed start. `params` is needed for Walker::Policy
/// only; the policy acts greedily when `deterministic`.
EpisodeReport run_episode(ScanpathEnv& env, Index start, Walker walker, Rng& rng,
                          const PolicyParams* params = nullptr, bool deterministic = false);

void save_scanpath_curve(const std::vector<RolloutStats>& curve,
                         const std::filesystem::path& path);

/// "SGPI" tensor table; the PPO and reward config are echoed.
void save_policy_checkpoint(const PolicyParams& params, const PpoConfig& config,
                            const RewardConfig& reward, const std::filesystem::path& path);
PolicyParams load_policy_checkpoint(const std::filesystem::path& path);

std::string ppo_to_config(const PpoConfig& config);
std::string reward_to_config(const RewardConfig& config);

}  // namespace meshattn
