#pragma once

// Geometry-queries-semantics saliency network with hand-written reverse
// mode. Everything is templated on the scalar: training runs in float,
// gradient verification in double.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meshattn/common.hpp"
#include "meshattn/feature_field.hpp"
#include "meshattn/mesh.hpp"
#include "meshattn/metrics.hpp"
#include "meshattn/nn.hpp"
#include "meshattn/sampling.hpp"

namespace meshattn {

enum class FusionMode {
  CrossAttention,  // H_geo + MHA(Q = H_geo, K = V = H_sem)
  Concat,          // [H_geo, H_sem] W_cat
  Add,             // H_geo + H_sem
  SelfAttention,   // X + MHA(X, X, X) with X = H_geo + H_sem
  GeometryOnly,    // H_geo
  SemanticOnly,    // H_sem
};

std::string_view to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view name);  // InvalidArgument

struct FusionArch {
  Index sem_in = 2048;
  Index sem_hidden = 512;
  Index hidden = 32;
  Index heads = 4;
  Index point_dim = 32;  // reference encoder width; raw geometry is 2x this
  Index pool_k = 16;
  Index head_hidden = 64;
  FusionMode mode = FusionMode::CrossAttention;
  nn::BatchNormOptions norm;

  Index geo_raw() const { return 2 * point_dim; }
  Index head_dim() const { return hidden / heads; }
  void validate() const;  // InvalidArgument
};

template <typename Scalar>
struct FusionParams {
  using Mat = nn::Mat<Scalar>;

  FusionArch arch;
  Mat enc_w, enc_b;                         // 6 -> point_dim
  Mat geo_w, geo_gamma, geo_beta;           // geo_raw -> hidden
  Mat sem_w1, sem1_gamma, sem1_beta;        // sem_in -> sem_hidden
  Mat sem_w2, sem2_gamma, sem2_beta;        // sem_hidden -> hidden
  Mat attn_q, attn_k, attn_v, attn_o;       // hidden -> hidden
  Mat cat_w;                                // 2 hidden -> hidden
  Mat head_w1, head_b1, head_w2, head_b2;   // hidden -> head_hidden -> 1
  Mat geo_mean, geo_var, sem1_mean, sem1_var, sem2_mean, sem2_var;  // running

  using Entry = std::pair<const char*, Mat FusionParams::*>;
  static constexpr std::array<Entry, 20> trainable() {
    return {{{"enc.w", &FusionParams::enc_w},
             {"enc.b", &FusionParams::enc_b},
             {"geo.w", &FusionParams::geo_w},
             {"geo.gamma", &FusionParams::geo_gamma},
             {"geo.beta", &FusionParams::geo_beta},
             {"sem.w1", &FusionParams::sem_w1},
             {"sem.gamma1", &FusionParams::sem1_gamma},
             {"sem.beta1", &FusionParams::sem1_beta},
             {"sem.w2", &FusionParams::sem_w2},
             {"sem.gamma2", &FusionParams::sem2_gamma},
             {"sem.beta2", &FusionParams::sem2_beta},
             {"attn.q", &FusionParams::attn_q},
             {"attn.k", &FusionParams::attn_k},
             {"attn.v", &FusionParams::attn_v},
             {"attn.o", &FusionParams::attn_o},
             {"cat.w", &FusionParams::cat_w},
             {"head.w1", &FusionParams::head_w1},
             {"head.b1", &FusionParams::head_b1},
             {"head.w2", &FusionParams::head_w2},
             {"head.b2", &FusionParams::head_b2}}};
  }
  static constexpr std::array<Entry, 6> running() {
    return {{{"geo.mean", &FusionParams::geo_mean},
             {"geo.var", &FusionParams::geo_var},
             {"sem.mean1", &FusionParams::sem1_mean},
             {"sem.var1", &FusionParams::sem1_var},
             {"sem.mean2", &FusionParams::sem2_mean},
             {"sem.var2", &FusionParams::sem2_var}}};
  }

  /// Weights uniform in +-1/sqrt(fan_in), biases zero, norm scale one.
  static FusionParams init(const FusionArch& arch, std::uint64_t seed);
  /// Same shapes, every tensor zero (running variance included).
  static FusionParams zeros(const FusionArch& arch);

  std::vector<Mat*> trainable_tensors();
  std::vector<const Mat*> trainable_tensors() const;
  bool all_finite() const;

  template <typename Other>
  FusionParams<Other> cast() const {
    FusionParams<Other> out = FusionParams<Other>::zeros(arch);
    for (std::size_t i = 0; i < trainable().size(); ++i)
      out.*(FusionParams<Other>::trainable()[i].second) =
          (this->*(trainable()[i].second)).template cast<Other>();
    for (std::size_t i = 0; i < running().size(); ++i)
      out.*(FusionParams<Other>::running()[i].second) =
          (this->*(running()[i].second)).template cast<Other>();
    return out;
  }
};

/// m x 6 rows [position; normal] of the sampled points, positions centred
/// at the vertex centroid and scaled by 1 / bbox_diagonal.
MatrixXd assemble_geo_descriptors(const Mesh& mesh, const SampleSet& sample);

/// Network input for one mesh sample.
template <typename Scalar>
struct FusionInput {
  nn::Mat<Scalar> geo;      // m x 6
  nn::Mat<Scalar> sem;      // m x sem_in
  std::vector<Index> pool;  // m x pool_k nearest samples (self first), row-major
  Index pool_k = 0;

  Index size() const { return geo.rows(); }
};

/// `pool_k` nearest sampled points of every sample by descriptor position;
/// ties go to the smaller index. Capped at m.
std::vector<Index> pooling_neighbors(const MatrixXd& geo, Index pool_k);

template <typename Scalar>
FusionInput<Scalar> make_fusion_input(const Mesh& mesh, const FeatureField& features,
                                      const SampleSet& sample, const FusionArch& arch);

/// Inverse-distance interpolation weights, rows normalised to sum to one.
/// Interpolation is then a fixed sparse linear map from samples to targets.
struct IdwWeights {
  Index sources = 0;
  Index k = 0;
  std::vector<Index> index;    // targets x k
  std::vector<double> weight;  // targets x k

  Index targets() const { return k ? Index(index.size()) / k : 0; }
  VectorXd apply(const VectorXd& values) const;
  VectorXd apply_transpose(const VectorXd& target_grad) const;
};

IdwWeights idw_weights(const Points3d& samples, const Points3d& targets, Index k = 3,
                       double eps = 1e-8);
VectorXd idw_interpolate(const VectorXd& values, const Points3d& samples,
                         const Points3d& targets, Index k = 3, double eps = 1e-8);

struct LossWeights {
  double kl = 10.0;
  double cc = 2.0;
};

struct HybridLoss {
  double loss = 0.0;
  double kl = 0.0;
  double cc = 0.0;
};

/// loss = w_kl * KL(gt || pred / sum pred) - w_cc * CC(pred, gt) on raw
/// predictions. When `grad` is given it receives d loss / d pred.
/// ZeroVariance for a constant prediction or ground truth.
HybridLoss hybrid_loss(const VectorXd& pred, const VectorXd& gt, LossWeights weights = {},
                       VectorXd* grad = nullptr);

template <typename Scalar>
struct ForwardCache {
  using Mat = nn::Mat<Scalar>;
  Mat enc;                   // rectified per-point encoder output
  std::vector<Index> winner; // m x point_dim argmax rows of the pooling
  Mat h_raw;                 // m x geo_raw
  nn::BatchNormCache<Scalar> geo_norm, sem1_norm, sem2_norm;
  Mat h_geo, a1, h_sem;
  Mat x_query, x_context;    // attention inputs
  Mat q, k, v;
  std::vector<Mat> attn;     // per head, m x m
  Mat heads;                 // concatenated head outputs
  Mat h_attn, h_fused;
  Mat u;                     // rectified head hidden layer
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y;  // sigmoid scores
};

enum class NormPass {
  Batch,    // batch statistics (training)
  Running,  // running statistics (inference)
};

/// Per-sample scores in (0, 1).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(const FusionParams<Scalar>& params,
                                                 const FusionInput<Scalar>& input,
                                                 ForwardCache<Scalar>& cache,
                                                 NormPass pass = NormPass::Batch);

/// Gradients of every trainable tensor given d loss / d y.
template <typename Scalar>
FusionParams<Scalar> backward(const FusionParams<Scalar>& params,
                              const FusionInput<Scalar>& input,
                              const ForwardCache<Scalar>& cache,
                              const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& dy);

/// One mesh worth of supervised data with the interpolation precomputed.
template <typename Scalar>
struct FusionExample {
  FusionInput<Scalar> input;
  IdwWeights idw;
  VectorXd gt;  // normalised, length N
};

template <typename Scalar>
FusionExample<Scalar> make_fusion_example(const Mesh& mesh, const FeatureField& features,
                                          const SaliencyMap& gt, const SampleSet& sample,
                                          const FusionArch& arch);

/// Forward in batch-statistics mode, interpolation, loss and (optionally)
/// the full gradient.
template <typename Scalar>
HybridLoss loss_and_gradient(const FusionParams<Scalar>& params,
                             const FusionExample<Scalar>& example, LossWeights weights,
                             FusionParams<Scalar>* grad, ForwardCache<Scalar>* cache = nullptr);

enum class LrSchedule {
  Constant,
  Cosine,  // half-cosine decay from lr to zero over all optimiser steps
};

std::string_view to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(std::string_view name);  // InvalidArgument

struct TrainConfig {
  double lr = 1e-4;
  LrSchedule schedule = LrSchedule::Constant;
  double weight_decay = 1e-4;
  Index epochs = 100;
  Index batch_size = 8;  // meshes per optimiser step
  Index m = 2048;
  LossWeights loss;
  std::uint64_t seed = 0;
};

struct FusionSample {
  Mesh mesh;
  FeatureField features;
  SaliencyMap gt;
};

struct EpochStats {
  Index epoch = 0;
  double loss = 0.0;
  double kl = 0.0;
  double cc = 0.0;
};

struct FusionTrainResult {
  FusionParams<float> params;  // parameters after the lowest-loss epoch
  std::vector<EpochStats> curve;
  Index best_epoch = 0;
};

/// AdamW over the dataset in seeded shuffled order. NonFiniteLoss on
/// divergence. `on_epoch`, when set, sees every epoch as it completes.
FusionTrainResult train_fusion(const std::vector<FusionSample>& data, const FusionArch& arch,
                               const TrainConfig& config,
                               const std::function<void(const EpochStats&)>& on_epoch = {});

/// Inference-mode prediction interpolated to every vertex; raw scores.
SaliencyMap predict(const Mesh& mesh, const FeatureField& features,
                    const FusionParams<float>& params, Index m = 2048,
                    std::uint64_t seed = 0);

void save_loss_curve(const std::vector<EpochStats>& curve, const std::filesystem::path& path);

/// "SGWT" tensor table with the architecture and training config echoed.
void save_fusion_checkpoint(const FusionParams<float>& params, const TrainConfig& config,
                            const std::filesystem::path& path);
FusionParams<float> load_fusion_checkpoint(const std::filesystem::path& path);

std::string arch_to_config(const FusionArch& arch);
std::string train_to_config(const TrainConfig& config);

}  // namespace meshattn
