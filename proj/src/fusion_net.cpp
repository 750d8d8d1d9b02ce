#include "meshattn/fusion_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "meshattn/io.hpp"
#include "meshattn/spatial_index.hpp"

namespace meshattn {

namespace {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

constexpr std::array<std::pair<FusionMode, std::string_view>, 6> kModeNames{{
    {FusionMode::CrossAttention, "cross_attention"},
    {FusionMode::Concat, "concat"},
    {FusionMode::Add, "add"},
    {FusionMode::SelfAttention, "self_attention"},
    {FusionMode::GeometryOnly, "geometry_only"},
    {FusionMode::SemanticOnly, "semantic_only"},
}};

bool uses_geometry(FusionMode mode) { return mode != FusionMode::SemanticOnly; }
bool uses_semantics(FusionMode mode) { return mode != FusionMode::GeometryOnly; }

template <typename Scalar>
nn::Mat<Scalar> row_of(Index cols, Scalar value) {
  return nn::Mat<Scalar>::Constant(1, cols, value);
}

}  // namespace

std::string_view to_string(FusionMode mode) {
  for (const auto& [m, name] : kModeNames)
    if (m == mode) return name;
  return "unknown";
}

FusionMode parse_fusion_mode(std::string_view name) {
  for (const auto& [m, n] : kModeNames)
    if (n == name) return m;
  throw InvalidArgument("unknown fusion mode '" + std::string(name) + "'");
}

std::string_view to_string(LrSchedule schedule) {
  return schedule == LrSchedule::Cosine ? "cosine" : "constant";
}

LrSchedule parse_lr_schedule(std::string_view name) {
  if (name == "constant") return LrSchedule::Constant;
  if (name == "cosine") return LrSchedule::Cosine;
  throw InvalidArgument("unknown learning-rate schedule '" + std::string(name) + "'");
}

void FusionArch::validate() const {
  if (sem_in < 1 || sem_hidden < 1 || hidden < 1 || point_dim < 1 || head_hidden < 1 ||
      pool_k < 1)
    throw InvalidArgument("network dimensions must be positive");
  if (heads < 1 || hidden % heads != 0)
    throw InvalidArgument("hidden width must be divisible by the head count");
  if (!(norm.eps > 0.0) || !(norm.momentum >= 0.0 && norm.momentum <= 1.0))
    throw InvalidArgument("normalisation eps must be positive, momentum in [0, 1]");
}

// ---------------------------------------------------------------------------
// Parameters

template <typename Scalar>
FusionParams<Scalar> FusionParams<Scalar>::zeros(const FusionArch& a) {
  a.validate();
  FusionParams p;
  p.arch = a;
  const Index h = a.hidden;
  p.enc_w = Mat::Zero(6, a.point_dim);
  p.enc_b = Mat::Zero(1, a.point_dim);
  p.geo_w = Mat::Zero(a.geo_raw(), h);
  p.sem_w1 = Mat::Zero(a.sem_in, a.sem_hidden);
  p.sem_w2 = Mat::Zero(a.sem_hidden, h);
  p.geo_gamma = p.geo_beta = p.geo_mean = p.geo_var = Mat::Zero(1, h);
  p.sem1_gamma = p.sem1_beta = p.sem1_mean = p.sem1_var = Mat::Zero(1, a.sem_hidden);
  p.sem2_gamma = p.sem2_beta = p.sem2_mean = p.sem2_var = Mat::Zero(1, h);
  p.attn_q = p.attn_k = p.attn_v = p.attn_o = Mat::Zero(h, h);
  p.cat_w = Mat::Zero(2 * h, h);
  p.head_w1 = Mat::Zero(h, a.head_hidden);
  p.head_b1 = Mat::Zero(1, a.head_hidden);
  p.head_w2 = Mat::Zero(a.head_hidden, 1);
  p.head_b2 = Mat::Zero(1, 1);
  return p;
}

template <typename Scalar>
FusionParams<Scalar> FusionParams<Scalar>::init(const FusionArch& a, std::uint64_t seed) {
  FusionParams p = zeros(a);
  Rng rng(seed);
  const Index h = a.hidden;
  p.enc_w = nn::uniform_init<Scalar>(6, a.point_dim, 6, rng);
  p.geo_w = nn::uniform_init<Scalar>(a.geo_raw(), h, a.geo_raw(), rng);
  p.sem_w1 = nn::uniform_init<Scalar>(a.sem_in, a.sem_hidden, a.sem_in, rng);
  p.sem_w2 = nn::uniform_init<Scalar>(a.sem_hidden, h, a.sem_hidden, rng);
  p.attn_q = nn::uniform_init<Scalar>(h, h, h, rng);
  p.attn_k = nn::uniform_init<Scalar>(h, h, h, rng);
  p.attn_v = nn::uniform_init<Scalar>(h, h, h, rng);
  p.attn_o = nn::uniform_init<Scalar>(h, h, h, rng);
  p.cat_w = nn::uniform_init<Scalar>(2 * h, h, 2 * h, rng);
  p.head_w1 = nn::uniform_init<Scalar>(h, a.head_hidden, h, rng);
  p.head_w2 = nn::uniform_init<Scalar>(a.head_hidden, 1, a.head_hidden, rng);
  p.geo_gamma = row_of<Scalar>(h, 1);
  p.sem1_gamma = row_of<Scalar>(a.sem_hidden, 1);
  p.sem2_gamma = row_of<Scalar>(h, 1);
  p.geo_var = row_of<Scalar>(h, 1);
  p.sem1_var = row_of<Scalar>(a.sem_hidden, 1);
  p.sem2_var = row_of<Scalar>(h, 1);
  return p;
}

template <typename Scalar>
auto FusionParams<Scalar>::trainable_tensors() -> std::vector<Mat*> {
  std::vector<Mat*> out;
  for (const auto& [name, member] : trainable()) out.push_back(&(this->*member));
  return out;
}

template <typename Scalar>
auto FusionParams<Scalar>::trainable_tensors() const -> std::vector<const Mat*> {
  std::vector<const Mat*> out;
  for (const auto& [name, member] : trainable()) out.push_back(&(this->*member));
  return out;
}

template <typename Scalar>
bool FusionParams<Scalar>::all_finite() const {
  for (const Mat* t : trainable_tensors())
    if (!t->allFinite()) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Inputs

MatrixXd assemble_geo_descriptors(const Mesh& mesh, const SampleSet& sample) {
  const double scale = 1.0 / mesh.bbox_diagonal();
  MatrixXd out(sample.size(), 6);
  const Eigen::RowVector3d c = mesh.centroid().transpose();
  for (Index i = 0; i < sample.size(); ++i) {
    out.block(i, 0, 1, 3) = (sample.positions.row(i) - c) * scale;
    out.block(i, 3, 1, 3) = sample.normals.row(i);
  }
  return out;
}

std::vector<Index> pooling_neighbors(const MatrixXd& geo, Index pool_k) {
  const Index m = geo.rows();
  const Index k = std::min(pool_k, m);
  const SpatialIndex index(Points3d(geo.leftCols(3)));
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(m * k));
  for (Index i = 0; i < m; ++i)
    for (const Neighbor& nb : index.knn(geo.row(i).head<3>().transpose(), k))
      out.push_back(nb.index);
  return out;
}

template <typename Scalar>
FusionInput<Scalar> make_fusion_input(const Mesh& mesh, const FeatureField& features,
                                      const SampleSet& sample, const FusionArch& arch) {
  if (features.n() != mesh.num_vertices())
    throw LengthMismatch("feature field has " + std::to_string(features.n()) +
                         " rows, mesh has " + std::to_string(mesh.num_vertices()) +
                         " vertices");
  if (features.dim() != arch.sem_in)
    throw DimMismatch("feature dimension " + std::to_string(features.dim()) +
                      " does not match the configured " + std::to_string(arch.sem_in));
  FusionInput<Scalar> in;
  const MatrixXd geo = assemble_geo_descriptors(mesh, sample);
  in.geo = geo.cast<Scalar>();
  in.sem.resize(sample.size(), arch.sem_in);
  for (Index i = 0; i < sample.size(); ++i)
    in.sem.row(i) = features.data.row(sample.indices[static_cast<std::size_t>(i)])
                        .template cast<Scalar>();
  in.pool_k = std::min(arch.pool_k, sample.size());
  in.pool = pooling_neighbors(geo, arch.pool_k);
  return in;
}

// ---------------------------------------------------------------------------
// Interpolation and loss

VectorXd IdwWeights::apply(const VectorXd& values) const {
  if (values.size() != sources) throw LengthMismatch("interpolation source count mismatch");
  VectorXd out = VectorXd::Zero(targets());
  for (Index t = 0; t < targets(); ++t)
    for (Index j = 0; j < k; ++j) {
      const auto e = static_cast<std::size_t>(t * k + j);
      out[t] += weight[e] * values[index[e]];
    }
  return out;
}

VectorXd IdwWeights::apply_transpose(const VectorXd& target_grad) const {
  if (target_grad.size() != targets()) throw LengthMismatch("interpolation target count mismatch");
  VectorXd out = VectorXd::Zero(sources);
  for (Index t = 0; t < targets(); ++t)
    for (Index j = 0; j < k; ++j) {
      const auto e = static_cast<std::size_t>(t * k + j);
      out[index[e]] += weight[e] * target_grad[t];
    }
  return out;
}

IdwWeights idw_weights(const Points3d& samples, const Points3d& targets, Index k, double eps) {
  if (k < 1) throw InvalidArgument("interpolation needs k >= 1");
  if (samples.rows() < k)
    throw InvalidCount("interpolation needs at least k = " + std::to_string(k) + " samples");
  const SpatialIndex index(samples);
  IdwWeights w;
  w.sources = samples.rows();
  w.k = k;
  w.index.reserve(static_cast<std::size_t>(targets.rows() * k));
  w.weight.reserve(w.index.capacity());
  for (Index t = 0; t < targets.rows(); ++t) {
    const auto nbs = index.knn(targets.row(t).transpose(), k);
    double total = 0.0;
    for (const Neighbor& nb : nbs) total += 1.0 / (nb.distance + eps);
    for (const Neighbor& nb : nbs) {
      w.index.push_back(nb.index);
      w.weight.push_back(1.0 / (nb.distance + eps) / total);
    }
  }
  return w;
}

VectorXd idw_interpolate(const VectorXd& values, const Points3d& samples,
                         const Points3d& targets, Index k, double eps) {
  if (values.size() != samples.rows())
    throw LengthMismatch("one value per sample position expected");
  return idw_weights(samples, targets, k, eps).apply(values);
}

HybridLoss hybrid_loss(const VectorXd& pred, const VectorXd& gt, LossWeights weights,
                       VectorXd* grad) {
  detail::check_same_length(pred, gt.size());
  if (!pred.allFinite()) throw NonFiniteLoss("prediction contains non-finite values");
  const double total = pred.sum();
  if (!(total > 0.0)) throw InvalidArgument("prediction has no positive mass");
  const VectorXd y = detail::as_distribution(gt);
  const VectorXd p = pred / total;

  HybridLoss out;
  for (Index i = 0; i < y.size(); ++i)
    if (y[i] > 0.0) out.kl += y[i] * std::log(y[i] / (p[i] + kSaliencyEps));

  const Correlation corr = cc_checked(gt, pred);
  if (corr.zero_variance) throw ZeroVariance("correlation undefined for a constant map");
  out.cc = corr.value;
  out.loss = weights.kl * out.kl - weights.cc * out.cc;

  if (grad) {
    // KL through the normalisation p = pred / sum(pred).
    VectorXd dkl_dp = VectorXd::Zero(p.size());
    for (Index i = 0; i < y.size(); ++i)
      if (y[i] > 0.0) dkl_dp[i] = -y[i] / (p[i] + kSaliencyEps);
    const VectorXd dkl = (dkl_dp.array() - dkl_dp.dot(p)) / total;

    const VectorXd xc = pred.array() - pred.mean();
    const VectorXd yc = gt.array() - gt.mean();
    const double sxx = xc.squaredNorm();
    const VectorXd dcc = yc / std::sqrt(sxx * yc.squaredNorm()) - out.cc * xc / sxx;
    *grad = weights.kl * dkl - weights.cc * dcc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

template <typename Scalar>
nn::Mat<Scalar> normalize(const nn::Mat<Scalar>& z, const nn::Mat<Scalar>& gamma,
                          const nn::Mat<Scalar>& beta, const nn::Mat<Scalar>& mean,
                          const nn::Mat<Scalar>& var, nn::BatchNormCache<Scalar>& cache,
                          NormPass pass, const nn::BatchNormOptions& opt) {
  return pass == NormPass::Batch ? nn::batch_norm_train(z, gamma, beta, cache, opt)
                                 : nn::batch_norm_eval(z, gamma, beta, mean, var, opt);
}

template <typename Scalar>
void attend(const FusionParams<Scalar>& p, ForwardCache<Scalar>& c) {
  const Index m = c.x_query.rows();
  const Index dk = p.arch.head_dim();
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dk));
  c.q.noalias() = c.x_query * p.attn_q;
  c.k.noalias() = c.x_context * p.attn_k;
  c.v.noalias() = c.x_context * p.attn_v;
  c.attn.resize(static_cast<std::size_t>(p.arch.heads));
  c.heads.resize(m, p.arch.hidden);
  for (Index h = 0; h < p.arch.heads; ++h) {
    auto& a = c.attn[static_cast<std::size_t>(h)];
    a.noalias() = scale * c.q.middleCols(h * dk, dk) * c.k.middleCols(h * dk, dk).transpose();
    nn::softmax_rows(a);
    c.heads.middleCols(h * dk, dk).noalias() = a * c.v.middleCols(h * dk, dk);
  }
  c.h_attn.noalias() = c.heads * p.attn_o;
}

}  // namespace

template <typename Scalar>
Vec<Scalar> forward(const FusionParams<Scalar>& p, const FusionInput<Scalar>& in,
                    ForwardCache<Scalar>& c, NormPass pass) {
  using Mat = nn::Mat<Scalar>;
  const FusionArch& a = p.arch;
  const Index m = in.size();
  if (in.sem.cols() != a.sem_in)
    throw DimMismatch("semantic input has " + std::to_string(in.sem.cols()) +
                      " channels, network expects " + std::to_string(a.sem_in));

  if (uses_geometry(a.mode)) {
    c.enc.noalias() = in.geo * p.enc_w;
    c.enc.rowwise() += p.enc_b.row(0);
    nn::relu_inplace(c.enc);
    const Index pd = a.point_dim, k = in.pool_k;
    c.h_raw.resize(m, 2 * pd);
    c.h_raw.leftCols(pd) = c.enc;
    c.winner.assign(static_cast<std::size_t>(m * pd), 0);
    for (Index i = 0; i < m; ++i)
      for (Index ch = 0; ch < pd; ++ch) {
        Index best = in.pool[static_cast<std::size_t>(i * k)];
        for (Index j = 1; j < k; ++j) {
          const Index cand = in.pool[static_cast<std::size_t>(i * k + j)];
          if (c.enc(cand, ch) > c.enc(best, ch)) best = cand;
        }
        c.winner[static_cast<std::size_t>(i * pd + ch)] = best;
        c.h_raw(i, pd + ch) = c.enc(best, ch);
      }
    const Mat z = c.h_raw * p.geo_w;
    c.h_geo = normalize(z, p.geo_gamma, p.geo_beta, p.geo_mean, p.geo_var, c.geo_norm, pass, a.norm);
    nn::relu_inplace(c.h_geo);
  }

  if (uses_semantics(a.mode)) {
    const Mat z1 = in.sem * p.sem_w1;
    c.a1 = normalize(z1, p.sem1_gamma, p.sem1_beta, p.sem1_mean, p.sem1_var, c.sem1_norm, pass,
                     a.norm);
    nn::relu_inplace(c.a1);
    const Mat z2 = c.a1 * p.sem_w2;
    c.h_sem = normalize(z2, p.sem2_gamma, p.sem2_beta, p.sem2_mean, p.sem2_var, c.sem2_norm,
                        pass, a.norm);
    nn::relu_inplace(c.h_sem);
  }

  switch (a.mode) {
    case FusionMode::CrossAttention:
      c.x_query = c.h_geo;
      c.x_context = c.h_sem;
      attend(p, c);
      c.h_fused = c.h_geo + c.h_attn;
      break;
    case FusionMode::SelfAttention:
      c.x_query = c.h_geo + c.h_sem;
      c.x_context = c.x_query;
      attend(p, c);
      c.h_fused = c.x_query + c.h_attn;
      break;
    case FusionMode::Concat:
      c.x_query.resize(m, 2 * a.hidden);
      c.x_query << c.h_geo, c.h_sem;
      c.h_fused.noalias() = c.x_query * p.cat_w;
      break;
    case FusionMode::Add:
      c.h_fused = c.h_geo + c.h_sem;
      break;
    case FusionMode::GeometryOnly:
      c.h_fused = c.h_geo;
      break;
    case FusionMode::SemanticOnly:
      c.h_fused = c.h_sem;
      break;
  }

  c.u.noalias() = c.h_fused * p.head_w1;
  c.u.rowwise() += p.head_b1.row(0);
  nn::relu_inplace(c.u);
  Vec<Scalar> s = c.u * p.head_w2.col(0);
  s.array() += p.head_b2(0, 0);
  c.y = s.unaryExpr([](Scalar x) { return nn::logistic(x); });
  return c.y;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

/// Returns d/d x_query; adds d/d x_context into `d_context`.
template <typename Scalar>
nn::Mat<Scalar> attend_backward(const FusionParams<Scalar>& p, const ForwardCache<Scalar>& c,
                                const nn::Mat<Scalar>& d_attn, FusionParams<Scalar>& g,
                                nn::Mat<Scalar>& d_context) {
  using Mat = nn::Mat<Scalar>;
  const Index dk = p.arch.head_dim();
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(dk));
  g.attn_o.noalias() += c.heads.transpose() * d_attn;
  const Mat d_heads = d_attn * p.attn_o.transpose();
  Mat dq(c.q.rows(), c.q.cols()), dk_(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (Index h = 0; h < p.arch.heads; ++h) {
    const Mat& a = c.attn[static_cast<std::size_t>(h)];
    const auto dh = d_heads.middleCols(h * dk, dk);
    dv.middleCols(h * dk, dk).noalias() = a.transpose() * dh;
    Mat ds = dh * c.v.middleCols(h * dk, dk).transpose();
    // Softmax Jacobian row by row: a * (ds - <ds, a>).
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inner = (ds.array() * a.array()).rowwise().sum();
    ds = (a.array() * (ds.array().colwise() - inner.array())) * scale;
    dq.middleCols(h * dk, dk).noalias() = ds * c.k.middleCols(h * dk, dk);
    dk_.middleCols(h * dk, dk).noalias() = ds.transpose() * c.q.middleCols(h * dk, dk);
  }
  g.attn_q.noalias() += c.x_query.transpose() * dq;
  g.attn_k.noalias() += c.x_context.transpose() * dk_;
  g.attn_v.noalias() += c.x_context.transpose() * dv;
  d_context.noalias() += dk_ * p.attn_k.transpose();
  d_context.noalias() += dv * p.attn_v.transpose();
  return dq * p.attn_q.transpose();
}

}  // namespace

template <typename Scalar>
FusionParams<Scalar> backward(const FusionParams<Scalar>& p, const FusionInput<Scalar>& in,
                              const ForwardCache<Scalar>& c, const Vec<Scalar>& dy) {
  using Mat = nn::Mat<Scalar>;
  const FusionArch& a = p.arch;
  const Index m = in.size();
  FusionParams<Scalar> g = FusionParams<Scalar>::zeros(a);

  const Vec<Scalar> ds = dy.array() * c.y.array() * (Scalar(1) - c.y.array());
  g.head_w2.col(0).noalias() = c.u.transpose() * ds;
  g.head_b2(0, 0) = ds.sum();
  Mat du = ds * p.head_w2.col(0).transpose();
  nn::relu_backward(du, c.u);
  g.head_w1.noalias() = c.h_fused.transpose() * du;
  g.head_b1 = du.colwise().sum();
  const Mat d_fused = du * p.head_w1.transpose();

  Mat d_geo = Mat::Zero(m, a.hidden), d_sem = Mat::Zero(m, a.hidden);
  switch (a.mode) {
    case FusionMode::CrossAttention: {
      d_geo = d_fused + attend_backward(p, c, d_fused, g, d_sem);
      break;
    }
    case FusionMode::SelfAttention: {
      Mat d_x = d_fused;
      d_x += attend_backward(p, c, d_fused, g, d_x);
      d_geo = d_x;
      d_sem = d_x;
      break;
    }
    case FusionMode::Concat: {
      g.cat_w.noalias() = c.x_query.transpose() * d_fused;
      const Mat d_cat = d_fused * p.cat_w.transpose();
      d_geo = d_cat.leftCols(a.hidden);
      d_sem = d_cat.rightCols(a.hidden);
      break;
    }
    case FusionMode::Add:
      d_geo = d_fused;
      d_sem = d_fused;
      break;
    case FusionMode::GeometryOnly:
      d_geo = d_fused;
      break;
    case FusionMode::SemanticOnly:
      d_sem = d_fused;
      break;
  }

  if (uses_geometry(a.mode)) {
    nn::relu_backward(d_geo, c.h_geo);
    const Mat dz = nn::batch_norm_backward(d_geo, p.geo_gamma, c.geo_norm, g.geo_gamma, g.geo_beta);
    g.geo_w.noalias() = c.h_raw.transpose() * dz;
    const Mat d_raw = dz * p.geo_w.transpose();
    const Index pd = a.point_dim;
    Mat d_enc = d_raw.leftCols(pd);
    for (Index i = 0; i < m; ++i)
      for (Index ch = 0; ch < pd; ++ch)
        d_enc(c.winner[static_cast<std::size_t>(i * pd + ch)], ch) += d_raw(i, pd + ch);
    nn::relu_backward(d_enc, c.enc);
    g.enc_w.noalias() = in.geo.transpose() * d_enc;
    g.enc_b = d_enc.colwise().sum();
  }

  if (uses_semantics(a.mode)) {
    nn::relu_backward(d_sem, c.h_sem);
    const Mat dz2 =
        nn::batch_norm_backward(d_sem, p.sem2_gamma, c.sem2_norm, g.sem2_gamma, g.sem2_beta);
    g.sem_w2.noalias() = c.a1.transpose() * dz2;
    Mat d_a1 = dz2 * p.sem_w2.transpose();
    nn::relu_backward(d_a1, c.a1);
    const Mat dz1 =
        nn::batch_norm_backward(d_a1, p.sem1_gamma, c.sem1_norm, g.sem1_gamma, g.sem1_beta);
    g.sem_w1.noalias() = in.sem.transpose() * dz1;
  }
  return g;
}

template <typename Scalar>
FusionExample<Scalar> make_fusion_example(const Mesh& mesh, const FeatureField& features,
                                          const SaliencyMap& gt, const SampleSet& sample,
                                          const FusionArch& arch) {
  if (gt.size() != mesh.num_vertices())
    throw LengthMismatch("ground truth has " + std::to_string(gt.size()) +
                         " entries, mesh has " + std::to_string(mesh.num_vertices()) +
                         " vertices");
  FusionExample<Scalar> ex;
  ex.input = make_fusion_input<Scalar>(mesh, features, sample, arch);
  ex.idw = idw_weights(sample.positions, mesh.vertices());
  ex.gt = gt.normalized().values;
  return ex;
}

template <typename Scalar>
HybridLoss loss_and_gradient(const FusionParams<Scalar>& params,
                             const FusionExample<Scalar>& ex, LossWeights weights,
                             FusionParams<Scalar>* grad, ForwardCache<Scalar>* cache) {
  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& c = cache ? *cache : local;
  const Vec<Scalar> y = forward(params, ex.input, c, NormPass::Batch);
  const VectorXd pred = ex.idw.apply(y.template cast<double>());
  VectorXd d_pred;
  const HybridLoss loss = hybrid_loss(pred, ex.gt, weights, grad ? &d_pred : nullptr);
  if (grad) {
    const Vec<Scalar> dy = ex.idw.apply_transpose(d_pred).template cast<Scalar>();
    *grad = backward(params, ex.input, c, dy);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training and inference

namespace {

void check_train_config(const TrainConfig& cfg) {
  if (!(cfg.lr >= 0.0) || !(cfg.weight_decay >= 0.0))
    throw InvalidArgument("learning rate and weight decay must be nonnegative");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.m < 3)
    throw InvalidArgument("epochs, batch size must be >= 1 and m >= 3");
}

}  // namespace

FusionTrainResult train_fusion(const std::vector<FusionSample>& data, const FusionArch& arch,
                               const TrainConfig& cfg,
                               const std::function<void(const EpochStats&)>& on_epoch) {
  if (data.empty()) throw InvalidArgument("empty training set");
  check_train_config(cfg);

  FusionParams<float> params = FusionParams<float>::init(arch, Rng::mix(cfg.seed, 0x1417));
  nn::AdamW<float> opt({.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  FusionTrainResult result{params, {}, 0};
  double best = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(data.size());
  ForwardCache<float> cache;
  const Index steps_per_epoch =
      (Index(data.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const double total_steps = double(steps_per_epoch * cfg.epochs);
  Index step = 0;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(Rng::mix(cfg.seed, 0x5EED0000ULL + std::uint64_t(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle.uniform_index(i)]);

    EpochStats stats{epoch, 0.0, 0.0, 0.0};
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch_size));
      FusionParams<float> grad_sum = FusionParams<float>::zeros(arch);
      for (std::size_t b = start; b < stop; ++b) {
        const FusionSample& s = data[order[b]];
        const Index m = std::min(cfg.m, s.mesh.num_vertices());
        const SampleSet sample = uniform_sample(
            s.mesh, m, Rng::mix(Rng::mix(cfg.seed, std::uint64_t(epoch)), order[b]));
        const auto ex = make_fusion_example<float>(s.mesh, s.features, s.gt, sample, arch);
        FusionParams<float> grad;
        const HybridLoss loss = loss_and_gradient(params, ex, cfg.loss, &grad, &cache);
        if (!std::isfinite(loss.loss) || !grad.all_finite())
          throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step) + " (kl " + format_double(loss.kl) +
                              ", cc " + format_double(loss.cc) + ")");
        nn::update_running_stats(params.geo_mean, params.geo_var, cache.geo_norm, m, arch.norm);
        nn::update_running_stats(params.sem1_mean, params.sem1_var, cache.sem1_norm, m, arch.norm);
        nn::update_running_stats(params.sem2_mean, params.sem2_var, cache.sem2_norm, m, arch.norm);
        auto sums = grad_sum.trainable_tensors();
        const auto parts = grad.trainable_tensors();
        for (std::size_t t = 0; t < sums.size(); ++t) *sums[t] += *parts[t];
        stats.loss += loss.loss;
        stats.kl += loss.kl;
        stats.cc += loss.cc;
      }
      const float inv = 1.0f / float(stop - start);
      std::vector<const nn::Mat<float>*> grads;
      for (auto* t : grad_sum.trainable_tensors()) {
        *t *= inv;
        grads.push_back(t);
      }
      if (cfg.schedule == LrSchedule::Cosine)
        opt.set_learning_rate(cfg.lr * 0.5 * (1.0 + std::cos(M_PI * double(step) / total_steps)));
      opt.step(params.trainable_tensors(), grads);
      ++step;
    }
    const double n = double(data.size());
    stats.loss /= n;
    stats.kl /= n;
    stats.cc /= n;
    result.curve.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (stats.loss < best) {
      best = stats.loss;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

SaliencyMap predict(const Mesh& mesh, const FeatureField& features,
                    const FusionParams<float>& params, Index m, std::uint64_t seed) {
  if (m < 3) throw InvalidArgument("prediction needs m >= 3");
  const SampleSet sample = uniform_sample(mesh, std::min(m, mesh.num_vertices()), seed);
  const auto input = make_fusion_input<float>(mesh, features, sample, params.arch);
  ForwardCache<float> cache;
  const Vec<float> y = forward(params, input, cache, NormPass::Running);
  return SaliencyMap{idw_weights(sample.positions, mesh.vertices()).apply(y.cast<double>())};
}

void save_loss_curve(const std::vector<EpochStats>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "epoch,mean_loss,mean_kl,mean_cc\n";
  for (const auto& e : curve)
    out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.kl) << ','
        << format_double(e.cc) << '\n';
}

std::string arch_to_config(const FusionArch& a) {
  std::ostringstream s;
  s << "fusion.mode=" << to_string(a.mode) << '\n'
    << "fusion.sem_in=" << a.sem_in << '\n'
    << "fusion.sem_hidden=" << a.sem_hidden << '\n'
    << "fusion.hidden=" << a.hidden << '\n'
    << "fusion.heads=" << a.heads << '\n'
    << "fusion.point_dim=" << a.point_dim << '\n'
    << "fusion.pool_k=" << a.pool_k << '\n'
    << "fusion.head_hidden=" << a.head_hidden << '\n'
    << "fusion.norm_eps=" << format_double(a.norm.eps) << '\n'
    << "fusion.norm_momentum=" << format_double(a.norm.momentum) << '\n';
  return s.str();
}

std::string train_to_config(const TrainConfig& c) {
  std::ostringstream s;
  s << "fusion.lr=" << format_double(c.lr) << '\n'
    << "fusion.lr_schedule=" << to_string(c.schedule) << '\n'
    << "fusion.weight_decay=" << format_double(c.weight_decay) << '\n'
    << "fusion.epochs=" << c.epochs << '\n'
    << "fusion.batch_size=" << c.batch_size << '\n'
    << "fusion.m=" << c.m << '\n'
    << "fusion.w_kl=" << format_double(c.loss.kl) << '\n'
    << "fusion.w_cc=" << format_double(c.loss.cc) << '\n'
    << "seed=" << c.seed << '\n';
  return s.str();
}

void save_fusion_checkpoint(const FusionParams<float>& params, const TrainConfig& config,
                            const std::filesystem::path& path) {
  nn::TensorTable table;
  for (const auto& [name, member] : FusionParams<float>::trainable())
    table.tensors.push_back(nn::NamedTensor::from(name, params.*member));
  for (const auto& [name, member] : FusionParams<float>::running())
    table.tensors.push_back(nn::NamedTensor::from(name, params.*member));
  table.config = arch_to_config(params.arch) + train_to_config(config);
  nn::save_tensor_table(table, "SGWT", path);
}

FusionParams<float> load_fusion_checkpoint(const std::filesystem::path& path) {
  const nn::TensorTable table = nn::load_tensor_table("SGWT", path);
  std::map<std::string, std::string> kv;
  std::istringstream lines(table.config);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ParseError("checkpoint config lacks '" + key + "'");
    return it->second;
  };
  FusionArch arch;
  try {
    arch.mode = parse_fusion_mode(get("fusion.mode"));
    arch.sem_in = std::stoll(get("fusion.sem_in"));
    arch.sem_hidden = std::stoll(get("fusion.sem_hidden"));
    arch.hidden = std::stoll(get("fusion.hidden"));
    arch.heads = std::stoll(get("fusion.heads"));
    arch.point_dim = std::stoll(get("fusion.point_dim"));
    arch.pool_k = std::stoll(get("fusion.pool_k"));
    arch.head_hidden = std::stoll(get("fusion.head_hidden"));
    arch.norm.eps = std::stod(get("fusion.norm_eps"));
    arch.norm.momentum = std::stod(get("fusion.norm_momentum"));
  } catch (const std::logic_error&) {
    throw ParseError("malformed checkpoint config");
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  FusionParams<float> p = FusionParams<float>::zeros(arch);
  auto fill = [&](const char* name, nn::Mat<float>& dst) {
    const nn::NamedTensor& t = table.at(name);
    if (t.rows != dst.rows() || t.cols != dst.cols())
      throw ParseError(std::string("tensor '") + name + "' has the wrong shape");
    dst = t.as<float>();
  };
  for (const auto& [name, member] : FusionParams<float>::trainable()) fill(name, p.*member);
  for (const auto& [name, member] : FusionParams<float>::running()) fill(name, p.*member);
  if (!p.all_finite()) throw ParseError("checkpoint holds non-finite weights");
  return p;
}

// ---------------------------------------------------------------------------

#define MESHATTN_INSTANTIATE(Scalar)                                                     \
  template struct FusionParams<Scalar>;                                                 \
  template FusionInput<Scalar> make_fusion_input<Scalar>(const Mesh&, const FeatureField&, \
                                                         const SampleSet&, const FusionArch&); \
  template Vec<Scalar> forward<Scalar>(const FusionParams<Scalar>&, const FusionInput<Scalar>&, \
                                       ForwardCache<Scalar>&, NormPass);                \
  template FusionParams<Scalar> backward<Scalar>(const FusionParams<Scalar>&,           \
                                                 const FusionInput<Scalar>&,            \
                                                 const ForwardCache<Scalar>&, const Vec<Scalar>&); \
  template FusionExample<Scalar> make_fusion_example<Scalar>(                           \
      const Mesh&, const FeatureField&, const SaliencyMap&, const SampleSet&, const FusionArch&); \
  template HybridLoss loss_and_gradient<Scalar>(const FusionParams<Scalar>&,            \
                                                const FusionExample<Scalar>&, LossWeights, \
                                                FusionParams<Scalar>*, ForwardCache<Scalar>*);

MESHATTN_INSTANTIATE(float)
MESHATTN_INSTANTIATE(double)

}  // namespace meshattn
