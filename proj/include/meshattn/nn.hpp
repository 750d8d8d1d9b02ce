#pragma once

// Small dense building blocks shared by the saliency network and the
// scanpath policy: initialisation, activations, batch normalisation over
// the rows of a matrix, row softmax, decoupled-weight-decay Adam and a
// named tensor table for checkpoints.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "meshattn/common.hpp"
#include "meshattn/rng.hpp"

namespace meshattn::nn {

template <typename Scalar>
using Mat = RowMatrix<Scalar>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Uniform in +-1/sqrt(fan_in), filled row by row from `rng`.
template <typename Scalar>
Mat<Scalar> uniform_init(Index rows, Index cols, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Mat<Scalar> out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out(r, c) = Scalar(rng.uniform(-bound, bound));
  return out;
}

template <typename Derived>
void relu_inplace(Eigen::MatrixBase<Derived>& x) {
  x = x.cwiseMax(typename Derived::Scalar(0));
}

/// Zeroes `grad` wherever the rectifier output `activated` was not positive.
template <typename DerivedG, typename DerivedA>
void relu_backward(Eigen::MatrixBase<DerivedG>& grad,
                   const Eigen::MatrixBase<DerivedA>& activated) {
  using Scalar = typename DerivedG::Scalar;
  grad = (activated.array() > Scalar(0)).select(grad, Scalar(0));
}

/// Stable row-wise softmax.
template <typename Scalar>
void softmax_rows(Mat<Scalar>& x) {
  for (Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

template <typename Scalar>
Scalar logistic(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// Per-channel normalisation over the rows of a batch.
struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

template <typename Scalar>
struct BatchNormCache {
  Mat<Scalar> xhat;
  RowVec<Scalar> mean;
  RowVec<Scalar> var;  // biased
  RowVec<Scalar> inv_std;
};

/// Training-mode forward with batch statistics (biased variance).
template <typename Scalar>
Mat<Scalar> batch_norm_train(const Mat<Scalar>& z, const Mat<Scalar>& gamma,
                             const Mat<Scalar>& beta, BatchNormCache<Scalar>& cache,
                             const BatchNormOptions& opt) {
  const Index m = z.rows();
  cache.mean = z.colwise().mean();
  const Mat<Scalar> centered = z.rowwise() - cache.mean;
  cache.var = centered.colwise().squaredNorm() / Scalar(m);
  cache.inv_std = (cache.var.array() + Scalar(opt.eps)).rsqrt();
  cache.xhat = centered.array().rowwise() * cache.inv_std.array();
  return (cache.xhat.array().rowwise() * gamma.row(0).array()).rowwise() +
         beta.row(0).array();
}

/// Blends batch statistics of `rows` points into running estimates; the
/// variance enters in its unbiased form (biased for a single row).
template <typename Scalar>
void update_running_stats(Mat<Scalar>& running_mean, Mat<Scalar>& running_var,
                          const BatchNormCache<Scalar>& cache, Index rows,
                          const BatchNormOptions& opt) {
  const Scalar mom(opt.momentum);
  const Scalar unbias = rows > 1 ? Scalar(rows) / Scalar(rows - 1) : Scalar(1);
  running_mean = (Scalar(1) - mom) * running_mean + mom * cache.mean;
  running_var = (Scalar(1) - mom) * running_var + (mom * unbias) * cache.var;
}

template <typename Scalar>
Mat<Scalar> batch_norm_eval(const Mat<Scalar>& z, const Mat<Scalar>& gamma,
                            const Mat<Scalar>& beta, const Mat<Scalar>& running_mean,
                            const Mat<Scalar>& running_var, const BatchNormOptions& opt) {
  const RowVec<Scalar> scale =
      gamma.row(0).array() * (running_var.row(0).array() + Scalar(opt.eps)).rsqrt();
  const RowVec<Scalar> shift = beta.row(0).array() - running_mean.row(0).array() * scale.array();
  return (z.array().rowwise() * scale.array()).rowwise() + shift.array();
}

/// Returns d loss / d z; accumulates d gamma and d beta.
template <typename Scalar>
Mat<Scalar> batch_norm_backward(const Mat<Scalar>& dout, const Mat<Scalar>& gamma,
                                const BatchNormCache<Scalar>& cache, Mat<Scalar>& dgamma,
                                Mat<Scalar>& dbeta) {
  const Index m = dout.rows();
  dgamma += (dout.array() * cache.xhat.array()).colwise().sum().matrix();
  dbeta += dout.colwise().sum();
  const Mat<Scalar> dxhat = dout.array().rowwise() * gamma.row(0).array();
  const RowVec<Scalar> sum_d = dxhat.colwise().sum();
  const RowVec<Scalar> sum_dx = (dxhat.array() * cache.xhat.array()).colwise().sum();
  Mat<Scalar> dz = (Scalar(m) * dxhat.array()).rowwise() - sum_d.array();
  dz.array() -= cache.xhat.array().rowwise() * sum_dx.array();
  dz.array().rowwise() *= cache.inv_std.array() / Scalar(m);
  return dz;
}

/// Adam with decoupled weight decay; weight_decay = 0 gives plain Adam.
struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

template <typename Scalar>
class AdamW {
 public:
  explicit AdamW(AdamOptions opt) : opt_(opt) {}

  /// `params[i]` is updated in place from `grads[i]`; moment buffers are
  /// created on the first call and matched by position afterwards.
  void step(const std::vector<Mat<Scalar>*>& params,
            const std::vector<const Mat<Scalar>*>& grads) {
    if (first_.empty()) {
      for (const auto* p : params) {
        first_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
        second_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, double(t_));
    const Scalar b1(opt_.beta1), b2(opt_.beta2);
    const Scalar step_size(opt_.lr / c1), root_c2(std::sqrt(c2)), eps(opt_.eps);
    const Scalar decay(1.0 - opt_.lr * opt_.weight_decay);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Mat<Scalar>& p = *params[i];
      const Mat<Scalar>& g = *grads[i];
      first_[i] = b1 * first_[i] + (Scalar(1) - b1) * g;
      second_[i] = b2 * second_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
      if (opt_.weight_decay != 0.0) p *= decay;
      p.array() -= step_size * first_[i].array() /
                   (second_[i].array().sqrt() / root_c2 + eps);
    }
  }

  double learning_rate() const { return opt_.lr; }
  void set_learning_rate(double lr) { opt_.lr = lr; }

 private:
  AdamOptions opt_;
  std::vector<Mat<Scalar>> first_, second_;
  std::int64_t t_ = 0;
};

/// Global L2 norm over a gradient list, scaled down to `max_norm` if above.
template <typename Scalar>
double clip_grad_norm(const std::vector<Mat<Scalar>*>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto* g : grads) sq += double(g->squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm)
    for (auto* g : grads) *g *= Scalar(max_norm / norm);
  return norm;
}

/// Checkpoint entry: f32 payload, row-major.
struct NamedTensor {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::vector<float> data;

  template <typename Derived>
  static NamedTensor from(std::string name, const Eigen::MatrixBase<Derived>& m) {
    NamedTensor t{std::move(name), m.rows(), m.cols(), {}};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<float>(m(r, c)));
    return t;
  }

  template <typename Scalar>
  Mat<Scalar> as() const {
    Mat<Scalar> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = Scalar(data[static_cast<std::size_t>(i)]);
    return m;
  }
};

struct TensorTable {
  std::vector<NamedTensor> tensors;
  std::string config;  // key=value lines echoed for reproducibility

  const NamedTensor& at(const std::string& name) const;
};

/// magic, u32 version 1, u32 count, then per tensor (name, u32 rows,
/// u32 cols, f32 data), then the config echo string.
void save_tensor_table(const TensorTable& table, const char (&magic)[5],
                       const std::filesystem::path& path);
TensorTable load_tensor_table(const char (&magic)[5], const std::filesystem::path& path);

}  // namespace meshattn::nn
