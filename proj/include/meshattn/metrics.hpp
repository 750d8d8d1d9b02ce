#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "meshattn/common.hpp"

namespace meshattn {

/// Denominator guard of the KL divergence and of internal normalisation.
inline constexpr double kSaliencyEps = 1e-8;

/// Per-vertex nonnegative scores.
struct SaliencyMap {
  VectorXd values;

  Index size() const { return values.size(); }
  bool is_normalized(double tol = 1e-9) const {
    return std::abs(values.sum() - 1.0) <= tol;
  }
  SaliencyMap normalized() const;
};

/// Fixated vertex indices; repeats allowed (several observers).
using FixationSet = std::vector<Index>;

namespace detail {

template <typename Derived>
void check_same_length(const Eigen::MatrixBase<Derived>& a, Index b) {
  if (a.size() != b)
    throw LengthMismatch("saliency maps differ in length (" +
                         std::to_string(a.size()) + " vs " + std::to_string(b) +
                         ")");
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> as_distribution(
    const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar sum = x.sum();
  if (std::abs(sum - Scalar(1)) <= Scalar(1e-9)) return x;
  if (!(sum > Scalar(0)))
    throw InvalidArgument("saliency map has no positive mass");
  return x / sum;
}

}  // namespace detail

/// KL(gt || pred) in nats. Maps that do not sum to one are normalised
/// first; terms with gt_i = 0 contribute nothing.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar kl_div(const Eigen::MatrixBase<DerivedA>& gt,
                                 const Eigen::MatrixBase<DerivedB>& pred) {
  using Scalar = typename DerivedA::Scalar;
  detail::check_same_length(gt, pred.size());
  const auto y = detail::as_distribution(gt);
  const auto p = detail::as_distribution(pred);
  Scalar kl = 0;
  for (Index i = 0; i < y.size(); ++i)
    if (y[i] > Scalar(0))
      kl += y[i] * std::log(y[i] / (p[i] + Scalar(kSaliencyEps)));
  return kl;
}

struct Correlation {
  double value = 0.0;
  bool zero_variance = false;
};

/// Pearson correlation on raw values. A constant argument yields
/// value 0 with `zero_variance` set.
template <typename DerivedA, typename DerivedB>
Correlation cc_checked(const Eigen::MatrixBase<DerivedA>& gt,
                       const Eigen::MatrixBase<DerivedB>& pred) {
  detail::check_same_length(gt, pred.size());
  if (gt.size() < 2) throw LengthMismatch("correlation needs >= 2 entries");
  const auto a = (gt.array() - gt.mean()).eval();
  const auto b = (pred.array() - pred.mean()).eval();
  const double saa = a.square().sum();
  const double sbb = b.square().sum();
  if (!(saa > 0.0) || !(sbb > 0.0)) return {0.0, true};
  return {(a * b).sum() / (std::sqrt(saa) * std::sqrt(sbb)), false};
}

template <typename DerivedA, typename DerivedB>
double cc(const Eigen::MatrixBase<DerivedA>& gt,
          const Eigen::MatrixBase<DerivedB>& pred) {
  return cc_checked(gt, pred).value;
}

/// Mean z-score of `pred` at the fixations, population standard deviation.
template <typename Derived>
double nss(const Eigen::MatrixBase<Derived>& pred, const FixationSet& fix) {
  if (fix.empty()) throw InvalidArgument("NSS needs at least one fixation");
  const double mean = pred.mean();
  const double sigma =
      std::sqrt((pred.array() - mean).square().sum() / double(pred.size()));
  if (!(sigma > 0.0)) throw ZeroVariance("NSS of a constant map is undefined");
  double acc = 0.0;
  for (Index f : fix) {
    if (f < 0 || f >= pred.size())
      throw InvalidArgument("fixation index out of range");
    acc += (pred[f] - mean) / sigma;
  }
  return acc / double(fix.size());
}

/// AUC-Judd over distinct fixated vertices (positives) vs all others.
///
/// Thresholds are the distinct predicted values at fixated vertices; the
/// ROC polyline from (0,0) through each threshold to (1,1) is integrated
/// with the trapezoid rule, which credits ties half.
template <typename Derived>
double auc_judd(const Eigen::MatrixBase<Derived>& pred,
                const FixationSet& fix) {
  const Index n = pred.size();
  if (fix.empty()) throw InvalidArgument("AUC needs at least one fixation");
  std::vector<char> fixated(static_cast<std::size_t>(n), 0);
  for (Index f : fix) {
    if (f < 0 || f >= n) throw InvalidArgument("fixation index out of range");
    fixated[static_cast<std::size_t>(f)] = 1;
  }
  std::vector<double> pos, neg;
  for (Index i = 0; i < n; ++i)
    (fixated[static_cast<std::size_t>(i)] ? pos : neg).push_back(pred[i]);
  if (neg.empty()) throw AllFixated("every vertex is fixated");

  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::sort(neg.begin(), neg.end(), std::greater<>());
  const double np = double(pos.size()), nn = double(neg.size());

  double area = 0.0, prev_tp = 0.0, prev_fp = 0.0;
  std::size_t ip = 0, in = 0;
  while (ip < pos.size()) {
    const double t = pos[ip];
    while (ip < pos.size() && pos[ip] >= t) ++ip;
    while (in < neg.size() && neg[in] >= t) ++in;
    const double tp = double(ip) / np, fp = double(in) / nn;
    area += (fp - prev_fp) * (tp + prev_tp) * 0.5;
    prev_tp = tp;
    prev_fp = fp;
  }
  area += (1.0 - prev_fp) * (1.0 + prev_tp) * 0.5;
  return area;
}

template <typename DerivedA, typename DerivedB>
double mse(const Eigen::MatrixBase<DerivedA>& gt,
           const Eigen::MatrixBase<DerivedB>& pred) {
  detail::check_same_length(gt, pred.size());
  if (gt.size() == 0) return 0.0;
  return (gt - pred).squaredNorm() / double(gt.size());
}

}  // namespace meshattn
