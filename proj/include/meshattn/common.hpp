#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace meshattn {

using Index = std::int64_t;

template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Points3d = Points3<double>;
using Faces = Eigen::Matrix<Index, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Vec3 = Eigen::Vector3d;
using MatrixXd = RowMatrix<double>;
using MatrixXf = RowMatrix<float>;
using VectorXd = Eigen::VectorXd;

/// Base of every error this library throws. `kind()` is a stable
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MESHATTN_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  }

MESHATTN_DEFINE_ERROR(ParseError);
MESHATTN_DEFINE_ERROR(DegenerateMesh);
MESHATTN_DEFINE_ERROR(InvalidCount);
MESHATTN_DEFINE_ERROR(IsolatedVertex);
MESHATTN_DEFINE_ERROR(LengthMismatch);
MESHATTN_DEFINE_ERROR(ZeroVariance);
MESHATTN_DEFINE_ERROR(AllFixated);
MESHATTN_DEFINE_ERROR(TooShort);
MESHATTN_DEFINE_ERROR(ShapeMismatch);
MESHATTN_DEFINE_ERROR(NoCoverage);
MESHATTN_DEFINE_ERROR(DimMismatch);
MESHATTN_DEFINE_ERROR(NonFiniteLoss);
MESHATTN_DEFINE_ERROR(NonFinite);
MESHATTN_DEFINE_ERROR(InvalidArgument);
MESHATTN_DEFINE_ERROR(IoError);

#undef MESHATTN_DEFINE_ERROR

}  // namespace meshattn
