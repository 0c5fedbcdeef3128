#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace homog {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;
using CMat3 = Eigen::Matrix3cd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline const cd kI{0.0, 1.0};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define HOMOG_ERROR(Name)          \
  struct Name : Error {            \
    using Error::Error;            \
  }

HOMOG_ERROR(InvalidSpec);
HOMOG_ERROR(EmptyMeasure);
HOMOG_ERROR(RankMismatch);
HOMOG_ERROR(CutoffTooSmall);
HOMOG_ERROR(NotPositiveDefinite);
HOMOG_ERROR(SingularSystem);
HOMOG_ERROR(ConstraintInfeasible);
HOMOG_ERROR(SingularProjection);
HOMOG_ERROR(SingularSymbol);
HOMOG_ERROR(SolverDiverged);
HOMOG_ERROR(PropertyViolation);
HOMOG_ERROR(DegenerateSubspace);
HOMOG_ERROR(DegenerateFit);
HOMOG_ERROR(IncompleteFamily);
HOMOG_ERROR(ConfigError);

#undef HOMOG_ERROR

// [v]x as a matrix, so that cross(v) * w == v.cross(w).
template <class V>
inline Eigen::Matrix<typename V::Scalar, 3, 3> cross_matrix(const V& v) {
  Eigen::Matrix<typename V::Scalar, 3, 3> m;
  m << 0, -v(2), v(1), v(2), 0, -v(0), -v(1), v(0), 0;
  return m;
}

}  // namespace homog
