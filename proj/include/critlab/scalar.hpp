#pragma once

#include <cmath>
#include <limits>

#include <boost/multiprecision/float128.hpp>
#include <Eigen/Core>

namespace critlab {

/// 113-bit binary floating point used where double loses the near-diagonal
/// structure of the pair covariances (det Sigma_3 ~ r^10).
using quad = boost::multiprecision::float128;

template <class S>
inline double to_double(const S& v) {
  return static_cast<double>(v);
}

template <class S>
inline S scalar_epsilon() {
  return std::numeric_limits<S>::epsilon();
}

}  // namespace critlab

namespace Eigen {

// boost 1.74's eigen.hpp predates the NumTraits members Eigen 3.4 queries.
template <>
struct NumTraits<critlab::quad> : GenericNumTraits<critlab::quad> {
  using Real = critlab::quad;
  using NonInteger = critlab::quad;
  using Nested = critlab::quad;
  using Literal = critlab::quad;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 8
  };
  static Real epsilon() { return std::numeric_limits<Real>::epsilon(); }
  static Real dummy_precision() { return Real(1e-28); }
  static Real highest() { return (std::numeric_limits<Real>::max)(); }
  static Real lowest() { return std::numeric_limits<Real>::lowest(); }
  static Real infinity() { return std::numeric_limits<Real>::infinity(); }
  static Real quiet_NaN() { return std::numeric_limits<Real>::quiet_NaN(); }
  static int digits10() { return std::numeric_limits<Real>::digits10; }
};

}  // namespace Eigen
