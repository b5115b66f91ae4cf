#pragma once

#include <stdexcept>
#include <string>

namespace critlab {

enum class ErrorKind {
  Config,             // bad input or unsupported request
  UnsupportedOrder,   // derivative order beyond what the model carries
  Degenerate,         // singular or near-singular covariance block
  NotSampleable,      // spectral measure without a sampler
  Numerical           // iteration or estimator failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace critlab
