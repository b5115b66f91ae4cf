#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "critlab/kernel.hpp"

namespace critlab {

/// f(x) = amplitude * sum_j cos(<s_j, x> + phi_j), with amplitude sqrt(2 kappa(0) / M).
class WaveEnsemble {
 public:
  struct Jet {
    double value = 0;
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
    Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
  };

  /// Explicit waves, used for deterministic test fields.
  static WaveEnsemble from_waves(Eigen::Matrix2Xd wavevectors, Eigen::VectorXd phases, double amplitude);

  int size() const { return static_cast<int>(phases_.size()); }
  double amplitude() const { return amplitude_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& kernel_id() const { return kernel_id_; }
  const Eigen::Matrix2Xd& wavevectors() const { return wavevectors_; }
  const Eigen::VectorXd& phases() const { return phases_; }

  /// d^alpha f(x) for |alpha| <= 2, term by term.
  double eval(const Point& x, MultiIndex alpha) const;
  Jet jet(const Point& x) const;

  struct GridJet {
    Eigen::MatrixXd g1, g2, h11, h12, h22;  // (i, j) holds the value at (xs(i), ys(j))
  };
  /// Gradient and Hessian on the tensor grid xs x ys.
  GridJet jet_grid(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) const;

  /// Provenance only: (seed, M, kernel id) rebuild the ensemble.
  nlohmann::json to_json() const;

 private:
  friend WaveEnsemble sample_field(const KernelModel& model, int M, std::uint64_t seed);

  Eigen::Matrix2Xd wavevectors_;
  Eigen::VectorXd phases_;
  double amplitude_ = 0;
  std::uint64_t seed_ = 0;
  std::string kernel_id_ = "explicit";
};

/// Wavevectors i.i.d. from the spectral measure (stratified in angle on the
/// circle), phases i.i.d. uniform; deterministic in (seed, M).
WaveEnsemble sample_field(const KernelModel& model, int M, std::uint64_t seed);

/// 1D analogue: f(x) = amplitude * sum_j cos(w_j x + phi_j).
class WaveEnsemble1d {
 public:
  static WaveEnsemble1d from_waves(Eigen::VectorXd frequencies, Eigen::VectorXd phases, double amplitude);

  int size() const { return static_cast<int>(phases_.size()); }
  double amplitude() const { return amplitude_; }
  const Eigen::VectorXd& frequencies() const { return frequencies_; }

  /// k-th derivative, k <= 3.
  double eval(double x, int k) const;
  /// k-th derivative on a grid, k <= 3.
  Eigen::VectorXd eval_grid(const Eigen::VectorXd& xs, int k) const;

 private:
  friend WaveEnsemble1d sample_field_1d(const KernelModel& model, int M, std::uint64_t seed);

  Eigen::VectorXd frequencies_;
  Eigen::VectorXd phases_;
  double amplitude_ = 0;
};

/// Frequencies from the marginal of the spectral measure on the first axis,
/// so that Cov[f(0), f(x)] = kappa((x, 0)).
WaveEnsemble1d sample_field_1d(const KernelModel& model, int M, std::uint64_t seed);

}  // namespace critlab
