#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "critlab/gauss.hpp"
#include "critlab/kernel.hpp"

namespace critlab {

struct McConfig {
  std::int64_t samples = 200000;  // Hessian draws, antithetic pairs count twice
  std::uint64_t seed = 1;
  std::int64_t batch = 10000;
  int threads = 1;
  nlohmann::json to_json() const;
};

struct Estimate {
  double value = 0;
  double std_error = 0;
};

struct IntensityValue {
  int which = 0;
  double r = std::numeric_limits<double>::quiet_NaN();
  double s = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
  double estimate = 0;
  double std_error = 0;
  double density = 0;  // gamma factor in front of the conditional expectation
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::string kernel;
  nlohmann::json to_json() const;
};

/// Law of the Hessian entries (h11, h12, h22) at one or two points given a
/// conditioning vector Z = z:
///   H | Z = z  ~  N(mean_map * z, factor * factor^T).
/// Built in quad precision; `factor` is a rank-revealing square root, so a
/// conditional covariance with exact null directions is fine.
struct HessianLaw {
  int blocks = 1;
  Eigen::MatrixXd mean_map;
  Eigen::MatrixXd factor;
  Matrix<quad> z_cov;
  int rank = 0;

  /// Density of Z at z, evaluated in quad precision.
  double density(const Eigen::VectorXd& z) const;
};

HessianLaw hessian_law(const KernelModel& model, const std::vector<Point>& hessian_points,
                       const std::vector<FieldItem>& conditioning);

/// E|det H(x)| (one block) or E|det H(x) det H(y)| (two blocks) for each z,
/// all from one set of antithetic draws (common random numbers).
std::vector<Estimate> mc_abs_det(const HessianLaw& law, const std::vector<Eigen::VectorXd>& zs,
                                 const McConfig& mc);

/// Pair laws are taken at x = 0, y = (r, 0).
IntensityValue intensity_I3(const KernelModel& model, double s, const McConfig& mc);
IntensityValue intensity_I1(const KernelModel& model, double r, double s, double t, const McConfig& mc);
IntensityValue intensity_I2(const KernelModel& model, double r, double s, const McConfig& mc);
IntensityValue intensity_I4(const KernelModel& model, double r, const McConfig& mc);
IntensityValue intensity_I5(const KernelModel& model, const McConfig& mc);

/// pi R^2 * int_a^b I3(s) ds. The conditional mean of the Hessian is linear
/// in s, so for each draw the height integral of phi(s) |det| is done exactly
/// through Gaussian partial moments; a, b may be infinite.
Estimate mean_count(const KernelModel& model, double R, double a, double b, const McConfig& mc);

/// int_a^b phi(s) |A s^2 + B s + C| ds.
double gaussian_abs_quadratic_integral(double A, double B, double C, double a, double b);

struct BoundConfig {
  double delta = 0;  // <= 0 selects the default
  int r_grid = 64;
  double r_min = 1e-3;
  int heights = 33;
  int golden_iterations = 24;
  McConfig mc{20000, 1, 10000, 1};
};

struct SupEstimate {
  double value = 0;   // grid maximum of the intensity
  double std_error = 0;
  double r = std::numeric_limits<double>::quiet_NaN();
  double s = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
  nlohmann::json to_json() const;
};

struct BoundReport {
  double R = 0, a = 0, b = 0, delta = 0, area = 0;
  SupEstimate sup_I1, sup_I2, sup_I3, sup_I4;
  Estimate I5;
  double off_diagonal = 0;   // Area^2 (b-a)^2 sup I1
  double near_diagonal = 0;  // Area (b-a) sup I2
  double on_diagonal = 0;    // Area (b-a) sup I3
  double windowed = 0;
  double unwindowed = 0;     // Area^2 sup I4 + Area I5
  double prediction = 0;     // min of the two
  /// Window width below which the windowed prediction is the smaller one,
  /// holding the height suprema fixed.
  double crossover_width = 0;
  std::string caveat;
  nlohmann::json to_json() const;
};

/// Default delta: the largest of {1, 0.5, 0.25} with no degenerate pair on the
/// near-diagonal part of the r-grid.
double default_delta(const KernelModel& model, const BoundConfig& cfg);

BoundReport bound_predict(const KernelModel& model, double R, double a, double b, const BoundConfig& cfg);

struct AsymptoticsRow {
  double r = 0;
  double det4_over_r4 = 0;
  double n_over_r2 = 0;
  double sigma1_sq = 0;
  bool flagged = false;  // below 1e-4: excluded from extrapolation
};

struct AsymptoticsReport {
  std::vector<AsymptoticsRow> rows;
  double limit_det4 = 0, limit_sigma1 = 0, limit_n = 0;            // extrapolated
  double predicted_det4 = 0, predicted_sigma1 = 0;                 // from kernel moments
  double fit_c3 = 0, fit_c5 = 0, fit_residual = 0;                 // det4/r^4 = c3 + c5 r^2
  nlohmann::json to_json() const;
};

/// N(r): product of the largest two of E[H_ij^2 | grad f(x) = grad f(y) = 0].
double conditional_hessian_product(const KernelModel& model, double r);

AsymptoticsReport near_diagonal_asymptotics(const KernelModel& model, const std::vector<double>& r_list);

}  // namespace critlab
