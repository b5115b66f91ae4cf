#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "critlab/critpoints.hpp"
#include "critlab/intensity.hpp"
#include "critlab/kernel.hpp"

namespace critlab {

struct StudyConfig {
  int M = 500;
  double center = 0;  // window centre for bound studies
  int threads = 1;
  DetectorConfig detector;
  nlohmann::json to_json() const;
};

/// Critical heights of independent realizations on one domain (disc of radius
/// R, or [-R, R] in 1D). Replication k uses derive_seed(seed, stream, k), so
/// studies at different R or windows share realizations.
struct Replications {
  int dim = 2;
  std::string kernel;
  double R = 0;
  int M = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> heights;
  std::int64_t low_confidence = 0;  // replications whose detector raised a flag

  std::size_t size() const { return heights.size(); }
  bool flagged() const;  // more than 2% of replications raised a flag
  std::vector<std::int64_t> counts(double a, double b) const;
};

Replications replicate(const KernelModel& model, double R, int reps, std::uint64_t seed, const StudyConfig& cfg = {});

/// min{R^4 l^2 + R^2 l, R^4} in 2D and min{R^2 l^2 + R l, R^2} in 1D.
double bound_value(int dim, double R, double lambda);

struct MomentReport {
  int dim = 2;
  std::string kernel;
  double R = 0, a = 0, b = 0;
  std::int64_t reps = 0;
  int M = 0;
  std::uint64_t seed = 0;
  double mean = 0, second_moment = 0, variance = 0;
  double se_mean = 0, se_second_moment = 0, se_variance = 0;  // jackknife
  double p_ge1 = 0, p_ge2 = 0;
  double bound_value = 0;
  double fitted_constant = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;
  nlohmann::json to_json() const;
};

/// Moments of the in-window counts of existing replications.
MomentReport summarize(const Replications& reps, double a, double b);

MomentReport estimate_moments(const KernelModel& model, double R, double a, double b, int reps, std::uint64_t seed,
                              const StudyConfig& cfg = {});

/// Leave-one-out standard error of stat(sum x, sum y, n) over paired samples.
template <class Stat>
double jackknife_se(const std::vector<double>& x, const std::vector<double>& y, Stat&& stat) {
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  std::vector<double> loo(n);
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) {
    loo[i] = stat(sx - x[i], sy - y[i], static_cast<double>(n - 1));
    mean += loo[i];
  }
  mean /= static_cast<double>(n);
  double ss = 0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  return std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * ss);
}

struct ConsistencyReport {
  MomentReport empirical;
  double predicted = 0;
  double predicted_se = 0;
  double difference = 0;
  double tolerance = 0;
  bool pass = false;
  nlohmann::json to_json() const;
};

/// Empirical mean against mean_count: |diff| <= 3 combined SE + 2% of the prediction.
ConsistencyReport verify_first_moment(const KernelModel& model, double R, double a, double b, int reps,
                                      std::uint64_t seed, const StudyConfig& cfg = {},
                                      std::int64_t mc_samples = 200000);

struct BoundCell {
  double R = 0, lambda = 0;
  double mean = 0, m2 = 0, se_mean = 0, se_m2 = 0;
  double p_ge1 = 0, p_ge2 = 0;
  double bound_value = 0, ratio = 0;
  bool excluded = false;  // zero estimate or SE above 30% of it
};

struct SlopeFit {
  double fixed = 0;  // the lambda (slope in R) or the R (slope in lambda)
  double slope = 0, intercept = 0;
  double ci_low = 0, ci_high = 0;  // 95%, NaN with two points
  int points = 0;
};

struct ScalingFit {
  std::vector<SlopeFit> in_R;       // one per lambda
  std::vector<SlopeFit> in_lambda;  // one per R
  nlohmann::json to_json() const;
};

struct BoundStudy {
  int dim = 2;
  std::string kernel;
  double center = 0;
  std::int64_t reps = 0;
  int M = 0;
  std::uint64_t seed = 0;
  std::vector<BoundCell> cells;
  double c_star = 0;
  double span = 0;  // max / min ratio over included cells
  double slope_at_max_lambda = std::numeric_limits<double>::quiet_NaN();
  double slope_target = 4;
  bool flagged = false;
  bool pass = false;
  nlohmann::json to_json() const;
  /// dim,R,lambda,mean,m2,se_mean,se_m2,bound_value,ratio,excluded
  void write_csv(std::ostream& os) const;
};

/// Least squares on the log-log table; zero or excluded cells are dropped.
ScalingFit scaling_fit(const BoundStudy& study);

/// Tabulate, fit c*, span and slope; one Replications per R, in any order.
BoundStudy assemble_study(const std::vector<Replications>& per_R, const std::vector<double>& lambdas, double center);

BoundStudy verify_second_moment_bound(const KernelModel& model, const std::vector<double>& R_list,
                                      const std::vector<double>& lambda_list, int reps, std::uint64_t seed,
                                      const StudyConfig& cfg = {});

struct CrossoverReport {
  MomentReport moments;
  double ratio = 0;     // E[N^2] / E[N]
  double ratio_se = 0;  // jackknife
  bool pass = false;    // ratio in [1, 1 + 3 SE] and P[N >= 2] < 0.01
  nlohmann::json to_json() const;
};

CrossoverReport crossover_check(const Replications& reps, double a, double b);

}  // namespace critlab
