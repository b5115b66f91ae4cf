#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "critlab/kernel.hpp"
#include "critlab/moments.hpp"
#include "critlab/simulate.hpp"

namespace critlab {

/// The process is the restriction of an isotropic kernel to the first axis,
/// kappa(x) = kappa((x, 0)); normalization is the same map as in 2D.
KernelModel normalize_1d(const KernelModel& model);

struct Condition1dReport {
  double var_f2 = 0;  // d^4 kappa(0)
  bool pass = false;  // var_f2 > 1
  nlohmann::json to_json() const;
};

Condition1dReport check_conditions_1d(const KernelModel& model);

struct Detector1dConfig {
  double grid_h = 0.3;
  double tol = 1e-12;  // bracket width at which a root is accepted
  int max_iter = 100;
  nlohmann::json to_json() const;
};

struct CriticalPoint1d {
  double x = 0;
  double height = 0;
  double curvature = 0;  // f''(x)
};

struct CriticalPointSet1d {
  std::vector<CriticalPoint1d> points;  // increasing x, all in [-R, R]
  double R = 0;
  std::int64_t unresolved = 0;  // brackets that did not converge
};

CriticalPointSet1d find_critical_points_1d(const WaveEnsemble1d& field, double R, const Detector1dConfig& cfg = {});

std::int64_t count_in_window(const CriticalPointSet1d& set, double a, double b);

struct Count1d {
  std::int64_t count = 0;
  bool flagged = false;
};

Count1d count_critical_1d(const WaveEnsemble1d& field, double R, double a, double b, const Detector1dConfig& cfg = {});

/// 2R * int_a^b p_f(s) p_f'(0) E[|f''| | f = s, f' = 0] ds, by quadrature of
/// the folded-normal mean.
double mean_count_1d(const KernelModel& model, double R, double a, double b);

Replications replicate_1d(const KernelModel& model, double R, int reps, std::uint64_t seed,
                          const StudyConfig& cfg = {}, const Detector1dConfig& detector = {});

MomentReport estimate_moments_1d(const KernelModel& model, double R, double a, double b, int reps,
                                 std::uint64_t seed, const StudyConfig& cfg = {});

/// Empirical mean against mean_count_1d: |diff| <= 3 SE.
ConsistencyReport verify_first_moment_1d(const KernelModel& model, double R, double a, double b, int reps,
                                         std::uint64_t seed, const StudyConfig& cfg = {});

BoundStudy verify_bound_1d(const KernelModel& model, const std::vector<double>& R_list,
                           const std::vector<double>& lambda_list, int reps, std::uint64_t seed,
                           const StudyConfig& cfg = {});

}  // namespace critlab
