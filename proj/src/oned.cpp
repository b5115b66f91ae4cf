#include "critlab/oned.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "critlab/gauss.hpp"
#include "critlab/parallel.hpp"
#include "critlab/seeding.hpp"

namespace critlab {

KernelModel normalize_1d(const KernelModel& model) { return normalize(model); }

nlohmann::json Condition1dReport::to_json() const { return {{"var_f2", var_f2}, {"pass", pass}}; }

Condition1dReport check_conditions_1d(const KernelModel& model) {
  Condition1dReport out;
  out.var_f2 = kernel_derivative<double>(model, {4, 0}, 0.0, 0.0);
  out.pass = out.var_f2 > 1;
  return out;
}

nlohmann::json Detector1dConfig::to_json() const {
  return {{"grid_h", grid_h}, {"tol", tol}, {"max_iter", max_iter}};
}

namespace {

// Root of the k-th derivative inside [lo, hi], whose endpoint values differ in
// sign; Newton steps on the (k+1)-th derivative, bisection when they leave the bracket.
bool bracketed_root(const WaveEnsemble1d& field, int k, double lo, double hi, const Detector1dConfig& cfg,
                    double& root) {
  double glo = field.eval(lo, k);
  if (glo == 0) {
    root = lo;
    return true;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < cfg.max_iter; ++it) {
    const double g = field.eval(x, k);
    if (g == 0) {
      root = x;
      return true;
    }
    if ((g < 0) == (glo < 0)) {
      lo = x;
      glo = g;
    } else {
      hi = x;
    }
    if (hi - lo <= cfg.tol) {
      root = 0.5 * (lo + hi);
      return true;
    }
    const double d = field.eval(x, k + 1);
    double next = d != 0 ? x - g / d : lo - 1;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 0.25 * cfg.tol) {
      root = next;
      return true;
    }
    x = next;
  }
  return false;
}

}  // namespace

CriticalPointSet1d find_critical_points_1d(const WaveEnsemble1d& field, double R, const Detector1dConfig& cfg) {
  if (!(R > 0)) throw Error(ErrorKind::Config, "interval half-length must be positive");
  if (!(cfg.grid_h > 0 && cfg.grid_h <= 0.4)) throw Error(ErrorKind::Config, "grid_h must lie in (0, 0.4]");
  const auto cells = static_cast<Eigen::Index>(std::ceil(2 * R / cfg.grid_h));
  const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(cells + 1, -R, R);
  const Eigen::VectorXd g = field.eval_grid(xs, 1);
  const Eigen::VectorXd d = field.eval_grid(xs, 2);

  CriticalPointSet1d out;
  out.R = R;
  std::vector<double> roots;
  auto solve = [&](double lo, double hi) {
    double root;
    if (bracketed_root(field, 1, lo, hi, cfg, root)) {
      roots.push_back(root);
    } else {
      ++out.unresolved;
    }
  };
  for (Eigen::Index i = 0; i < cells; ++i) {
    const double lo = xs(i), hi = xs(i + 1);
    if (g(i) == 0) {
      roots.push_back(lo);
    } else if (g(i + 1) != 0 && (g(i) < 0) != (g(i + 1) < 0)) {
      solve(lo, hi);
    } else if (g(i + 1) != 0 && (d(i) < 0) != (d(i + 1) < 0)) {
      // f' may dip across zero and come back inside the cell
      double e;
      if (!bracketed_root(field, 2, lo, hi, cfg, e)) {
        ++out.unresolved;
        continue;
      }
      const double ge = field.eval(e, 1);
      if (ge == 0) {
        roots.push_back(e);
      } else if ((ge < 0) != (g(i) < 0)) {
        solve(lo, e);
        solve(e, hi);
      }
    }
  }
  if (g(cells) == 0) roots.push_back(xs(cells));
  std::sort(roots.begin(), roots.end());
  for (double x : roots) {
    if (!out.points.empty() && x - out.points.back().x <= 1e-9) continue;
    out.points.push_back({x, field.eval(x, 0), field.eval(x, 2)});
  }
  return out;
}

std::int64_t count_in_window(const CriticalPointSet1d& set, double a, double b) {
  if (!(a <= b)) throw Error(ErrorKind::Config, "height window needs a <= b");
  return std::count_if(set.points.begin(), set.points.end(),
                       [&](const CriticalPoint1d& p) { return p.height >= a && p.height <= b; });
}

Count1d count_critical_1d(const WaveEnsemble1d& field, double R, double a, double b, const Detector1dConfig& cfg) {
  const auto set = find_critical_points_1d(field, R, cfg);
  return {count_in_window(set, a, b), set.unresolved > 0};
}

double mean_count_1d(const KernelModel& model, double R, double a, double b) {
  if (!(a <= b)) throw Error(ErrorKind::Config, "height window needs a <= b");
  if (a == b) return 0;
  const Point o = Point::Zero();
  const std::vector<FieldItem> items{{o, {2, 0}}, {o, {0, 0}}, {o, {1, 0}}};
  const Matrix<double> joint = joint_covariance<double>(model, items);
  const auto law = gaussian_regression<double>(joint, 1);
  const double sigma = std::sqrt(law.cov(0, 0));
  const Eigen::Matrix2d zz = joint.bottomRightCorner(2, 2);
  const Eigen::Matrix2d zinv = zz.inverse();
  const double norm = 1 / (2 * std::numbers::pi * std::sqrt(zz.determinant()));
  auto integrand = [&](double s) {
    const double density = norm * std::exp(-0.5 * zinv(0, 0) * s * s);
    const double mu = law.coeff(0, 0) * s;
    const double folded = sigma * std::sqrt(2 / std::numbers::pi) * std::exp(-mu * mu / (2 * sigma * sigma)) +
                          mu * std::erf(mu / (sigma * std::numbers::sqrt2));
    return density * folded;
  };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, a, b, 15, 1e-13);
  return 2 * R * integral;
}

Replications replicate_1d(const KernelModel& model, double R, int reps, std::uint64_t seed, const StudyConfig& cfg,
                          const Detector1dConfig& detector) {
  if (reps < 1) throw Error(ErrorKind::Config, "need at least one replication");
  Replications out;
  out.dim = 1;
  out.kernel = model.id();
  out.R = R;
  out.M = cfg.M;
  out.seed = seed;
  out.heights.resize(static_cast<std::size_t>(reps));
  std::vector<char> low(static_cast<std::size_t>(reps), 0);
  parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t k) {
    const auto field = sample_field_1d(model, cfg.M, derive_seed(seed, stream::kField1d, k));
    const auto set = find_critical_points_1d(field, R, detector);
    auto& hs = out.heights[k];
    hs.reserve(set.points.size());
    for (const auto& p : set.points) hs.push_back(p.height);
    low[k] = set.unresolved > 0 ? 1 : 0;
  });
  out.low_confidence = std::count(low.begin(), low.end(), 1);
  return out;
}

MomentReport estimate_moments_1d(const KernelModel& model, double R, double a, double b, int reps,
                                 std::uint64_t seed, const StudyConfig& cfg) {
  if (reps < 50) throw Error(ErrorKind::Config, "moment estimation needs at least 50 replications");
  return summarize(replicate_1d(model, R, reps, seed, cfg), a, b);
}

ConsistencyReport verify_first_moment_1d(const KernelModel& model, double R, double a, double b, int reps,
                                         std::uint64_t seed, const StudyConfig& cfg) {
  ConsistencyReport out;
  out.empirical = estimate_moments_1d(model, R, a, b, reps, seed, cfg);
  out.predicted = mean_count_1d(model, R, a, b);
  out.difference = out.empirical.mean - out.predicted;
  out.tolerance = 3 * out.empirical.se_mean;
  out.pass = std::abs(out.difference) <= out.tolerance;
  return out;
}

BoundStudy verify_bound_1d(const KernelModel& model, const std::vector<double>& R_list,
                           const std::vector<double>& lambda_list, int reps, std::uint64_t seed,
                           const StudyConfig& cfg) {
  if (R_list.empty()) throw Error(ErrorKind::Config, "bound study grid is empty");
  std::vector<Replications> per_R;
  for (double R : R_list) per_R.push_back(replicate_1d(model, R, reps, seed, cfg));
  return assemble_study(per_R, lambda_list, cfg.center);
}

}  // namespace critlab
