#include "critlab/moments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>

#include <boost/math/distributions/students_t.hpp>

#include "critlab/json_util.hpp"
#include "critlab/parallel.hpp"
#include "critlab/seeding.hpp"
#include "critlab/simulate.hpp"

namespace critlab {

nlohmann::json StudyConfig::to_json() const {
  return {{"M", M}, {"center", center}, {"threads", threads}, {"detector", detector.to_json()}};
}

bool Replications::flagged() const { return low_confidence > 0.02 * static_cast<double>(heights.size()); }

std::vector<std::int64_t> Replications::counts(double a, double b) const {
  if (!(a <= b)) throw Error(ErrorKind::Config, "height window needs a <= b");
  std::vector<std::int64_t> out(heights.size());
  for (std::size_t k = 0; k < heights.size(); ++k)
    out[k] = std::count_if(heights[k].begin(), heights[k].end(), [&](double h) { return h >= a && h <= b; });
  return out;
}

Replications replicate(const KernelModel& model, double R, int reps, std::uint64_t seed, const StudyConfig& cfg) {
  if (reps < 1) throw Error(ErrorKind::Config, "need at least one replication");
  Replications out;
  out.dim = 2;
  out.kernel = model.id();
  out.R = R;
  out.M = cfg.M;
  out.seed = seed;
  out.heights.resize(static_cast<std::size_t>(reps));
  std::vector<char> low(static_cast<std::size_t>(reps), 0);
  parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t k) {
    const auto field = sample_field(model, cfg.M, derive_seed(seed, stream::kField, k));
    const auto set = find_critical_points(field, R, cfg.detector);
    auto& hs = out.heights[k];
    hs.reserve(set.points.size());
    for (const auto& p : set.points) hs.push_back(p.height);
    low[k] = set.diagnostics.low_confidence ? 1 : 0;
  });
  out.low_confidence = std::count(low.begin(), low.end(), 1);
  return out;
}

double bound_value(int dim, double R, double lambda) {
  if (dim == 1) {
    if (std::isinf(lambda)) return R * R;
    return std::min(R * R * lambda * lambda + R * lambda, R * R);
  }
  const double r2 = R * R, r4 = r2 * r2;
  if (std::isinf(lambda)) return r4;
  return std::min(r4 * lambda * lambda + r2 * lambda, r4);
}

MomentReport summarize(const Replications& reps, double a, double b) {
  const auto counts = reps.counts(a, b);
  MomentReport out;
  out.dim = reps.dim;
  out.kernel = reps.kernel;
  out.R = reps.R;
  out.a = a;
  out.b = b;
  out.reps = static_cast<std::int64_t>(counts.size());
  out.M = reps.M;
  out.seed = reps.seed;
  out.flagged = reps.flagged();
  out.bound_value = bound_value(reps.dim, reps.R, b - a);
  const double n = static_cast<double>(counts.size());
  std::vector<double> x(counts.size()), y(counts.size());
  std::int64_t ge1 = 0, ge2 = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    x[k] = static_cast<double>(counts[k]);
    y[k] = x[k] * x[k];
    ge1 += counts[k] >= 1;
    ge2 += counts[k] >= 2;
  }
  double sx = 0, sy = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    sx += x[k];
    sy += y[k];
  }
  out.mean = sx / n;
  out.second_moment = sy / n;
  out.variance = out.second_moment - out.mean * out.mean;
  out.se_mean = jackknife_se(x, y, [](double s, double, double m) { return s / m; });
  out.se_second_moment = jackknife_se(x, y, [](double, double s, double m) { return s / m; });
  out.se_variance = jackknife_se(x, y, [](double s1, double s2, double m) { return s2 / m - (s1 / m) * (s1 / m); });
  out.p_ge1 = static_cast<double>(ge1) / n;
  out.p_ge2 = static_cast<double>(ge2) / n;
  return out;
}

nlohmann::json MomentReport::to_json() const {
  return {{"dim", dim},
          {"kernel", kernel},
          {"R", R},
          {"a", json_number(a)},
          {"b", json_number(b)},
          {"reps", reps},
          {"M", M},
          {"seed", seed},
          {"mean", mean},
          {"second_moment", second_moment},
          {"variance", variance},
          {"se_mean", se_mean},
          {"se_second_moment", se_second_moment},
          {"se_variance", se_variance},
          {"p_ge1", p_ge1},
          {"p_ge2", p_ge2},
          {"bound_value", bound_value},
          {"fitted_constant", fitted_constant},
          {"flagged", flagged}};
}

MomentReport estimate_moments(const KernelModel& model, double R, double a, double b, int reps, std::uint64_t seed,
                              const StudyConfig& cfg) {
  if (reps < 50) throw Error(ErrorKind::Config, "moment estimation needs at least 50 replications");
  return summarize(replicate(model, R, reps, seed, cfg), a, b);
}

nlohmann::json ConsistencyReport::to_json() const {
  return {{"empirical", empirical.to_json()},
          {"predicted", predicted},
          {"predicted_se", predicted_se},
          {"difference", difference},
          {"tolerance", tolerance},
          {"pass", pass}};
}

ConsistencyReport verify_first_moment(const KernelModel& model, double R, double a, double b, int reps,
                                      std::uint64_t seed, const StudyConfig& cfg, std::int64_t mc_samples) {
  ConsistencyReport out;
  out.empirical = estimate_moments(model, R, a, b, reps, seed, cfg);
  McConfig mc;
  mc.samples = mc_samples;
  mc.seed = seed;
  mc.threads = cfg.threads;
  const auto predicted = mean_count(model, R, a, b, mc);
  out.predicted = predicted.value;
  out.predicted_se = predicted.std_error;
  out.difference = out.empirical.mean - out.predicted;
  out.tolerance = 3 * std::hypot(out.empirical.se_mean, out.predicted_se) + 0.02 * std::abs(out.predicted);
  out.pass = std::abs(out.difference) <= out.tolerance;
  return out;
}

namespace {

SlopeFit ols(double fixed, const std::vector<double>& lx, const std::vector<double>& ly) {
  SlopeFit fit;
  fit.fixed = fixed;
  fit.points = static_cast<int>(lx.size());
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (lx.size() < 3) {
    fit.ci_low = fit.ci_high = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  double sse = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - fit.intercept - fit.slope * lx[i];
    sse += r * r;
  }
  const double se = std::sqrt(sse / (n - 2) / sxx);
  const boost::math::students_t dist(n - 2);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  fit.ci_low = fit.slope - t * se;
  fit.ci_high = fit.slope + t * se;
  return fit;
}

nlohmann::json slope_json(const SlopeFit& f) {
  return {{"fixed", f.fixed}, {"slope", f.slope}, {"intercept", f.intercept},
          {"ci_low", f.ci_low}, {"ci_high", f.ci_high}, {"points", f.points}};
}

}  // namespace

nlohmann::json ScalingFit::to_json() const {
  nlohmann::json r = nlohmann::json::array(), l = nlohmann::json::array();
  for (const auto& f : in_R) r.push_back(slope_json(f));
  for (const auto& f : in_lambda) l.push_back(slope_json(f));
  return {{"slope_in_R", r}, {"slope_in_lambda", l}};
}

ScalingFit scaling_fit(const BoundStudy& study) {
  std::map<double, std::vector<const BoundCell*>> by_lambda, by_R;
  for (const auto& c : study.cells) {
    by_lambda[c.lambda].push_back(&c);
    by_R[c.R].push_back(&c);
  }
  if (by_R.size() < 3) throw Error(ErrorKind::Config, "scaling fit needs at least three R values");
  ScalingFit out;
  for (const auto& [lambda, cells] : by_lambda) {
    std::vector<double> lx, ly;
    for (const auto* c : cells) {
      if (c->excluded || !(c->m2 > 0)) continue;
      lx.push_back(std::log(c->R));
      ly.push_back(std::log(c->m2));
    }
    if (lx.size() >= 2) out.in_R.push_back(ols(lambda, lx, ly));
  }
  for (const auto& [R, cells] : by_R) {
    std::vector<double> lx, ly;
    for (const auto* c : cells) {
      if (c->excluded || !(c->m2 > 0)) continue;
      lx.push_back(std::log(c->lambda));
      ly.push_back(std::log(c->m2));
    }
    if (lx.size() >= 2) out.in_lambda.push_back(ols(R, lx, ly));
  }
  return out;
}

BoundStudy assemble_study(const std::vector<Replications>& per_R, const std::vector<double>& lambdas, double center) {
  if (per_R.empty() || lambdas.empty()) throw Error(ErrorKind::Config, "bound study grid is empty");
  for (double l : lambdas)
    if (!(l > 0)) throw Error(ErrorKind::Config, "window widths must be positive");
  std::vector<const Replications*> sorted;
  for (const auto& r : per_R) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const auto* l, const auto* r) { return l->R < r->R; });
  std::vector<double> ls = lambdas;
  std::sort(ls.begin(), ls.end());

  BoundStudy out;
  out.dim = sorted.front()->dim;
  out.kernel = sorted.front()->kernel;
  out.center = center;
  out.reps = static_cast<std::int64_t>(sorted.front()->size());
  out.M = sorted.front()->M;
  out.seed = sorted.front()->seed;
  out.slope_target = out.dim == 1 ? 2 : 4;
  for (const auto* reps : sorted) {
    out.flagged = out.flagged || reps->flagged();
    for (double l : ls) {
      const auto m = summarize(*reps, center - l / 2, center + l / 2);
      BoundCell c;
      c.R = reps->R;
      c.lambda = l;
      c.mean = m.mean;
      c.m2 = m.second_moment;
      c.se_mean = m.se_mean;
      c.se_m2 = m.se_second_moment;
      c.p_ge1 = m.p_ge1;
      c.p_ge2 = m.p_ge2;
      c.bound_value = m.bound_value;
      c.ratio = c.m2 / c.bound_value;
      c.excluded = !(c.m2 > 0) || c.se_m2 > 0.3 * c.m2;
      out.cells.push_back(c);
    }
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (const auto& c : out.cells) {
    if (c.excluded) continue;
    lo = std::min(lo, c.ratio);
    hi = std::max(hi, c.ratio);
  }
  if (hi > 0) {
    out.c_star = hi;
    out.span = hi / lo;
  }
  if (sorted.size() >= 3) {
    const auto fit = scaling_fit(out);
    for (const auto& f : fit.in_R)
      if (f.fixed == ls.back()) out.slope_at_max_lambda = f.slope;
  }
  out.pass = hi > 0 && out.span <= 10 && std::abs(out.slope_at_max_lambda - out.slope_target) <= 0.3;
  return out;
}

nlohmann::json BoundStudy::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : cells) {
    rows.push_back({{"R", c.R},
                    {"lambda", c.lambda},
                    {"mean", c.mean},
                    {"m2", c.m2},
                    {"se_mean", c.se_mean},
                    {"se_m2", c.se_m2},
                    {"p_ge1", c.p_ge1},
                    {"p_ge2", c.p_ge2},
                    {"bound_value", c.bound_value},
                    {"ratio", c.ratio},
                    {"excluded", c.excluded}});
  }
  return {{"dim", dim},
          {"kernel", kernel},
          {"center", center},
          {"reps", reps},
          {"M", M},
          {"seed", seed},
          {"cells", rows},
          {"c_star", c_star},
          {"span", span},
          {"slope_at_max_lambda", slope_at_max_lambda},
          {"slope_target", slope_target},
          {"flagged", flagged},
          {"pass", pass}};
}

void BoundStudy::write_csv(std::ostream& os) const {
  os << "dim,R,lambda,mean,m2,se_mean,se_m2,bound_value,ratio,excluded\n";
  os << std::setprecision(17);
  for (const auto& c : cells) {
    os << dim << ',' << c.R << ',' << c.lambda << ',' << c.mean << ',' << c.m2 << ',' << c.se_mean << ','
       << c.se_m2 << ',' << c.bound_value << ',' << c.ratio << ',' << (c.excluded ? 1 : 0) << '\n';
  }
}

BoundStudy verify_second_moment_bound(const KernelModel& model, const std::vector<double>& R_list,
                                      const std::vector<double>& lambda_list, int reps, std::uint64_t seed,
                                      const StudyConfig& cfg) {
  if (R_list.empty()) throw Error(ErrorKind::Config, "bound study grid is empty");
  std::vector<Replications> per_R;
  for (double R : R_list) per_R.push_back(replicate(model, R, reps, seed, cfg));
  return assemble_study(per_R, lambda_list, cfg.center);
}

nlohmann::json CrossoverReport::to_json() const {
  return {{"moments", moments.to_json()}, {"ratio", ratio}, {"ratio_se", ratio_se}, {"pass", pass}};
}

CrossoverReport crossover_check(const Replications& reps, double a, double b) {
  CrossoverReport out;
  out.moments = summarize(reps, a, b);
  if (!(out.moments.mean > 0)) {
    out.ratio = out.ratio_se = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.ratio = out.moments.second_moment / out.moments.mean;
  const auto counts = reps.counts(a, b);
  std::vector<double> x(counts.size()), y(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    x[k] = static_cast<double>(counts[k]);
    y[k] = x[k] * x[k];
  }
  out.ratio_se = jackknife_se(x, y, [](double s1, double s2, double) { return s1 > 0 ? s2 / s1 : 1.0; });
  out.pass = out.ratio >= 1 && out.ratio <= 1 + 3 * out.ratio_se && out.moments.p_ge2 < 0.01;
  return out;
}

}  // namespace critlab
