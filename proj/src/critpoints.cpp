#include "critlab/critpoints.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>

namespace critlab {

nlohmann::json DetectorConfig::to_json() const {
  return {{"grid_h", grid_h},
          {"tol_grad", tol_grad},
          {"newton_max_iter", newton_max_iter},
          {"dedupe_radius", dedupe_radius},
          {"reach", reach},
          {"exhaustive", exhaustive}};
}

nlohmann::json DetectorDiagnostics::to_json() const {
  return {{"cells_scanned", cells_scanned}, {"seeds", seeds},
          {"newton_failures", newton_failures}, {"escapes", escapes}, {"departures", departures}, {"stalls", stalls},
          {"dedupe_merges", dedupe_merges}, {"low_confidence", low_confidence}};
}

std::string to_string(CriticalType type) {
  switch (type) {
    case CriticalType::Maximum:
      return "max";
    case CriticalType::Minimum:
      return "min";
    case CriticalType::Saddle:
      return "saddle";
    case CriticalType::Degenerate:
      return "degenerate";
  }
  return "unknown";
}

CriticalType classify(const Eigen::Vector3d& h) {
  const double det = h(0) * h(2) - h(1) * h(1);
  if (std::abs(det) < 1e-10) return CriticalType::Degenerate;
  if (det < 0) return CriticalType::Saddle;
  return h(0) < 0 ? CriticalType::Maximum : CriticalType::Minimum;
}

namespace {

enum class NewtonOutcome { Converged, Failed, Escaped, Departed, Stalled };

// Newton on grad f = 0 with the step capped at step_cap and halved until |grad f|
// decreases. Three consecutive steps that shrink |grad f| by less than 1% mean
// the iterate is creeping towards a non-zero minimum of |grad f|.
NewtonOutcome newton(const WaveEnsemble& field, Point& x, double step_cap, double escape_radius,
                     double leash, const DetectorConfig& cfg, WaveEnsemble::Jet& jet) {
  const Point start = x;
  jet = field.jet(x);
  double gnorm = jet.gradient.norm();
  int slow = 0;
  for (int it = 0; it < cfg.newton_max_iter; ++it) {
    if (gnorm <= cfg.tol_grad) return NewtonOutcome::Converged;
    const Eigen::Matrix2d& h = jet.hessian;
    const double det = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
    Eigen::Vector2d step;
    if (std::abs(det) > 1e-14 * h.squaredNorm()) {
      step = -Eigen::Vector2d(h(1, 1) * jet.gradient(0) - h(0, 1) * jet.gradient(1),
                              -h(1, 0) * jet.gradient(0) + h(0, 0) * jet.gradient(1)) /
             det;
    } else {
      step = -jet.gradient;
    }
    const double len = step.norm();
    if (len > step_cap) step *= step_cap / len;
    bool moved = false;
    for (int halving = 0; halving < 8; ++halving) {
      const Point trial = x + step;
      WaveEnsemble::Jet next = field.jet(trial);
      const double trial_norm = next.gradient.norm();
      if (trial_norm < gnorm) {
        slow = trial_norm > 0.99 * gnorm ? slow + 1 : 0;
        x = trial;
        jet = next;
        gnorm = trial_norm;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (gnorm <= cfg.tol_grad) return NewtonOutcome::Converged;
    if (!moved || slow >= 3) return NewtonOutcome::Stalled;
    if (x.norm() > escape_radius) return NewtonOutcome::Escaped;
    if ((x - start).lpNorm<Eigen::Infinity>() > leash) return NewtonOutcome::Departed;
  }
  return gnorm <= cfg.tol_grad ? NewtonOutcome::Converged : NewtonOutcome::Failed;
}

}  // namespace

CriticalPointSet find_critical_points(const WaveEnsemble& field, double R, const DetectorConfig& cfg) {
  if (!(cfg.grid_h > 0 && cfg.grid_h <= 0.4)) throw Error(ErrorKind::Config, "grid_h must lie in (0, 0.4]");
  if (!(R >= 1)) throw Error(ErrorKind::Config, "detection radius must be at least 1");
  if (!(cfg.reach >= 0)) throw Error(ErrorKind::Config, "reach must be non-negative");
  const double h = cfg.grid_h;
  const double padded = R + 2 * h;
  const auto n = static_cast<Eigen::Index>(std::ceil(2 * padded / h)) + 1;
  Eigen::VectorXd xs(n);
  for (Eigen::Index i = 0; i < n; ++i) xs(i) = -padded + static_cast<double>(i) * h;

  WaveEnsemble::GridJet grid;
  if (!cfg.exhaustive) grid = field.jet_grid(xs, xs);
  // A cell is seeded when both gradient components change sign on its corners,
  // or when a Newton step from one of its corners lands within reach of it.
  auto candidate = [&](Eigen::Index i, Eigen::Index j) {
    bool lo1 = false, hi1 = false, lo2 = false, hi2 = false;
    for (Eigen::Index di = 0; di < 2; ++di) {
      for (Eigen::Index dj = 0; dj < 2; ++dj) {
        const Eigen::Index a = i + di, b = j + dj;
        const double v1 = grid.g1(a, b), v2 = grid.g2(a, b);
        lo1 = lo1 || v1 <= 0;
        hi1 = hi1 || v1 >= 0;
        lo2 = lo2 || v2 <= 0;
        hi2 = hi2 || v2 >= 0;
        const double h11 = grid.h11(a, b), h12 = grid.h12(a, b), h22 = grid.h22(a, b);
        const double det = h11 * h22 - h12 * h12;
        if (det == 0) continue;
        // offset of the predicted zero from the corner, in cell units
        const double u = -(h22 * v1 - h12 * v2) / det / h + static_cast<double>(di);
        const double w = -(-h12 * v1 + h11 * v2) / det / h + static_cast<double>(dj);
        if (u >= -cfg.reach && u <= 1 + cfg.reach && w >= -cfg.reach && w <= 1 + cfg.reach) return true;
      }
    }
    return lo1 && hi1 && lo2 && hi2;
  };

  CriticalPointSet out;
  out.R = R;
  out.config = cfg;
  auto& diag = out.diagnostics;

  std::vector<CriticalPoint> found;
  const double disc_reach = padded + h * std::numbers::sqrt2 / 2;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
      const Point centre(xs(i) + h / 2, xs(j) + h / 2);
      if (centre.norm() > disc_reach) continue;
      ++diag.cells_scanned;
      if (!cfg.exhaustive && !candidate(i, j)) continue;
      ++diag.seeds;
      Point x = centre;
      WaveEnsemble::Jet jet;
      switch (newton(field, x, h, padded + 2 * h, 2 * h, cfg, jet)) {
        case NewtonOutcome::Failed:
          ++diag.newton_failures;
          continue;
        case NewtonOutcome::Escaped:
          ++diag.escapes;
          continue;
        case NewtonOutcome::Departed:
          ++diag.departures;
          continue;
        case NewtonOutcome::Stalled:
          ++diag.stalls;
          continue;
        case NewtonOutcome::Converged:
          break;
      }
      CriticalPoint p;
      p.location = x;
      p.height = jet.value;
      p.hessian = Eigen::Vector3d(jet.hessian(0, 0), jet.hessian(0, 1), jet.hessian(1, 1));
      p.type = classify(p.hessian);
      p.gradient_norm = jet.gradient.norm();
      found.push_back(p);
    }
  }

  std::sort(found.begin(), found.end(), [](const CriticalPoint& l, const CriticalPoint& r) {
    return l.location.x() < r.location.x() || (l.location.x() == r.location.x() && l.location.y() < r.location.y());
  });
  std::vector<CriticalPoint> unique;
  for (const auto& p : found) {
    bool merged = false;
    for (auto it = unique.rbegin(); it != unique.rend() && it->location.x() >= p.location.x() - cfg.dedupe_radius;
         ++it) {
      if ((it->location - p.location).norm() <= cfg.dedupe_radius) {
        merged = true;
        break;
      }
    }
    if (merged) {
      ++diag.dedupe_merges;
    } else {
      unique.push_back(p);
    }
  }
  for (const auto& p : unique)
    if (p.location.norm() <= R) out.points.push_back(p);
  diag.low_confidence = diag.seeds > 0 && diag.newton_failures > 0.05 * static_cast<double>(diag.seeds);
  return out;
}

std::int64_t count_in_window(const CriticalPointSet& set, double a, double b) {
  if (!(a <= b)) throw Error(ErrorKind::Config, "height window needs a <= b");
  return std::count_if(set.points.begin(), set.points.end(),
                       [&](const CriticalPoint& p) { return p.height >= a && p.height <= b; });
}

PairCounts pair_counts(const CriticalPointSet& set, double a, double b, double delta) {
  if (!(delta > 0)) throw Error(ErrorKind::Config, "delta must be positive");
  if (!(a <= b)) throw Error(ErrorKind::Config, "height window needs a <= b");
  std::vector<Point> in;
  for (const auto& p : set.points)
    if (p.height >= a && p.height <= b) in.push_back(p.location);
  return pair_partition(in.size(), delta, [&](std::size_t i, std::size_t j) { return (in[i] - in[j]).norm(); });
}

void write_csv(const CriticalPointSet& set, std::ostream& os) {
  os << "x,y,height,h11,h12,h22,type\n";
  os << std::setprecision(17);
  for (const auto& p : set.points) {
    os << p.location.x() << ',' << p.location.y() << ',' << p.height << ',' << p.hessian(0) << ','
       << p.hessian(1) << ',' << p.hessian(2) << ',' << to_string(p.type) << '\n';
  }
}

}  // namespace critlab
