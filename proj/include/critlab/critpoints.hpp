#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "critlab/simulate.hpp"

namespace critlab {

struct DetectorConfig {
  double grid_h = 0.3;
  double tol_grad = 1e-9;
  int newton_max_iter = 40;
  double dedupe_radius = 1e-4;
  /// A cell is seeded when both gradient components change sign on its
  /// corners, or when a Newton step taken from one of its corners with the
  /// grid Hessian lands within reach * grid_h of the cell.
  double reach = 0.25;
  /// Seed Newton from every cell centre, skipping the sign test.
  bool exhaustive = false;
  nlohmann::json to_json() const;
};

enum class CriticalType { Maximum, Minimum, Saddle, Degenerate };
std::string to_string(CriticalType type);

struct CriticalPoint {
  Point location = Point::Zero();
  double height = 0;
  Eigen::Vector3d hessian = Eigen::Vector3d::Zero();  // (h11, h12, h22)
  CriticalType type = CriticalType::Saddle;
  double gradient_norm = 0;
};

struct DetectorDiagnostics {
  std::int64_t cells_scanned = 0;
  std::int64_t seeds = 0;
  std::int64_t newton_failures = 0;
  std::int64_t escapes = 0;     // wandered beyond the padded disc
  std::int64_t departures = 0;  // left the seed cell's neighbourhood (2 h)
  std::int64_t stalls = 0;      // crept towards a non-zero minimum of |grad f|
  std::int64_t dedupe_merges = 0;
  bool low_confidence = false;
  nlohmann::json to_json() const;
};

struct CriticalPointSet {
  std::vector<CriticalPoint> points;  // sorted lexicographically by location
  double R = 0;
  DetectorConfig config;
  DetectorDiagnostics diagnostics;
};

CriticalType classify(const Eigen::Vector3d& hessian);

CriticalPointSet find_critical_points(const WaveEnsemble& field, double R, const DetectorConfig& cfg = {});

/// Heights in the closed interval [a, b]; infinite bounds allowed.
std::int64_t count_in_window(const CriticalPointSet& set, double a, double b);

struct PairCounts {
  std::int64_t n1 = 0;  // ordered pairs further apart than delta
  std::int64_t n2 = 0;  // ordered pairs at distance in (0, delta]
  std::int64_t n3 = 0;  // diagonal pairs, i.e. the in-window count
};

/// Ordered-pair partition of the points; distance(i, j) gives the separation.
template <class Distance>
PairCounts pair_partition(std::size_t n, double delta, Distance&& distance) {
  PairCounts out;
  out.n3 = static_cast<std::int64_t>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) (distance(i, j) > delta ? out.n1 : out.n2) += 2;
  return out;
}

PairCounts pair_counts(const CriticalPointSet& set, double a, double b, double delta);

/// x, y, height, h11, h12, h22, type
void write_csv(const CriticalPointSet& set, std::ostream& os);

}  // namespace critlab
