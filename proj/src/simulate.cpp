#include "critlab/simulate.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "critlab/seeding.hpp"

namespace critlab {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

// d^k/dt^k cos(t) from (cos t, sin t).
inline double cos_derivative(int k, double c, double s) {
  switch (k & 3) {
    case 0:
      return c;
    case 1:
      return -s;
    case 2:
      return -c;
    default:
      return s;
  }
}

inline double ipow(double x, int k) {
  double out = 1;
  for (int i = 0; i < k; ++i) out *= x;
  return out;
}

}  // namespace

WaveEnsemble WaveEnsemble::from_waves(Eigen::Matrix2Xd wavevectors, Eigen::VectorXd phases, double amplitude) {
  if (wavevectors.cols() != phases.size()) throw Error(ErrorKind::Config, "one phase per wavevector");
  WaveEnsemble e;
  e.wavevectors_ = std::move(wavevectors);
  e.phases_ = std::move(phases);
  e.amplitude_ = amplitude;
  return e;
}

WaveEnsemble sample_field(const KernelModel& model, int M, std::uint64_t seed) {
  if (M < 16) throw Error(ErrorKind::Config, "ensemble needs at least 16 waves");
  const auto measure = model.spectral_measure();
  if (!measure.sampleable())
    throw Error(ErrorKind::NotSampleable, "spectral measure of " + model.id() + " has no sampler");
  Engine rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  WaveEnsemble e;
  e.wavevectors_.resize(2, M);
  e.phases_.resize(M);
  for (int j = 0; j < M; ++j) {
    if (measure.kind() == SpectralMeasure::Kind::Circle) {
      const double t = kTwoPi * (j + unit(rng)) / M;
      e.wavevectors_.col(j) = measure.radius() * Eigen::Vector2d(std::cos(t), std::sin(t));
    } else {
      e.wavevectors_.col(j) = measure.sample(rng);
    }
    e.phases_(j) = kTwoPi * unit(rng);
  }
  e.amplitude_ = std::sqrt(2 * measure.mass() / M);
  e.seed_ = seed;
  e.kernel_id_ = model.id();
  return e;
}

double WaveEnsemble::eval(const Point& x, MultiIndex alpha) const {
  if (alpha.a < 0 || alpha.b < 0 || alpha.order() > 2)
    throw Error(ErrorKind::UnsupportedOrder, "ensemble derivatives are limited to order 2");
  double total = 0;
  for (int j = 0; j < size(); ++j) {
    const double s1 = wavevectors_(0, j), s2 = wavevectors_(1, j);
    const double t = s1 * x.x() + s2 * x.y() + phases_(j);
    const double mono = ipow(s1, alpha.a) * ipow(s2, alpha.b);
    total += mono * cos_derivative(alpha.order(), std::cos(t), std::sin(t));
  }
  return amplitude_ * total;
}

WaveEnsemble::Jet WaveEnsemble::jet(const Point& x) const {
  double v = 0, g1 = 0, g2 = 0, h11 = 0, h12 = 0, h22 = 0;
  for (int j = 0; j < size(); ++j) {
    const double s1 = wavevectors_(0, j), s2 = wavevectors_(1, j);
    const double t = s1 * x.x() + s2 * x.y() + phases_(j);
    const double c = std::cos(t), s = std::sin(t);
    v += c;
    g1 -= s1 * s;
    g2 -= s2 * s;
    h11 -= s1 * s1 * c;
    h12 -= s1 * s2 * c;
    h22 -= s2 * s2 * c;
  }
  Jet out;
  out.value = amplitude_ * v;
  out.gradient = amplitude_ * Eigen::Vector2d(g1, g2);
  out.hessian << amplitude_ * h11, amplitude_ * h12, amplitude_ * h12, amplitude_ * h22;
  return out;
}

WaveEnsemble::GridJet WaveEnsemble::jet_grid(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) const {
  // With a = s1 x + phi and b = s2 y, sin(a + b) and cos(a + b) expand into
  // products of per-axis factors, so every grid is two matrix products.
  const Eigen::Index m = size();
  Eigen::MatrixXd ca(xs.size(), m), sa(xs.size(), m), cb(m, ys.size()), sb(m, ys.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      const double a = wavevectors_(0, j) * xs(i) + phases_(j);
      ca(i, j) = std::cos(a);
      sa(i, j) = std::sin(a);
    }
    for (Eigen::Index l = 0; l < ys.size(); ++l) {
      const double b = wavevectors_(1, j) * ys(l);
      cb(j, l) = std::cos(b);
      sb(j, l) = std::sin(b);
    }
  }
  const Eigen::ArrayXd s1 = wavevectors_.row(0).transpose().array();
  const Eigen::ArrayXd s2 = wavevectors_.row(1).transpose().array();
  auto sin_sum = [&](const Eigen::ArrayXd& w) -> Eigen::MatrixXd {
    const auto d = w.matrix().asDiagonal();
    return -amplitude_ * ((sa * d) * cb + (ca * d) * sb);
  };
  auto cos_sum = [&](const Eigen::ArrayXd& w) -> Eigen::MatrixXd {
    const auto d = w.matrix().asDiagonal();
    return -amplitude_ * ((ca * d) * cb - (sa * d) * sb);
  };
  GridJet out;
  out.g1 = sin_sum(s1);
  out.g2 = sin_sum(s2);
  out.h11 = cos_sum(s1 * s1);
  out.h12 = cos_sum(s1 * s2);
  out.h22 = cos_sum(s2 * s2);
  return out;
}

nlohmann::json WaveEnsemble::to_json() const {
  return {{"seed", seed_}, {"M", size()}, {"kernel", kernel_id_}};
}

WaveEnsemble1d WaveEnsemble1d::from_waves(Eigen::VectorXd frequencies, Eigen::VectorXd phases, double amplitude) {
  if (frequencies.size() != phases.size()) throw Error(ErrorKind::Config, "one phase per frequency");
  WaveEnsemble1d e;
  e.frequencies_ = std::move(frequencies);
  e.phases_ = std::move(phases);
  e.amplitude_ = amplitude;
  return e;
}

WaveEnsemble1d sample_field_1d(const KernelModel& model, int M, std::uint64_t seed) {
  if (M < 16) throw Error(ErrorKind::Config, "ensemble needs at least 16 waves");
  const auto measure = model.spectral_measure();
  if (!measure.sampleable())
    throw Error(ErrorKind::NotSampleable, "spectral measure of " + model.id() + " has no sampler");
  Engine rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  WaveEnsemble1d e;
  e.frequencies_.resize(M);
  e.phases_.resize(M);
  for (int j = 0; j < M; ++j) {
    if (measure.kind() == SpectralMeasure::Kind::Circle) {
      e.frequencies_(j) = measure.radius() * std::cos(kTwoPi * (j + unit(rng)) / M);
    } else {
      e.frequencies_(j) = measure.sample(rng).x();
    }
    e.phases_(j) = kTwoPi * unit(rng);
  }
  e.amplitude_ = std::sqrt(2 * measure.mass() / M);
  return e;
}

double WaveEnsemble1d::eval(double x, int k) const {
  if (k < 0 || k > 3) throw Error(ErrorKind::UnsupportedOrder, "1D ensemble derivatives are limited to order 3");
  double total = 0;
  for (int j = 0; j < size(); ++j) {
    const double t = frequencies_(j) * x + phases_(j);
    total += ipow(frequencies_(j), k) * cos_derivative(k, std::cos(t), std::sin(t));
  }
  return amplitude_ * total;
}

Eigen::VectorXd WaveEnsemble1d::eval_grid(const Eigen::VectorXd& xs, int k) const {
  if (k < 0 || k > 3) throw Error(ErrorKind::UnsupportedOrder, "1D ensemble derivatives are limited to order 3");
  const Eigen::ArrayXXd t = (xs * frequencies_.transpose()).array().rowwise() + phases_.transpose().array();
  const Eigen::ArrayXd weight = amplitude_ * frequencies_.array().pow(k);
  const Eigen::ArrayXXd wave = (k % 2 == 0) ? Eigen::ArrayXXd(t.cos()) : Eigen::ArrayXXd(t.sin());
  const double sign = (k == 1 || k == 2) ? -1.0 : 1.0;
  return sign * (wave.matrix() * weight.matrix());
}

}  // namespace critlab
