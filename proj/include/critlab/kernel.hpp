#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "critlab/error.hpp"
#include "critlab/scalar.hpp"
#include "critlab/seeding.hpp"

namespace critlab {

using Point = Eigen::Vector2d;

/// Partial derivative order: d^a/dx1^a d^b/dx2^b.
struct MultiIndex {
  int a = 0;
  int b = 0;
  constexpr int order() const { return a + b; }
  friend constexpr MultiIndex operator+(MultiIndex l, MultiIndex r) { return {l.a + r.a, l.b + r.b}; }
  friend constexpr bool operator==(MultiIndex l, MultiIndex r) = default;
};

inline constexpr int kMaxDerivativeOrder = 6;

enum class KernelKind { PlaneWave, BargmannFock, UserRadial };

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

class SpectralMeasure;

/// Stationary isotropic covariance kappa(x) = amplitude * h(|x| / length_scale).
///
/// The profile is stored as a function of v = r^2 / 2, which turns the radial
/// chain rule into a finite sum with polynomial coefficients in x and removes
/// the r = 0 singularity entirely:
///   plane wave     h(v) = J0(sqrt(2v)),   h^(k)(v) = (-1)^k J_k(r) / r^k
///   Bargmann-Fock  h(v) = exp(-v)
///   user radial    h(r) = sum_j c_j r^{2j}  (c_0 = 1 after construction)
class KernelModel {
 public:
  static KernelModel plane_wave(double length_scale = 1.0, double amplitude = 1.0);
  static KernelModel bargmann_fock(double length_scale = 1.0, double amplitude = 1.0);
  /// series[j] multiplies r^{2j}. The series is rescaled so the profile is 1 at
  /// the origin; its constant term is folded into the amplitude.
  static KernelModel user_radial(std::vector<double> series, double length_scale = 1.0,
                                 double amplitude = 1.0);

  /// {kind, length_scale, amplitude, profile_series?}
  static KernelModel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  KernelKind kind() const { return kind_; }
  double length_scale() const { return length_; }
  double amplitude() const { return amplitude_; }
  const std::vector<double>& series() const { return series_; }
  bool normalized() const { return normalized_; }
  /// Original-domain length per normalized-domain length (1 until normalize()).
  double rescale_factor() const { return rescale_; }
  std::string id() const;

  /// k-th derivative of the unit-scale profile h in v = r^2/2.
  template <class S>
  S base_derivative(int k, const S& v) const;

  /// k-th derivative of kappa viewed as a function of u = |x|^2 / 2.
  template <class S>
  S profile_derivative(int k, const S& u) const {
    const S ell2 = S(length_) * S(length_);
    S scale = S(amplitude_);
    for (int i = 0; i < k; ++i) scale /= ell2;
    return scale * base_derivative<S>(k, u / ell2);
  }

  SpectralMeasure spectral_measure() const;

 private:
  friend KernelModel normalize(const KernelModel& model);

  KernelKind kind_ = KernelKind::BargmannFock;
  double length_ = 1.0;
  double amplitude_ = 1.0;
  std::vector<double> series_;
  bool normalized_ = false;
  double rescale_ = 1.0;
};

namespace detail {

// Coefficient of x^{n-2j} g^{(n-j)}(x^2/2) in d^n/dx^n g(x^2/2):
// n! / (j! (n-2j)! 2^j).
constexpr std::array<std::array<double, 4>, kMaxDerivativeOrder + 1> kHermiteTable = {{
    {1, 0, 0, 0},
    {1, 0, 0, 0},
    {1, 1, 0, 0},
    {1, 3, 0, 0},
    {1, 6, 3, 0},
    {1, 10, 15, 0},
    {1, 15, 45, 15},
}};

template <class S>
S int_pow(const S& x, int n) {
  S out(1);
  for (int i = 0; i < n; ++i) out *= x;
  return out;
}

template <class S>
S bessel_ratio_series(int k, const S& v) {
  // sum_m (-v/2)^m / (2^k m! (m+k)!)
  S denom(1);
  for (int i = 2; i <= k; ++i) denom *= S(i);
  denom *= int_pow(S(2), k);
  S term = S(1) / denom;
  S sum = term;
  const S x = -v / S(2);
  for (int m = 1; m < 200; ++m) {
    term *= x / (S(m) * S(m + k));
    sum += term;
    using std::abs;
    if (abs(term) <= scalar_epsilon<S>() * abs(sum) * S(1e-2)) break;
  }
  return sum;
}

}  // namespace detail

template <class S>
S KernelModel::base_derivative(int k, const S& v) const {
  using std::exp;
  using std::sqrt;
  if (k < 0 || k > kMaxDerivativeOrder)
    throw Error(ErrorKind::UnsupportedOrder, "profile derivative order " + std::to_string(k));
  const S sign = (k % 2 == 0) ? S(1) : S(-1);
  switch (kind_) {
    case KernelKind::BargmannFock:
      return sign * exp(-v);
    case KernelKind::PlaneWave: {
      // series below r = 4 keeps every term below 4 in magnitude
      if (v < S(8)) return sign * detail::bessel_ratio_series<S>(k, v);
      const S r = sqrt(S(2) * v);
      return sign * boost::math::cyl_bessel_j(k, r) / detail::int_pow(r, k);
    }
    case KernelKind::UserRadial: {
      S out(0);
      S two_pow = detail::int_pow(S(2), k);
      for (std::size_t j = static_cast<std::size_t>(k); j < series_.size(); ++j) {
        // d^k/dv^k of c_j 2^j v^j
        S falling(1);
        for (int i = 0; i < k; ++i) falling *= S(static_cast<int>(j) - i);
        out += S(series_[j]) * two_pow * falling * detail::int_pow(v, static_cast<int>(j) - k);
        two_pow *= S(2);
      }
      return out;
    }
  }
  return S(0);
}

/// d^alpha kappa at x, exact up to roundoff in the profile derivatives.
template <class S = double>
S kernel_derivative(const KernelModel& model, MultiIndex alpha, const S& x1, const S& x2) {
  if (alpha.a < 0 || alpha.b < 0 || alpha.order() > kMaxDerivativeOrder)
    throw Error(ErrorKind::UnsupportedOrder,
                "derivative order " + std::to_string(alpha.order()) + " exceeds 6");
  const S u = (x1 * x1 + x2 * x2) / S(2);
  S total(0);
  for (int j = 0; 2 * j <= alpha.a; ++j) {
    for (int l = 0; 2 * l <= alpha.b; ++l) {
      const S coeff = S(detail::kHermiteTable[alpha.a][j] * detail::kHermiteTable[alpha.b][l]);
      const S mono = detail::int_pow(x1, alpha.a - 2 * j) * detail::int_pow(x2, alpha.b - 2 * l);
      if (mono == S(0)) continue;
      total += coeff * mono * model.profile_derivative<S>(alpha.order() - j - l, u);
    }
  }
  return total;
}

inline double kernel_derivative(const KernelModel& model, MultiIndex alpha, const Point& x) {
  return kernel_derivative<double>(model, alpha, x.x(), x.y());
}

/// Rescale amplitude and domain so that Var f = 1 and Cov[grad f] = Id.
KernelModel normalize(const KernelModel& model);

/// Spectral measure rho with kappa(x) = int exp(i<x,s>) d rho(s).
class SpectralMeasure {
 public:
  enum class Kind {
    Circle,    // uniform on |s| = radius
    Gaussian,  // isotropic normal density with per-axis std `radius`
    Atoms,     // finite symmetric point set
    Moments    // known only through kernel derivatives at 0
  };
  struct Atom {
    Eigen::Vector2d s;
    double weight;
  };

  static SpectralMeasure circle(double radius, double mass = 1.0);
  static SpectralMeasure gaussian(double sigma, double mass = 1.0);
  /// Each atom is mirrored across both axes, a quarter of its weight per copy.
  static SpectralMeasure atoms(std::vector<Atom> atoms);
  static SpectralMeasure from_kernel(const KernelModel& model);

  Kind kind() const { return kind_; }
  double mass() const { return mass_; }
  double radius() const { return radius_; }
  const std::vector<Atom>& atom_list() const { return atoms_; }
  bool sampleable() const { return kind_ != Kind::Moments; }

  /// int s1^a s2^b d rho. Odd a or b returns exactly 0.
  double moment(int a, int b) const;

  /// One wavevector drawn from rho / mass.
  Eigen::Vector2d sample(Engine& rng) const;

 private:
  Kind kind_ = Kind::Gaussian;
  double mass_ = 1.0;
  double radius_ = 1.0;
  std::vector<Atom> atoms_;
  std::vector<double> kernel_moments_;  // Moments kind: m_{a,b} at a*7+b
};

inline double spectral_moment(const SpectralMeasure& measure, int a, int b) {
  return measure.moment(a, b);
}

struct ConditionReport {
  int v_grid = 0;
  double far_radius = 0;
  /// inf_v Var[d_v^{(2,0)} f] - 1 and inf_v Var[d_v^{(1,1)} f].
  double margin_20 = 0;
  double margin_11 = 0;
  double argmin_20 = 0;  // angle of v attaining the margin
  double argmin_11 = 0;
  /// max_v |Var[d_v^{(1,0)} f] - 1|, normalization consistency.
  double gradient_variance_deviation = 0;
  /// max_{|alpha|<=2} |d^alpha kappa| over directions at far_radius.
  double far_max_derivative = 0;
  double decay_tolerance = 0.25;
  bool condition1_decay = false;
  bool condition2_support = false;
  bool pass() const { return condition1_decay && condition2_support; }
  nlohmann::json to_json() const;
};

/// Directional spectral variance checks: the c2 margins of the near-diagonal
/// lemma and the far-field decay of kappa.
ConditionReport check_conditions(const SpectralMeasure& measure, const KernelModel* model,
                                 int v_grid = 360, double far_radius = 50.0,
                                 double decay_tolerance = 0.25);
ConditionReport check_conditions(const KernelModel& model, int v_grid = 360,
                                 double far_radius = 50.0, double decay_tolerance = 0.25);

}  // namespace critlab
